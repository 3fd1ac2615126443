#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mandm/segment.hpp"
#include "mandm/usage.hpp"

namespace mandm {

using NodeId = std::string;
using UserId = std::string;
using JobId = std::string;

struct NodeSpec {
    std::uint32_t cpu_cores = 1;
    std::uint32_t mem_total_mb = 1;
    std::uint32_t gpu_count = 0;

    bool operator==(const NodeSpec&) const = default;
};

struct Rack {
    std::string rack_id;
    std::vector<NodeId> node_ids;

    bool operator==(const Rack&) const = default;
};

struct ClusterTopology {
    std::vector<Rack> racks;
    std::map<NodeId, NodeSpec> node_specs;

    /// Throws ValidationError naming the first offending id.
    void validate() const;
    std::size_t node_count() const noexcept { return node_specs.size(); }
    bool operator==(const ClusterTopology&) const = default;
};

struct NodeTelemetry {
    NodeId node_id;
    std::int64_t ts = 0;
    double cpu_load_pct = 0;
    double mem_used_pct = 0;
    double net_rx_mbps = 0;
    double net_tx_mbps = 0;
    std::vector<double> gpu_load_pct;

    bool operator==(const NodeTelemetry&) const = default;
};

enum class JobEventKind : std::uint8_t { Start, Update, End };

struct JobEvent {
    JobEventKind kind = JobEventKind::Start;
    JobId job_id;
    UserId user_id;
    std::int64_t ts = 0;
    std::optional<std::set<NodeId>> node_ids;
    std::optional<std::uint64_t> files_open;

    bool operator==(const JobEvent&) const = default;
};

struct UserInfo {
    UserId user_id;
    std::string name;
    std::string rank;

    bool operator==(const UserInfo&) const = default;
};

struct UserAggregate {
    std::uint64_t node_count = 0;
    std::uint64_t file_count = 0;
    std::uint64_t job_count = 0;
    std::uint64_t alert_count = 0;
    double usage = 0;
    Tier tier = Tier::Normal;

    bool operator==(const UserAggregate&) const = default;
};

struct ActiveJob {
    UserId user_id;
    std::set<NodeId> node_ids;
    std::uint64_t files_open = 0;
    std::int64_t start_ts = 0;

    bool operator==(const ActiveJob&) const = default;
};

struct UserEntry {
    UserInfo info;
    UserAggregate aggregate;
};

enum class TelemetryOutcome : std::uint8_t { Applied, Stale };

/// The live twin. Keyed maps make a second entry for the same node or user
/// impossible; every mutation goes through the apply_* members, which keep
/// user aggregates in step with the active job table.
///
/// Single writer. Copying yields an independent value that can be handed
/// to readers.
class ClusterState {
public:
    /// Resolves usage.node_cap == 0 to the topology's node count.
    static ClusterState create(ClusterTopology topology, const std::vector<UserInfo>& users,
                               UsageConfig usage = {});

    TelemetryOutcome apply_telemetry(const NodeTelemetry& t);
    void apply_job_event(const JobEvent& e);

    /// Replaces every user's alert_count with the given per-user totals
    /// (users absent from the map get zero).
    void set_alert_counts(const std::map<UserId, std::uint64_t>& counts);

    Segment snapshot() const;

    const ClusterTopology& topology() const noexcept { return topology_; }
    const std::map<NodeId, NodeTelemetry>& latest() const noexcept { return latest_; }
    const std::map<JobId, ActiveJob>& active_jobs() const noexcept { return active_jobs_; }
    const std::map<UserId, UserEntry>& users() const noexcept { return users_; }
    const UsageConfig& usage_config() const noexcept { return usage_; }
    std::int64_t state_ts() const noexcept { return state_ts_; }
    std::uint64_t stale_dropped() const noexcept { return stale_dropped_; }

    bool has_node(const NodeId& id) const { return topology_.node_specs.contains(id); }
    bool has_user(const UserId& id) const { return users_.contains(id); }
    /// Empty string when unknown.
    const std::string& rack_of(const NodeId& id) const;

private:
    void recompute(const UserId& user);
    void bump_ts(std::int64_t ts) noexcept;

    ClusterTopology topology_;
    std::map<NodeId, std::string> rack_by_node_;
    std::map<NodeId, NodeTelemetry> latest_;
    std::map<JobId, ActiveJob> active_jobs_;
    std::map<UserId, UserEntry> users_;
    UsageConfig usage_;
    std::int64_t state_ts_ = 0;
    std::uint64_t stale_dropped_ = 0;
};

inline constexpr std::string_view kJobRunning = "running";

}  // namespace mandm
