#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mandm/model.hpp"

namespace mandm {

enum class ProfileKind : std::uint8_t { Light, Heavy, Pathological };

std::string_view to_string(ProfileKind k) noexcept;
/// Throws ValidationError for unknown names.
ProfileKind profile_kind_from_string(std::string_view name);

struct ProfileParams {
    double arrivals_per_hour = 0;
    std::uint32_t min_nodes = 1;
    std::uint32_t max_nodes = 1;
    std::uint64_t min_files = 0;
    std::uint64_t max_files = 0;
    std::int64_t min_duration_s = 300;
    std::int64_t max_duration_s = 300;
    std::uint32_t max_active_jobs = 4;
    /// Per active job, per tick.
    double update_probability = 0.1;

    bool operator==(const ProfileParams&) const = default;
};

/// Defaults spanning the three tiers: Light stays Normal, Heavy reaches up
/// to half the node cap, Pathological asks for the whole cap.
ProfileParams default_profile(ProfileKind kind, std::uint32_t node_cap, std::uint32_t file_cap);

struct UserProfile {
    ProfileKind kind = ProfileKind::Light;
    /// Unset means default_profile(kind, ...).
    std::optional<ProfileParams> params;
};

struct SimUser {
    UserInfo info;
    UserProfile profile;
};

inline constexpr std::int64_t kDefaultSimStart = 1699999800;  // on a 300 s boundary
inline constexpr double kIdleCpuCeiling = 10.0;
inline constexpr double kBusyCpuFloor = 40.0;

struct SimConfig {
    std::uint64_t seed = 1;
    std::uint32_t racks = 1;
    std::uint32_t nodes_per_rack = 1;
    std::uint32_t gpus_per_node = 0;
    std::int64_t tick_interval_s = 60;
    std::int64_t start_ts = kDefaultSimStart;
    std::uint32_t cpu_cores = 64;
    std::uint32_t mem_total_mb = 262144;
    std::vector<SimUser> users;

    void validate() const;
};

/// Telemetry and job events produced by one tick, in application order.
struct TickBatch {
    std::int64_t ts = 0;
    std::vector<JobEvent> job_events;
    std::vector<NodeTelemetry> telemetry;

    bool operator==(const TickBatch&) const = default;
};

/// Seeded synthetic cluster. All randomness comes from one mt19937_64
/// (bit-exact across standard libraries); ranges are drawn with the helpers
/// below rather than std::*_distribution, whose output is
/// implementation-defined.
class Simulator {
public:
    const ClusterTopology& topology() const noexcept { return topology_; }
    const std::vector<UserInfo>& users() const noexcept { return user_infos_; }
    std::int64_t clock() const noexcept { return clock_; }
    const SimConfig& config() const noexcept { return cfg_; }
    const ProfileParams& params_for(const UserId& user) const { return params_.at(user); }

    TickBatch tick();

private:
    friend Simulator build_sim(const SimConfig& cfg, const UsageConfig& usage);

    struct SimJob {
        UserId user;
        std::set<NodeId> nodes;
        std::uint64_t files = 0;
        std::int64_t end_ts = 0;
    };

    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);
    double uniform_real(double lo, double hi);
    bool chance(double p);

    SimConfig cfg_;
    ClusterTopology topology_;
    std::vector<NodeId> node_order_;
    std::vector<UserInfo> user_infos_;
    std::map<UserId, ProfileParams> params_;
    std::mt19937_64 rng_;
    std::int64_t clock_ = 0;
    std::uint64_t next_job_ = 1;
    std::map<JobId, SimJob> jobs_;
};

/// Builds `racks * nodes_per_rack` nodes named r<i>n<j> in racks r<i>.
/// usage.node_cap == 0 resolves to the node count when sizing profiles.
Simulator build_sim(const SimConfig& cfg, const UsageConfig& usage = {});

}  // namespace mandm
