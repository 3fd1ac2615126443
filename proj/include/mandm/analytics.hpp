#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "mandm/model.hpp"

namespace mandm {

struct UsageAtLeast {
    double threshold = 0;
    bool operator==(const UsageAtLeast&) const = default;
};

struct NodeCpuAtLeast {
    double threshold_pct = 0;
    bool operator==(const NodeCpuAtLeast&) const = default;
};

/// Fires for users on a node whose every GPU is at or above kGpuBusyPct.
struct GpuAllBusy {
    bool operator==(const GpuAllBusy&) const = default;
};

inline constexpr double kGpuBusyPct = 90.0;

struct AlertRule {
    std::string rule_id;
    std::variant<UsageAtLeast, NodeCpuAtLeast, GpuAllBusy> kind;
    std::string description;

    void validate() const;
    bool operator==(const AlertRule&) const = default;
};

struct Alert {
    std::string rule_id;
    UserId user_id;
    std::int64_t ts = 0;
    std::string detail;

    bool operator==(const Alert&) const = default;
};

/// Union of node ids over the user's active jobs. Throws NotFound.
std::set<NodeId> correlate_user(const ClusterState& state, const UserId& user);

/// Users owning at least one active job on the node. Throws NotFound.
std::set<UserId> correlate_node(const ClusterState& state, const NodeId& node);

/// One alert per (rule, user) pair currently satisfying the rule, ordered by
/// rule position then user id. Level-triggered: nothing is remembered
/// between calls.
std::vector<Alert> evaluate_alerts(const ClusterState& state, const std::vector<AlertRule>& rules);

std::map<UserId, std::uint64_t> alert_counts(const std::vector<Alert>& alerts);

/// Evaluates and stores the per-user counts in the state's aggregates.
std::vector<Alert> refresh_alerts(ClusterState& state, const std::vector<AlertRule>& rules);

}  // namespace mandm
