#include "mandm/analytics.hpp"

#include <algorithm>
#include <cmath>

#include "mandm/error.hpp"

namespace mandm {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool valid_threshold(double v) { return std::isfinite(v) && v >= 0 && v <= 100; }

std::string fmt_pct(double v) { return format_decimal(v); }

}  // namespace

void AlertRule::validate() const {
    if (rule_id.empty()) throw ValidationError("alert rule needs an id");
    std::visit(overloaded{
                   [&](const UsageAtLeast& r) {
                       if (!valid_threshold(r.threshold))
                           throw ValidationError("alert rule '" + rule_id + "': threshold outside [0,100]");
                   },
                   [&](const NodeCpuAtLeast& r) {
                       if (!valid_threshold(r.threshold_pct))
                           throw ValidationError("alert rule '" + rule_id + "': threshold outside [0,100]");
                   },
                   [](const GpuAllBusy&) {},
               },
               kind);
}

std::set<NodeId> correlate_user(const ClusterState& state, const UserId& user) {
    if (!state.has_user(user)) throw NotFound("unknown user '" + user + "'");
    std::set<NodeId> nodes;
    for (const auto& [id, job] : state.active_jobs())
        if (job.user_id == user) nodes.insert(job.node_ids.begin(), job.node_ids.end());
    return nodes;
}

std::set<UserId> correlate_node(const ClusterState& state, const NodeId& node) {
    if (!state.has_node(node)) throw NotFound("unknown node '" + node + "'");
    std::set<UserId> users;
    for (const auto& [id, job] : state.active_jobs())
        if (job.node_ids.contains(node)) users.insert(job.user_id);
    return users;
}

std::vector<Alert> evaluate_alerts(const ClusterState& state, const std::vector<AlertRule>& rules) {
    std::vector<Alert> alerts;
    const auto ts = state.state_ts();

    // First hot node per user, for the alert detail.
    auto by_node = [&](auto&& is_hot, const AlertRule& rule, std::string_view what) {
        std::map<UserId, NodeId> hits;
        for (const auto& [node, sample] : state.latest()) {
            if (!is_hot(sample)) continue;
            for (const auto& user : correlate_node(state, node)) hits.try_emplace(user, node);
        }
        for (const auto& [user, node] : hits)
            alerts.push_back(Alert{rule.rule_id, user, ts, std::string(what) + " on " + node});
    };

    for (const auto& rule : rules) {
        std::visit(overloaded{
                       [&](const UsageAtLeast& r) {
                           for (const auto& [id, u] : state.users()) {
                               if (u.aggregate.usage >= r.threshold)
                                   alerts.push_back(Alert{rule.rule_id, id, ts,
                                                          "usage " + fmt_pct(u.aggregate.usage) +
                                                              " >= " + fmt_pct(r.threshold)});
                           }
                       },
                       [&](const NodeCpuAtLeast& r) {
                           by_node([&](const NodeTelemetry& t) { return t.cpu_load_pct >= r.threshold_pct; }, rule,
                                   "cpu >= " + fmt_pct(r.threshold_pct));
                       },
                       [&](const GpuAllBusy&) {
                           by_node(
                               [](const NodeTelemetry& t) {
                                   return !t.gpu_load_pct.empty() &&
                                          std::all_of(t.gpu_load_pct.begin(), t.gpu_load_pct.end(),
                                                      [](double g) { return g >= kGpuBusyPct; });
                               },
                               rule, "all gpus busy");
                       },
                   },
                   rule.kind);
    }
    return alerts;
}

std::map<UserId, std::uint64_t> alert_counts(const std::vector<Alert>& alerts) {
    std::map<UserId, std::uint64_t> counts;
    for (const auto& a : alerts) ++counts[a.user_id];
    return counts;
}

std::vector<Alert> refresh_alerts(ClusterState& state, const std::vector<AlertRule>& rules) {
    auto alerts = evaluate_alerts(state, rules);
    state.set_alert_counts(alert_counts(alerts));
    return alerts;
}

}  // namespace mandm
