#include "mandm/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mandm/error.hpp"

namespace mandm {

const char* to_string(Rejection r) noexcept {
    switch (r) {
        case Rejection::UnknownNode: return "unknown node";
        case Rejection::OutOfRange: return "value out of range";
        case Rejection::GpuCountMismatch: return "gpu count mismatch";
        case Rejection::JobAlreadyActive: return "job already active";
        case Rejection::UnknownJob: return "unknown job";
        case Rejection::UnknownUser: return "unknown user";
        case Rejection::EmptyNodeSet: return "empty node set";
        case Rejection::InvalidId: return "invalid id";
    }
    return "rejected";
}

namespace {

bool valid_id(const std::string& id) { return !id.empty() && is_csv_safe(id); }

bool in_pct(double v) { return std::isfinite(v) && v >= 0.0 && v <= 100.0; }
bool nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

void ClusterTopology::validate() const {
    std::set<std::string> rack_ids;
    std::set<NodeId> seen;
    for (const auto& rack : racks) {
        if (!valid_id(rack.rack_id)) throw ValidationError("invalid rack id '" + rack.rack_id + "'");
        if (!rack_ids.insert(rack.rack_id).second)
            throw ValidationError("duplicate rack id '" + rack.rack_id + "'");
        for (const auto& node : rack.node_ids) {
            if (!valid_id(node)) throw ValidationError("invalid node id '" + node + "'");
            if (!seen.insert(node).second) throw ValidationError("duplicate node id '" + node + "'");
            auto spec = node_specs.find(node);
            if (spec == node_specs.end())
                throw ValidationError("node '" + node + "' has no spec");
            if (spec->second.cpu_cores == 0 || spec->second.mem_total_mb == 0)
                throw ValidationError("node '" + node + "' needs positive cpu_cores and mem_total_mb");
        }
    }
    for (const auto& [id, spec] : node_specs) {
        if (!seen.contains(id)) throw ValidationError("node spec '" + id + "' is not in any rack");
    }
}

ClusterState ClusterState::create(ClusterTopology topology, const std::vector<UserInfo>& users,
                                  UsageConfig usage) {
    topology.validate();
    if (usage.node_cap == 0)
        usage.node_cap = static_cast<std::uint32_t>(std::max<std::size_t>(topology.node_count(), 1));
    usage.validate();

    ClusterState state;
    for (const auto& rack : topology.racks)
        for (const auto& node : rack.node_ids) state.rack_by_node_.emplace(node, rack.rack_id);
    for (const auto& u : users) {
        if (!valid_id(u.user_id)) throw ValidationError("invalid user id '" + u.user_id + "'");
        if (!is_csv_safe(u.name) || !is_csv_safe(u.rank))
            throw ValidationError("user '" + u.user_id + "' has a name or rank with ',', ';' or newline");
        UserEntry entry{u, {}};
        entry.aggregate.usage = compute_usage(0, 0, usage);
        entry.aggregate.tier = classify_usage(entry.aggregate.usage, usage);
        if (!state.users_.emplace(u.user_id, std::move(entry)).second)
            throw ValidationError("duplicate user id '" + u.user_id + "'");
    }
    state.topology_ = std::move(topology);
    state.usage_ = usage;
    return state;
}

const std::string& ClusterState::rack_of(const NodeId& id) const {
    static const std::string empty;
    auto it = rack_by_node_.find(id);
    return it == rack_by_node_.end() ? empty : it->second;
}

void ClusterState::bump_ts(std::int64_t ts) noexcept { state_ts_ = std::max(state_ts_, ts); }

TelemetryOutcome ClusterState::apply_telemetry(const NodeTelemetry& t) {
    auto spec = topology_.node_specs.find(t.node_id);
    if (spec == topology_.node_specs.end()) throw RejectedEvent(Rejection::UnknownNode, t.node_id);
    if (!in_pct(t.cpu_load_pct) || !in_pct(t.mem_used_pct))
        throw RejectedEvent(Rejection::OutOfRange, t.node_id + ": percentage outside [0,100]");
    if (!nonneg(t.net_rx_mbps) || !nonneg(t.net_tx_mbps))
        throw RejectedEvent(Rejection::OutOfRange, t.node_id + ": negative network rate");
    if (t.gpu_load_pct.size() != spec->second.gpu_count)
        throw RejectedEvent(Rejection::GpuCountMismatch,
                            t.node_id + ": expected " + std::to_string(spec->second.gpu_count) + " gpu loads, got " +
                                std::to_string(t.gpu_load_pct.size()));
    if (!std::all_of(t.gpu_load_pct.begin(), t.gpu_load_pct.end(), in_pct))
        throw RejectedEvent(Rejection::OutOfRange, t.node_id + ": gpu load outside [0,100]");

    auto [it, inserted] = latest_.try_emplace(t.node_id, t);
    if (!inserted) {
        if (t.ts < it->second.ts) {
            ++stale_dropped_;
            return TelemetryOutcome::Stale;
        }
        it->second = t;
    }
    bump_ts(t.ts);
    return TelemetryOutcome::Applied;
}

void ClusterState::apply_job_event(const JobEvent& e) {
    if (!users_.contains(e.user_id)) throw RejectedEvent(Rejection::UnknownUser, e.user_id);
    if (!valid_id(e.job_id)) throw RejectedEvent(Rejection::InvalidId, "job id '" + e.job_id + "'");
    if (e.node_ids) {
        for (const auto& n : *e.node_ids)
            if (!has_node(n)) throw RejectedEvent(Rejection::UnknownNode, n);
    }

    auto job = active_jobs_.find(e.job_id);
    UserId owner = e.user_id;
    switch (e.kind) {
        case JobEventKind::Start: {
            if (job != active_jobs_.end()) throw RejectedEvent(Rejection::JobAlreadyActive, e.job_id);
            if (!e.node_ids || e.node_ids->empty()) throw RejectedEvent(Rejection::EmptyNodeSet, e.job_id);
            active_jobs_.emplace(e.job_id, ActiveJob{e.user_id, *e.node_ids, e.files_open.value_or(0), e.ts});
            break;
        }
        case JobEventKind::Update: {
            if (job == active_jobs_.end()) throw RejectedEvent(Rejection::UnknownJob, e.job_id);
            if (e.node_ids && e.node_ids->empty()) throw RejectedEvent(Rejection::EmptyNodeSet, e.job_id);
            if (e.node_ids) job->second.node_ids = *e.node_ids;
            if (e.files_open) job->second.files_open = *e.files_open;
            owner = job->second.user_id;
            break;
        }
        case JobEventKind::End: {
            if (job == active_jobs_.end()) throw RejectedEvent(Rejection::UnknownJob, e.job_id);
            owner = job->second.user_id;
            active_jobs_.erase(job);
            break;
        }
    }
    bump_ts(e.ts);
    recompute(owner);
}

void ClusterState::recompute(const UserId& user) {
    auto& agg = users_.at(user).aggregate;
    std::set<NodeId> nodes;
    std::uint64_t files = 0;
    std::uint64_t jobs = 0;
    for (const auto& [id, job] : active_jobs_) {
        if (job.user_id != user) continue;
        nodes.insert(job.node_ids.begin(), job.node_ids.end());
        files += job.files_open;
        ++jobs;
    }
    agg.node_count = nodes.size();
    agg.file_count = files;
    agg.job_count = jobs;
    agg.usage = compute_usage(agg.node_count, agg.file_count, usage_);
    agg.tier = classify_usage(agg.usage, usage_);
}

void ClusterState::set_alert_counts(const std::map<UserId, std::uint64_t>& counts) {
    for (auto& [id, entry] : users_) {
        auto it = counts.find(id);
        entry.aggregate.alert_count = it == counts.end() ? 0 : it->second;
    }
}

Segment ClusterState::snapshot() const {
    Segment seg;
    seg.ts = state_ts_;
    seg.node_rows.reserve(topology_.node_specs.size());
    for (const auto& [id, spec] : topology_.node_specs) {
        auto t = latest_.find(id);
        if (t == latest_.end()) {
            seg.node_rows.push_back(NodeRow{id, 0, 0, 0, 0, std::vector<double>(spec.gpu_count, 0.0)});
            continue;
        }
        const auto& s = t->second;
        NodeRow row{id, quantize(s.cpu_load_pct), quantize(s.mem_used_pct), quantize(s.net_rx_mbps),
                    quantize(s.net_tx_mbps), {}};
        row.gpu_loads.reserve(s.gpu_load_pct.size());
        for (double g : s.gpu_load_pct) row.gpu_loads.push_back(quantize(g));
        seg.node_rows.push_back(std::move(row));
    }
    seg.user_rows.reserve(users_.size());
    for (const auto& [id, u] : users_) {
        const auto& a = u.aggregate;
        seg.user_rows.push_back(UserRow{id, u.info.name, u.info.rank, a.node_count, a.file_count, a.job_count,
                                        a.alert_count, quantize(a.usage)});
    }
    seg.job_rows.reserve(active_jobs_.size());
    for (const auto& [id, job] : active_jobs_) {
        seg.job_rows.push_back(JobRow{id, job.user_id, std::string(kJobRunning),
                                      {job.node_ids.begin(), job.node_ids.end()}, job.files_open});
    }
    return seg;
}

}  // namespace mandm
