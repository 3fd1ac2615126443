#include "mandm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mandm/error.hpp"

namespace mandm {

std::string_view to_string(ProfileKind k) noexcept {
    switch (k) {
        case ProfileKind::Light: return "light";
        case ProfileKind::Heavy: return "heavy";
        case ProfileKind::Pathological: return "pathological";
    }
    return "light";
}

ProfileKind profile_kind_from_string(std::string_view name) {
    if (name == "light") return ProfileKind::Light;
    if (name == "heavy") return ProfileKind::Heavy;
    if (name == "pathological") return ProfileKind::Pathological;
    throw ValidationError("unknown profile '" + std::string(name) + "'");
}

ProfileParams default_profile(ProfileKind kind, std::uint32_t node_cap, std::uint32_t file_cap) {
    ProfileParams p;
    switch (kind) {
        case ProfileKind::Light:
            p.arrivals_per_hour = 2;
            p.min_nodes = 1;
            p.max_nodes = 2;
            p.min_files = 0;
            p.max_files = 20;
            p.min_duration_s = 900;
            p.max_duration_s = 7200;
            p.max_active_jobs = 2;
            break;
        case ProfileKind::Heavy:
            p.arrivals_per_hour = 4;
            p.min_nodes = 1;
            p.max_nodes = std::max<std::uint32_t>(1, node_cap / 2);
            p.min_files = 50;
            p.max_files = 500;
            p.min_duration_s = 1800;
            p.max_duration_s = 14400;
            p.max_active_jobs = 3;
            break;
        case ProfileKind::Pathological:
            p.arrivals_per_hour = 12;
            p.min_nodes = node_cap;
            p.max_nodes = node_cap;
            p.min_files = file_cap;
            p.max_files = 2ull * file_cap;
            p.min_duration_s = 3600;
            p.max_duration_s = 21600;
            p.max_active_jobs = 2;
            break;
    }
    return p;
}

void SimConfig::validate() const {
    if (racks == 0) throw ValidationError("sim: racks must be positive");
    if (nodes_per_rack == 0) throw ValidationError("sim: nodes_per_rack must be positive");
    if (tick_interval_s <= 0) throw ValidationError("sim: tick_interval_s must be positive");
    if (cpu_cores == 0 || mem_total_mb == 0) throw ValidationError("sim: cpu_cores and mem_total_mb must be positive");
    for (const auto& u : users) {
        if (!u.profile.params) continue;
        const auto& p = *u.profile.params;
        if (!(p.arrivals_per_hour >= 0) || p.min_nodes == 0 || p.min_nodes > p.max_nodes ||
            p.min_files > p.max_files || p.min_duration_s <= 0 || p.min_duration_s > p.max_duration_s ||
            !(p.update_probability >= 0 && p.update_probability <= 1))
            throw ValidationError("sim: invalid profile parameters for user '" + u.info.user_id + "'");
    }
}

Simulator build_sim(const SimConfig& cfg, const UsageConfig& usage) {
    cfg.validate();
    Simulator sim;
    sim.cfg_ = cfg;
    for (std::uint32_t r = 0; r < cfg.racks; ++r) {
        Rack rack{"r" + std::to_string(r), {}};
        for (std::uint32_t n = 0; n < cfg.nodes_per_rack; ++n) {
            auto id = rack.rack_id + "n" + std::to_string(n);
            sim.topology_.node_specs.emplace(id, NodeSpec{cfg.cpu_cores, cfg.mem_total_mb, cfg.gpus_per_node});
            sim.node_order_.push_back(id);
            rack.node_ids.push_back(std::move(id));
        }
        sim.topology_.racks.push_back(std::move(rack));
    }
    sim.topology_.validate();

    const auto node_count = static_cast<std::uint32_t>(sim.node_order_.size());
    const std::uint32_t node_cap = usage.node_cap ? usage.node_cap : node_count;
    for (const auto& u : cfg.users) {
        auto p = u.profile.params.value_or(default_profile(u.profile.kind, node_cap, usage.file_cap));
        p.min_nodes = std::min(p.min_nodes, node_count);
        p.max_nodes = std::min(p.max_nodes, node_count);
        if (!sim.params_.emplace(u.info.user_id, p).second)
            throw ValidationError("sim: duplicate user id '" + u.info.user_id + "'");
        sim.user_infos_.push_back(u.info);
    }
    sim.rng_.seed(cfg.seed);
    sim.clock_ = cfg.start_ts;
    return sim;
}

std::uint64_t Simulator::uniform_int(std::uint64_t lo, std::uint64_t hi) {
    if (lo >= hi) return lo;
    const std::uint64_t span = hi - lo + 1;
    if (span == 0) return rng_();  // full 64-bit range
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % span);
    std::uint64_t x;
    do {
        x = rng_();
    } while (x >= limit);
    return lo + x % span;
}

double Simulator::uniform_real(double lo, double hi) {
    const double unit = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
}

bool Simulator::chance(double p) {
    if (p >= 1.0) return true;
    return uniform_real(0.0, 1.0) < p;
}

TickBatch Simulator::tick() {
    clock_ += cfg_.tick_interval_s;
    TickBatch batch;
    batch.ts = clock_;

    // Ends and updates in job-id order.
    for (auto it = jobs_.begin(); it != jobs_.end();) {
        auto& [id, job] = *it;
        if (job.end_ts <= clock_) {
            batch.job_events.push_back(JobEvent{JobEventKind::End, id, job.user, clock_, std::nullopt, std::nullopt});
            it = jobs_.erase(it);
            continue;
        }
        const auto& p = params_.at(job.user);
        if (chance(p.update_probability)) {
            job.files = uniform_int(p.min_files, p.max_files);
            batch.job_events.push_back(JobEvent{JobEventKind::Update, id, job.user, clock_, std::nullopt, job.files});
        }
        ++it;
    }

    // Arrivals in roster order.
    const double hours_per_tick = static_cast<double>(cfg_.tick_interval_s) / 3600.0;
    for (const auto& info : user_infos_) {
        const auto& p = params_.at(info.user_id);
        if (p.arrivals_per_hour <= 0 || !chance(p.arrivals_per_hour * hours_per_tick)) continue;
        const auto active = std::count_if(jobs_.begin(), jobs_.end(),
                                          [&](const auto& kv) { return kv.second.user == info.user_id; });
        if (static_cast<std::uint32_t>(active) >= p.max_active_jobs) continue;

        const auto want = static_cast<std::size_t>(uniform_int(p.min_nodes, p.max_nodes));
        std::vector<std::size_t> idx(node_order_.size());
        std::iota(idx.begin(), idx.end(), 0);
        SimJob job{info.user_id, {}, uniform_int(p.min_files, p.max_files), 0};
        for (std::size_t i = 0; i < want; ++i) {
            auto j = static_cast<std::size_t>(uniform_int(i, idx.size() - 1));
            std::swap(idx[i], idx[j]);
            job.nodes.insert(node_order_[idx[i]]);
        }
        const auto duration = static_cast<std::int64_t>(
            uniform_int(static_cast<std::uint64_t>(p.min_duration_s), static_cast<std::uint64_t>(p.max_duration_s)));
        job.end_ts = clock_ + std::max(duration, cfg_.tick_interval_s);

        auto id = "job" + std::to_string(next_job_++);
        batch.job_events.push_back(JobEvent{JobEventKind::Start, id, info.user_id, clock_, job.nodes, job.files});
        jobs_.emplace(std::move(id), std::move(job));
    }

    std::map<NodeId, std::uint32_t> resident;
    for (const auto& [id, job] : jobs_)
        for (const auto& n : job.nodes) ++resident[n];

    batch.telemetry.reserve(node_order_.size());
    for (const auto& node : node_order_) {
        const bool busy = resident.contains(node);
        NodeTelemetry t;
        t.node_id = node;
        t.ts = clock_;
        if (busy) {
            t.cpu_load_pct = quantize(uniform_real(kBusyCpuFloor, 100.0));
            t.mem_used_pct = quantize(uniform_real(30.0, 95.0));
            t.net_rx_mbps = quantize(uniform_real(100.0, 1000.0));
            t.net_tx_mbps = quantize(uniform_real(50.0, 800.0));
        } else {
            t.cpu_load_pct = quantize(uniform_real(0.0, kIdleCpuCeiling));
            t.mem_used_pct = quantize(uniform_real(2.0, 15.0));
            t.net_rx_mbps = quantize(uniform_real(0.0, 5.0));
            t.net_tx_mbps = quantize(uniform_real(0.0, 5.0));
        }
        for (std::uint32_t g = 0; g < cfg_.gpus_per_node; ++g)
            t.gpu_load_pct.push_back(quantize(busy ? uniform_real(kBusyCpuFloor, 100.0) : uniform_real(0.0, 2.0)));
        batch.telemetry.push_back(std::move(t));
    }
    return batch;
}

}  // namespace mandm
