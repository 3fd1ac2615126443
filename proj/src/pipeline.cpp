#include "mandm/pipeline.hpp"

#include "mandm/error.hpp"

namespace mandm {

std::string gpu_column(std::size_t index) { return "gpu" + std::to_string(index) + "_load_pct"; }

std::uint64_t store_telemetry(TripleStore& store, const NodeTelemetry& t) {
    const auto row = telemetry_row_key("node", t.node_id, t.ts);
    store.put(row, kColCpu, format_decimal(t.cpu_load_pct));
    store.put(row, kColMem, format_decimal(t.mem_used_pct));
    store.put(row, kColNetRx, format_decimal(t.net_rx_mbps));
    store.put(row, kColNetTx, format_decimal(t.net_tx_mbps));
    for (std::size_t g = 0; g < t.gpu_load_pct.size(); ++g)
        store.put(row, gpu_column(g), format_decimal(t.gpu_load_pct[g]));
    return 4 + t.gpu_load_pct.size();
}

std::uint64_t store_job_event(TripleStore& store, const JobEvent& e) {
    const auto row = telemetry_row_key("job", e.job_id, e.ts);
    std::uint64_t n = 0;
    const char* kind = e.kind == JobEventKind::Start ? "start" : e.kind == JobEventKind::Update ? "update" : "end";
    store.put(row, "kind", kind);
    store.put(row, "user", e.user_id);
    n += 2;
    if (e.node_ids) {
        std::string joined;
        for (const auto& id : *e.node_ids) {
            if (!joined.empty()) joined += ';';
            joined += id;
        }
        store.put(row, "nodes", joined);
        ++n;
    }
    if (e.files_open) {
        store.put(row, "files_open", std::to_string(*e.files_open));
        ++n;
    }
    return n;
}

Pipeline::Pipeline(ClusterState& state, TripleStore* store, std::optional<HistoryArchive> archive,
                   std::vector<AlertRule> rules, std::int64_t origin_ts)
    : state_(state), store_(store), archive_(std::move(archive)), rules_(std::move(rules)), origin_ts_(origin_ts) {
    for (const auto& r : rules_) r.validate();
    if (archive_ && archive_->segment_interval_s <= 0)
        throw ValidationError("archive: segment_interval_s must be positive");
}

std::vector<Alert> Pipeline::ingest(const TickBatch& batch) {
    for (const auto& e : batch.job_events) {
        state_.apply_job_event(e);
        ++summary_.job_events;
        if (store_) summary_.job_triples += store_job_event(*store_, e);
    }
    for (const auto& t : batch.telemetry) {
        if (state_.apply_telemetry(t) == TelemetryOutcome::Stale) ++summary_.stale_dropped;
        ++summary_.telemetry_samples;
        summary_.telemetry_fields += 4 + t.gpu_load_pct.size();
        if (store_) summary_.telemetry_triples += store_telemetry(*store_, t);
    }
    ++summary_.ticks;
    return refresh_alerts(state_, rules_);
}

std::optional<std::string> Pipeline::archive_if_due() {
    if (!archive_) return std::nullopt;
    const auto boundaries = (state_.state_ts() - origin_ts_) / archive_->segment_interval_s;
    if (boundaries <= boundaries_done_) return std::nullopt;
    // A failed write gives up this boundary; retrying on a later tick
    // would archive a snapshot whose ts is off the segment grid.
    boundaries_done_ = boundaries;
    auto name = write_segment(*archive_, state_.snapshot());
    ++summary_.segments;
    return name;
}

ScenarioSummary run_scenario(Simulator& sim, std::uint64_t n_ticks, ScenarioSinks sinks, const TickObserver& observer) {
    if (sinks.archive && sinks.archive->segment_interval_s % sim.config().tick_interval_s != 0)
        throw ValidationError("segment interval must be a multiple of the sim tick interval");
    Pipeline pipeline(sinks.state, sinks.store, std::move(sinks.archive), std::move(sinks.rules), sim.clock());
    for (std::uint64_t i = 0; i < n_ticks; ++i) {
        auto batch = sim.tick();
        pipeline.ingest(batch);
        pipeline.archive_if_due();
        if (observer) observer(batch, sinks.state);
    }
    return pipeline.summary();
}

}  // namespace mandm
