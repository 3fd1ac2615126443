#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mandm/analytics.hpp"
#include "mandm/history.hpp"
#include "mandm/model.hpp"
#include "mandm/simulator.hpp"
#include "mandm/triple_store.hpp"

namespace mandm {

struct ScenarioSummary {
    std::uint64_t ticks = 0;
    std::uint64_t job_events = 0;
    std::uint64_t telemetry_samples = 0;
    /// Scalar fields across all samples: 4 + gpu_count each.
    std::uint64_t telemetry_fields = 0;
    std::uint64_t telemetry_triples = 0;
    std::uint64_t job_triples = 0;
    std::uint64_t segments = 0;
    std::uint64_t stale_dropped = 0;

    bool operator==(const ScenarioSummary&) const = default;
};

/// Telemetry column names in the triple store.
inline constexpr std::string_view kColCpu = "cpu_load_pct";
inline constexpr std::string_view kColMem = "mem_used_pct";
inline constexpr std::string_view kColNetRx = "net_rx_mbps";
inline constexpr std::string_view kColNetTx = "net_tx_mbps";
std::string gpu_column(std::size_t index);

/// Writes one triple per scalar field of the sample. Returns the count.
std::uint64_t store_telemetry(TripleStore& store, const NodeTelemetry& t);
std::uint64_t store_job_event(TripleStore& store, const JobEvent& e);

/// The data path from raw events to persisted and archived state:
/// events -> live state -> triple store, plus a segment every
/// `segment_interval_s` of state time counted from `origin_ts`.
class Pipeline {
public:
    Pipeline(ClusterState& state, TripleStore* store, std::optional<HistoryArchive> archive,
             std::vector<AlertRule> rules, std::int64_t origin_ts);

    /// Applies job events, then telemetry, then refreshes alert counts.
    std::vector<Alert> ingest(const TickBatch& batch);

    /// Writes a segment if a segment boundary has been crossed since the last one.
    std::optional<std::string> archive_if_due();

    const ScenarioSummary& summary() const noexcept { return summary_; }

private:
    ClusterState& state_;
    TripleStore* store_;
    std::optional<HistoryArchive> archive_;
    std::vector<AlertRule> rules_;
    std::int64_t origin_ts_;
    std::int64_t boundaries_done_ = 0;
    ScenarioSummary summary_;
};

struct ScenarioSinks {
    ClusterState& state;
    TripleStore* store = nullptr;
    std::optional<HistoryArchive> archive;
    std::vector<AlertRule> rules;
};

using TickObserver = std::function<void(const TickBatch&, const ClusterState&)>;

/// Drives `n_ticks` simulator ticks through the full pipeline.
ScenarioSummary run_scenario(Simulator& sim, std::uint64_t n_ticks, ScenarioSinks sinks,
                             const TickObserver& observer = {});

}  // namespace mandm
