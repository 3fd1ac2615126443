// mandm: serve the twin, run the simulator, generate and benchmark history archives.
//
// Exit codes: 0 success, 1 validation error, 2 runtime or I/O error.

#include <csignal>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "mandm/config.hpp"
#include "mandm/error.hpp"
#include "mandm/history.hpp"
#include "mandm/http_server.hpp"
#include "mandm/pipeline.hpp"
#include "mandm/service.hpp"

namespace {

using nlohmann::json;
using namespace mandm;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

json summary_json(const ScenarioSummary& s) {
    return {{"ticks", s.ticks},
            {"job_events", s.job_events},
            {"telemetry_samples", s.telemetry_samples},
            {"telemetry_fields", s.telemetry_fields},
            {"telemetry_triples", s.telemetry_triples},
            {"job_triples", s.job_triples},
            {"segments", s.segments},
            {"stale_dropped", s.stale_dropped}};
}

const SimConfig& require_sim(const ServiceConfig& cfg) {
    if (!cfg.sim) throw ValidationError("config has no 'sim' section");
    return *cfg.sim;
}

int cmd_serve(const std::string& config_path) {
    auto cfg = load_config(resolve_config_path(config_path));
    TwinService service(cfg);
    HttpServer http(service, cfg.server.static_dir.string());

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    const int port = http.start(cfg.server.bind, cfg.server.port);
    spdlog::info("serving on {}:{}", cfg.server.bind, port);
    service.start();

    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("signal {} received, shutting down", sig);
    service.stop();
    http.stop();
    return kExitOk;
}

int cmd_sim(const std::string& config_path, std::uint64_t ticks, bool realtime) {
    auto cfg = load_config(resolve_config_path(config_path));
    auto sim = build_sim(require_sim(cfg), cfg.usage);
    auto state = ClusterState::create(sim.topology(), sim.users(), cfg.usage);
    prepare_output_dirs(cfg);
    auto store = cfg.store_path ? TripleStore::open(*cfg.store_path) : TripleStore::in_memory();

    TickObserver pace;
    if (realtime) {
        const auto period = std::chrono::milliseconds(cfg.server.tick_period_ms);
        pace = [period](const TickBatch&, const ClusterState&) { std::this_thread::sleep_for(period); };
    }
    auto summary = run_scenario(sim, ticks, ScenarioSinks{state, &store, cfg.archive, cfg.alerts}, pace);
    auto out = summary_json(summary);
    out["store"] = {{"triple_count", store.stats().triple_count}, {"bytes_on_disk", store.stats().bytes_on_disk}};
    std::cout << out.dump() << '\n';
    return kExitOk;
}

int cmd_gen_archive(const std::string& config_path, double hours, const std::filesystem::path& out_dir) {
    auto cfg = load_config(resolve_config_path(config_path));
    const auto& sim_cfg = require_sim(cfg);
    if (!(hours >= 0) || !std::isfinite(hours)) throw ValidationError("--hours must be nonnegative");

    HistoryArchive archive;
    archive.directory = out_dir;
    archive.segment_interval_s = cfg.archive ? cfg.archive->segment_interval_s : kDefaultSegmentInterval;
    if (archive.segment_interval_s % sim_cfg.tick_interval_s != 0)
        throw ValidationError("segment interval must be a multiple of sim.tick_interval_s");

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

    const auto duration_s = static_cast<std::int64_t>(std::llround(hours * 3600.0));
    const auto ticks = static_cast<std::uint64_t>(duration_s / sim_cfg.tick_interval_s);

    auto sim = build_sim(sim_cfg, cfg.usage);
    auto state = ClusterState::create(sim.topology(), sim.users(), cfg.usage);
    auto summary = run_scenario(sim, ticks, ScenarioSinks{state, nullptr, archive, cfg.alerts});
    std::cout << summary_json(summary).dump() << '\n';
    return kExitOk;
}

int cmd_bench_load(const std::filesystem::path& dir, std::int64_t from, std::int64_t to, std::int64_t latency_ms,
                   bool as_json) {
    if (latency_ms < 0) throw ValidationError("--latency-ms must be nonnegative");
    HistoryArchive archive;
    archive.directory = dir;
    archive.read_latency = std::chrono::milliseconds(latency_ms);
    const auto cold = bench_load(archive, from, to);
    archive.read_latency = std::chrono::milliseconds(0);
    const auto warm = bench_load(archive, from, to);
    if (as_json) {
        std::cout << json{{"files", cold.files},
                          {"total_s", cold.total_s},
                          {"s_per_file", cold.s_per_file},
                          {"latency_ms", latency_ms},
                          {"warm_total_s", warm.total_s},
                          {"warm_s_per_file", warm.s_per_file}}
                         .dump()
                  << '\n';
    } else {
        std::cout << "files=" << cold.files << " total_s=" << cold.total_s << " s_per_file=" << cold.s_per_file
                  << " warm_total_s=" << warm.total_s << " warm_s_per_file=" << warm.s_per_file << '\n';
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("mandm");
    logger->set_pattern("ts=%Y-%m-%dT%H:%M:%S.%e level=%l msg=\"%v\"");
    spdlog::set_default_logger(logger);

    CLI::App app{"MandM cluster digital twin"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t ticks = 0;
    bool realtime = false;
    double hours = 0;
    std::string out_dir, archive_dir;
    std::int64_t from_ts = 0, to_ts = 0, latency_ms = 0;
    bool as_json = false;

    auto* serve = app.add_subcommand("serve", "Run the twin and its HTTP API");
    serve->add_option("--config", config_path, "Config file (falls back to $MANDM_CONFIG)");

    auto* sim = app.add_subcommand("sim", "Run the simulator through the ingestion pipeline");
    sim->add_option("--config", config_path, "Config file (falls back to $MANDM_CONFIG)");
    sim->add_option("--ticks", ticks, "Number of ticks")->required();
    sim->add_flag("--realtime", realtime, "Pause server.tick_period_ms between ticks");

    auto* gen = app.add_subcommand("gen-archive", "Write a synthetic segment archive");
    gen->add_option("--config", config_path, "Config file (falls back to $MANDM_CONFIG)");
    gen->add_option("--hours", hours, "Simulated hours")->required();
    gen->add_option("--out", out_dir, "Output directory")->required();

    auto* bench = app.add_subcommand("bench-load", "Time a full synchronous history load");
    bench->add_option("--archive", archive_dir, "Archive directory")->required();
    bench->add_option("--from", from_ts, "Range start (inclusive, unix s)")->required();
    bench->add_option("--to", to_ts, "Range end (exclusive, unix s)")->required();
    bench->add_option("--latency-ms", latency_ms, "Injected per-file read latency");
    bench->add_flag("--json", as_json, "Machine-readable output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*serve) return cmd_serve(config_path);
        if (*sim) return cmd_sim(config_path, ticks, realtime);
        if (*gen) return cmd_gen_archive(config_path, hours, out_dir);
        if (*bench) return cmd_bench_load(archive_dir, from_ts, to_ts, latency_ms, as_json);
    } catch (const ValidationError& e) {
        spdlog::error("{}", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}
