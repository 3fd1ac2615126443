#include <doctest.h>

#include "mandm/analytics.hpp"
#include "mandm/error.hpp"
#include "mandm/pipeline.hpp"
#include "mandm/simulator.hpp"
#include "test_helpers.hpp"

using namespace mandm;

namespace {

SimConfig base_config(std::uint32_t racks = 2, std::uint32_t per_rack = 4) {
    SimConfig c;
    c.seed = 42;
    c.racks = racks;
    c.nodes_per_rack = per_rack;
    c.gpus_per_node = 2;
    c.tick_interval_s = 60;
    return c;
}

SimUser user(std::string id, ProfileKind kind) { return SimUser{UserInfo{id, "Name " + id, "staff"}, {kind, {}}}; }

}  // namespace

TEST_CASE("build_sim naming and validation") {
    auto sim = build_sim(base_config(2, 3));
    const auto& t = sim.topology();
    CHECK(t.node_count() == 6);
    REQUIRE(t.racks.size() == 2);
    CHECK(t.racks[0].rack_id == "r0");
    CHECK(t.racks[0].node_ids == std::vector<std::string>{"r0n0", "r0n1", "r0n2"});
    CHECK(t.racks[1].node_ids.back() == "r1n2");
    CHECK(build_sim(base_config(2, 3)).topology() == t);

    auto bad = base_config();
    bad.racks = 0;
    CHECK_THROWS_AS(build_sim(bad), ValidationError);
    bad = base_config();
    bad.nodes_per_rack = 0;
    CHECK_THROWS_AS(build_sim(bad), ValidationError);
}

TEST_CASE("idle cluster baseline") {
    auto sim = build_sim(base_config());
    for (int i = 0; i < 20; ++i) {
        auto batch = sim.tick();
        CHECK(batch.job_events.empty());
        REQUIRE(batch.telemetry.size() == 8);
        for (const auto& t : batch.telemetry) REQUIRE(t.cpu_load_pct <= kIdleCpuCeiling);
    }
}

TEST_CASE("same seed gives identical streams; different seeds diverge") {
    auto cfg = base_config();
    cfg.users = {user("a", ProfileKind::Light), user("b", ProfileKind::Heavy), user("c", ProfileKind::Pathological)};
    auto s1 = build_sim(cfg), s2 = build_sim(cfg);
    cfg.seed = 43;
    auto s3 = build_sim(cfg);
    bool diverged = false;
    for (int i = 0; i < 100; ++i) {
        auto b1 = s1.tick(), b2 = s2.tick(), b3 = s3.tick();
        REQUIRE(b1 == b2);
        diverged = diverged || !(b1 == b3);
    }
    CHECK(diverged);
}

TEST_CASE("events are valid by construction and load tracks residency") {
    auto cfg = base_config(3, 5);
    cfg.users = {user("a", ProfileKind::Light), user("b", ProfileKind::Heavy), user("c", ProfileKind::Heavy),
                 user("d", ProfileKind::Pathological)};
    auto sim = build_sim(cfg);
    auto state = ClusterState::create(sim.topology(), sim.users());
    double busy_sum = 0, idle_sum = 0;
    int busy_n = 0, idle_n = 0;
    std::uint64_t events = 0;
    for (int i = 0; i < 300; ++i) {
        auto batch = sim.tick();
        for (const auto& e : batch.job_events) {
            REQUIRE(state.has_user(e.user_id));
            if (e.node_ids)
                for (const auto& n : *e.node_ids) REQUIRE(state.has_node(n));
            REQUIRE_NOTHROW(state.apply_job_event(e));
            ++events;
        }
        for (const auto& t : batch.telemetry) {
            REQUIRE_NOTHROW(state.apply_telemetry(t));
            const bool busy = !correlate_node(state, t.node_id).empty();
            if (busy) {
                REQUIRE(t.cpu_load_pct >= kBusyCpuFloor);
                busy_sum += t.cpu_load_pct;
                ++busy_n;
            } else {
                REQUIRE(t.cpu_load_pct <= kIdleCpuCeiling);
                idle_sum += t.cpu_load_pct;
                ++idle_n;
            }
        }
        if ((i + 1) % 100 == 0 && busy_n > 0 && idle_n > 0) {
            CHECK(busy_sum / busy_n > idle_sum / idle_n);
            busy_sum = idle_sum = 0;
            busy_n = idle_n = 0;
        }
    }
    CHECK(events > 0);
}

TEST_CASE("pathological user reaches Critical within 50 ticks") {
    auto cfg = base_config();
    cfg.users = {user("calm", ProfileKind::Light), user("hog", ProfileKind::Pathological)};
    auto sim = build_sim(cfg);
    auto state = ClusterState::create(sim.topology(), sim.users());
    bool critical = false;
    for (int i = 0; i < 50 && !critical; ++i) {
        auto batch = sim.tick();
        for (const auto& e : batch.job_events) state.apply_job_event(e);
        critical = state.users().at("hog").aggregate.tier == Tier::Critical;
    }
    CHECK(critical);
    CHECK(state.users().at("calm").aggregate.tier == Tier::Normal);
}

TEST_CASE("default profiles span the tiers") {
    auto light = default_profile(ProfileKind::Light, 64, 1000);
    auto heavy = default_profile(ProfileKind::Heavy, 64, 1000);
    auto patho = default_profile(ProfileKind::Pathological, 64, 1000);
    CHECK(light.max_nodes <= 2);
    CHECK(light.max_files <= 20);
    CHECK(heavy.max_nodes == 32);
    CHECK(heavy.max_files <= 500);
    CHECK(patho.min_nodes >= 64);
    CHECK(patho.min_files >= 1000);
    CHECK(profile_kind_from_string("heavy") == ProfileKind::Heavy);
    CHECK_THROWS_AS(profile_kind_from_string("weird"), ValidationError);
}

TEST_CASE("run_scenario") {
    TempDir dir;
    auto cfg = base_config();
    cfg.tick_interval_s = 300;
    cfg.users = {user("a", ProfileKind::Heavy), user("b", ProfileKind::Light)};

    SUBCASE("zero ticks") {
        auto sim = build_sim(cfg);
        auto state = ClusterState::create(sim.topology(), sim.users());
        auto store = TripleStore::in_memory();
        auto summary = run_scenario(sim, 0, ScenarioSinks{state, &store, HistoryArchive{dir.path()}, {}});
        CHECK(summary == ScenarioSummary{});
        CHECK(store.stats().triple_count == 0);
    }
    SUBCASE("counts reconcile") {
        auto sim = build_sim(cfg);
        auto state = ClusterState::create(sim.topology(), sim.users());
        auto store = TripleStore::in_memory();
        auto summary = run_scenario(sim, 24, ScenarioSinks{state, &store, HistoryArchive{dir.path()}, {}});
        CHECK(summary.ticks == 24);
        CHECK(summary.segments == 24);
        CHECK(list_segments(HistoryArchive{dir.path()}, 0, INT64_MAX).size() == 24);
        CHECK(summary.telemetry_samples == 24 * 8);
        CHECK(summary.telemetry_fields == 24 * 8 * (4 + 2));
        CHECK(summary.telemetry_triples == summary.telemetry_fields);
        CHECK(store.stats().triple_count == summary.telemetry_triples + summary.job_triples);
        CHECK(store.scan_row_range("node|", "node}").size() == summary.telemetry_triples);
        // The last archived segment is the final state.
        auto last = list_segments(HistoryArchive{dir.path()}, 0, INT64_MAX).back();
        CHECK(read_segment(HistoryArchive{dir.path()}, last) == state.snapshot());
    }
    SUBCASE("segments every interval with finer ticks") {
        cfg.tick_interval_s = 60;
        auto sim = build_sim(cfg);
        auto state = ClusterState::create(sim.topology(), sim.users());
        auto summary = run_scenario(sim, 60, ScenarioSinks{state, nullptr, HistoryArchive{dir.path()}, {}});
        CHECK(summary.segments == 12);
        CHECK(summary.telemetry_triples == 0);
    }
    SUBCASE("interval must be a multiple of the tick") {
        cfg.tick_interval_s = 70;
        auto sim = build_sim(cfg);
        auto state = ClusterState::create(sim.topology(), sim.users());
        CHECK_THROWS_AS(run_scenario(sim, 1, ScenarioSinks{state, nullptr, HistoryArchive{dir.path()}, {}}),
                        ValidationError);
    }
}

TEST_CASE("a failed segment write skips that boundary instead of drifting off the grid") {
    TempDir dir;
    auto cfg = base_config();
    cfg.tick_interval_s = 60;
    auto sim = build_sim(cfg);
    auto state = ClusterState::create(sim.topology(), sim.users());
    const HistoryArchive archive{dir.path()};
    Segment squatter;
    squatter.ts = kDefaultSimStart + 300;
    write_segment(archive, squatter);

    Pipeline pipeline(state, nullptr, archive, {}, sim.clock());
    int failures = 0;
    for (int i = 0; i < 10; ++i) {
        pipeline.ingest(sim.tick());
        try {
            pipeline.archive_if_due();
        } catch (const IoError&) {
            ++failures;
        }
    }
    CHECK(failures == 1);
    const auto entries = list_segments(archive, 0, INT64_MAX);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].ts == kDefaultSimStart + 300);
    CHECK(entries[1].ts == kDefaultSimStart + 600);
    CHECK(pipeline.summary().segments == 1);
}
