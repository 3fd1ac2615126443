#include <doctest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "mandm/error.hpp"
#include "mandm/http_server.hpp"
#include "mandm/service.hpp"
#include "mandm/wire.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace mandm;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

ServiceConfig sim_service(std::optional<HistoryArchive> archive = std::nullopt) {
    ServiceConfig cfg;
    SimConfig sim;
    sim.seed = 5;
    sim.racks = 2;
    sim.nodes_per_rack = 4;
    sim.gpus_per_node = 1;
    sim.tick_interval_s = 60;
    sim.start_ts = 1699999800 + 10 * 86400;  // live archiving stays clear of the preloaded segments
    sim.users = {SimUser{UserInfo{"ann", "Ann", "staff"}, {ProfileKind::Heavy, {}}},
                 SimUser{UserInfo{"bob", "Bob", "student"}, {ProfileKind::Pathological, {}}}};
    cfg.sim = sim;
    cfg.archive = std::move(archive);
    cfg.server.tick_period_ms = 20;
    return cfg;
}

void write_archive(const std::filesystem::path& dir, int count, std::int64_t base = 1699999800) {
    for (int i = 0; i < count; ++i) {
        Segment s;
        s.ts = base + 300 * i;
        s.node_rows.push_back(NodeRow{"r0n0", 10.0 + i % 50, 20, 1, 2, {}});
        write_segment(HistoryArchive{dir}, s);
    }
}

LoadStatus wait_ready(TwinService& svc) {
    for (int i = 0; i < 500; ++i) {
        auto s = svc.loader().current();
        if (s.phase == LoadPhase::Ready || s.phase == LoadPhase::Failed) return s;
        std::this_thread::sleep_for(10ms);
    }
    return svc.loader().current();
}

}  // namespace

TEST_CASE("sim service: no state before the first tick") {
    TwinService svc(sim_service());
    CHECK(svc.published() == nullptr);
    CHECK(svc.get_cluster().status == 503);
    CHECK(svc.correlate_user("ann").status == 503);
    svc.step();
    REQUIRE(svc.published());
    CHECK(svc.get_cluster().status == 200);
    CHECK(svc.published()->version == 1);
}

TEST_CASE("fixed topology service publishes immediately and cannot step") {
    ServiceConfig cfg;
    ClusterTopology t;
    t.racks = {Rack{"a", {"a1", "a2"}}};
    t.node_specs = {{"a1", NodeSpec{4, 64, 0}}, {"a2", NodeSpec{4, 64, 1}}};
    cfg.topology = t;
    cfg.users = {UserInfo{"u", "U", "r"}};
    TwinService svc(cfg);
    auto r = svc.get_cluster();
    REQUIRE(r.status == 200);
    auto j = json::parse(r.body);
    CHECK(j.at("nodes").size() == 2);
    CHECK(j.at("users").size() == 1);
    CHECK_THROWS_AS(svc.step(), ValidationError);
}

TEST_CASE("correlation handlers agree with a brute-force scan") {
    TwinService svc(sim_service());
    for (int i = 0; i < 30; ++i) svc.step();
    const auto& state = svc.published()->state;
    const auto seg = state.snapshot();
    for (const auto& user : {"ann", "bob"}) {
        auto r = svc.correlate_user(user);
        REQUIRE(r.status == 200);
        CHECK(json::parse(r.body).at("nodes").get<std::set<std::string>>() == oracle::nodes_of(state, user));
    }
    for (const auto& n : seg.node_rows) {
        auto r = svc.correlate_node(n.node_id);
        REQUIRE(r.status == 200);
        CHECK(json::parse(r.body).at("users").get<std::set<std::string>>() == oracle::users_on(state, n.node_id));
    }
    CHECK(svc.correlate_user("nobody").status == 404);
    CHECK(svc.correlate_node("r9n9").status == 404);
}

TEST_CASE("history handlers") {
    TempDir dir;
    write_archive(dir.path(), 12);
    HistoryArchive archive{dir.path()};
    archive.read_latency = std::chrono::milliseconds(5);
    TwinService svc(sim_service(archive));

    CHECK(svc.history_segment("0").status == 409);
    CHECK(json::parse(svc.history_status().body).at("state") == "idle");
    CHECK(svc.history_load("not json").status == 400);
    CHECK(svc.history_load(R"({"from_ts": 5})").status == 400);
    CHECK(svc.history_load(R"({"from_ts": 9, "to_ts": 5})").status == 400);

    auto r = svc.history_load(R"({"from_ts": 0, "to_ts": 9999999999})");
    REQUIRE(r.status == 202);
    CHECK(json::parse(r.body).contains("job"));
    auto again = svc.history_load(R"({"from_ts": 0, "to_ts": 9999999999})");
    CHECK((again.status == 409 || again.status == 202));  // 202 only if the first load already finished

    auto st = wait_ready(svc);
    REQUIRE(st.phase == LoadPhase::Ready);
    auto status = json::parse(svc.history_status().body);
    CHECK(status.at("loaded") == 12);
    CHECK(status.at("total") == 12);

    auto seg = svc.history_segment("3");
    REQUIRE(seg.status == 200);
    auto body = json::parse(seg.body);
    CHECK(body.at("ts") == 1699999800 + 900);
    CHECK(body.at("nodes")[0].at("cpu") == 13.0);
    CHECK(svc.history_segment("12").status == 404);
    CHECK(svc.history_segment("-1").status == 404);
    CHECK(svc.history_segment("abc").status == 404);

    CHECK(svc.history_exit().status == 200);
    CHECK(json::parse(svc.history_status().body).at("state") == "idle");
    CHECK(svc.history_segment("0").status == 409);

    TwinService no_archive(sim_service());
    CHECK(no_archive.history_load(R"({"from_ts": 0, "to_ts": 1})").status == 503);
}

TEST_CASE("failed load reports the reason") {
    TempDir dir;
    write_archive(dir.path(), 3);
    std::ofstream(dir / "segment_1700000700.csv") << "garbage\n";
    TwinService svc(sim_service(HistoryArchive{dir.path()}));
    REQUIRE(svc.history_load(R"({"from_ts": 0, "to_ts": 9999999999})").status == 202);
    REQUIRE(wait_ready(svc).phase == LoadPhase::Failed);
    auto status = json::parse(svc.history_status().body);
    CHECK(status.at("state") == "failed");
    CHECK(status.at("reason").get<std::string>().find("segment_1700000700.csv") != std::string::npos);
    CHECK(svc.history_segment("0").status == 409);
}

TEST_CASE("stream switches to deltas on large clusters") {
    auto cfg = sim_service();
    cfg.server.delta_threshold_nodes = 8;
    TwinService svc(cfg);
    auto sub = svc.stream().subscribe();
    for (int i = 0; i < 5; ++i) svc.step();
    std::string msg;
    json base;
    for (int i = 0; i < 5; ++i) {
        REQUIRE(sub->next(msg, 100ms) == Broadcaster::Subscription::Next::Message);
        auto m = json::parse(msg);
        if (i == 0) {
            CHECK(m.at("kind") == "full");
            base = m;
        } else {
            CHECK(m.at("kind") == "delta");
            base = apply_wire_delta(base, m);
        }
    }
    CHECK(base == svc.published()->wire);

    auto small = sim_service();
    TwinService svc2(small);
    auto sub2 = svc2.stream().subscribe();
    svc2.step();
    svc2.step();
    for (int i = 0; i < 2; ++i) {
        REQUIRE(sub2->next(msg, 100ms) == Broadcaster::Subscription::Next::Message);
        CHECK(json::parse(msg).at("kind") == "full");
    }
}

TEST_CASE("HTTP surface") {
    TempDir dir;
    write_archive(dir.path(), 20);
    HistoryArchive archive{dir.path()};
    archive.read_latency = std::chrono::milliseconds(20);
    TwinService svc(sim_service(archive));
    HttpServer server(svc);
    const int port = server.start("127.0.0.1", 0);
    REQUIRE(port > 0);
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(5, 0);

    SUBCASE("503 then consistent reads") {
        auto r = cli.Get("/api/v1/cluster");
        REQUIRE(r);
        CHECK(r->status == 503);
        svc.step();
        auto a = cli.Get("/api/v1/cluster");
        auto b = cli.Get("/api/v1/cluster");
        REQUIRE(a);
        REQUIRE(b);
        CHECK(a->status == 200);
        CHECK(a->get_header_value("Content-Type") == "application/json");
        CHECK(a->body == b->body);
        CHECK(cli.Get("/api/v1/correlate/user/ann")->status == 200);
        CHECK(cli.Get("/api/v1/correlate/user/zed")->status == 404);
        CHECK(cli.Get("/api/v1/correlate/node/r0n0")->status == 200);
        CHECK(cli.Get("/api/v1/correlate/node/zz")->status == 404);
    }

    SUBCASE("history over HTTP while live reads continue") {
        svc.step();
        auto r = cli.Post("/api/v1/history/load", R"({"from_ts": 0, "to_ts": 9999999999})", "application/json");
        REQUIRE(r);
        CHECK(r->status == 202);
        CHECK(cli.Post("/api/v1/history/load", R"({"from_ts": 0, "to_ts": 1})", "application/json")->status == 409);
        CHECK(cli.Get("/api/v1/history/segments/0")->status == 409);
        std::uint64_t last_loaded = 0;
        bool ready = false;
        while (!ready) {
            auto live = cli.Get("/api/v1/cluster");
            REQUIRE(live);
            CHECK(live->status == 200);
            auto st = json::parse(cli.Get("/api/v1/history/status")->body);
            CHECK(st.at("loaded").get<std::uint64_t>() >= last_loaded);
            last_loaded = st.at("loaded").get<std::uint64_t>();
            REQUIRE(st.at("state") != "failed");
            ready = st.at("state") == "ready";
            std::this_thread::sleep_for(15ms);
        }
        CHECK(last_loaded == 20);
        auto seg = cli.Get("/api/v1/history/segments/19");
        REQUIRE(seg);
        CHECK(seg->status == 200);
        CHECK(json::parse(seg->body).at("ts") == 1699999800 + 300 * 19);
        CHECK(cli.Get("/api/v1/history/segments/20")->status == 404);
        CHECK(cli.Post("/api/v1/history/exit", "", "application/json")->status == 200);
    }

    SUBCASE("live stream: ordered messages, identical across subscribers") {
        svc.step();
        svc.start();
        auto collect = [port](std::vector<json>& out) {
            httplib::Client c("127.0.0.1", port);
            c.set_read_timeout(5, 0);
            std::string buffer;
            c.Get("/api/v1/live", [&](const char* data, std::size_t len) {
                buffer.append(data, len);
                std::size_t nl;
                while ((nl = buffer.find('\n')) != std::string::npos) {
                    out.push_back(json::parse(buffer.substr(0, nl)));
                    buffer.erase(0, nl + 1);
                }
                return out.size() < 6;
            });
        };
        std::vector<json> a, b;
        std::jthread ta([&] { collect(a); });
        std::jthread tb([&] { collect(b); });
        ta.join();
        tb.join();
        svc.stop();
        REQUIRE(a.size() >= 3);
        REQUIRE(b.size() >= 3);
        for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i].at("ts") > a[i - 1].at("ts"));
        for (std::size_t i = 1; i < b.size(); ++i) CHECK(b[i].at("ts") > b[i - 1].at("ts"));
        // Any message both saw is byte-for-byte the same.
        std::map<std::int64_t, json> by_ts;
        for (const auto& m : a) by_ts.emplace(m.at("ts").get<std::int64_t>(), m);
        int shared = 0;
        for (const auto& m : b) {
            auto it = by_ts.find(m.at("ts").get<std::int64_t>());
            if (it == by_ts.end()) continue;
            CHECK(it->second == m);
            ++shared;
        }
        CHECK(shared >= 2);
    }

    SUBCASE("server shutdown closes streams with a close message") {
        svc.step();
        std::vector<std::string> lines;
        std::jthread reader([&] {
            httplib::Client c("127.0.0.1", port);
            c.set_read_timeout(5, 0);
            std::string buffer;
            c.Get("/api/v1/live", [&](const char* data, std::size_t len) {
                buffer.append(data, len);
                std::size_t nl;
                while ((nl = buffer.find('\n')) != std::string::npos) {
                    lines.push_back(buffer.substr(0, nl));
                    buffer.erase(0, nl + 1);
                }
                return true;
            });
        });
        for (int i = 0; i < 100 && svc.stream().subscriber_count() == 0; ++i) std::this_thread::sleep_for(10ms);
        REQUIRE(svc.stream().subscriber_count() == 1);
        server.stop();
        reader.join();
        REQUIRE(lines.size() >= 2);
        auto last = json::parse(lines.back());
        CHECK(last.at("kind") == "close");
    }
}
