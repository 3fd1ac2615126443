#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "test_helpers.hpp"

using nlohmann::json;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
};

RunResult run_cli(const std::string& args, const TempDir& scratch) {
    const auto out_file = scratch / "stdout.txt";
    const std::string cmd = std::string(MANDM_CLI_PATH) + " " + args + " > " + out_file.string() + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out_file);
    std::stringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    return r;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_config(const std::filesystem::path& path, std::uint64_t seed = 7) {
    std::ofstream(path) << json{{"sim",
                                 {{"seed", seed},
                                  {"racks", 2},
                                  {"nodes_per_rack", 3},
                                  {"gpus_per_node", 1},
                                  {"tick_interval_s", 300},
                                  {"users",
                                   {{{"id", "a"}, {"profile", "heavy"}}, {{"id", "b"}, {"profile", "pathological"}}}}}}}
                               .dump();
}

std::size_t count_files(const std::filesystem::path& dir) {
    std::size_t n = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++n;
    return n;
}

}  // namespace

TEST_CASE("gen-archive writes one segment per interval, reproducibly") {
    TempDir dir;
    write_config(dir / "c.json");
    auto a = run_cli("gen-archive --config " + (dir / "c.json").string() + " --hours 2 --out " + (dir / "a").string(), dir);
    auto b = run_cli("gen-archive --config " + (dir / "c.json").string() + " --hours 2 --out " + (dir / "b").string(), dir);
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(json::parse(a.out).at("segments") == 24);
    REQUIRE(count_files(dir / "a") == 24);
    for (const auto& e : std::filesystem::directory_iterator(dir / "a"))
        CHECK(slurp(e.path()) == slurp(dir / "b" / e.path().filename()));

    // A second run into a populated directory collides instead of overwriting.
    auto again = run_cli("gen-archive --config " + (dir / "c.json").string() + " --hours 1 --out " + (dir / "a").string(), dir);
    CHECK(again.code == 2);

    write_config(dir / "c2.json", 8);
    run_cli("gen-archive --config " + (dir / "c2.json").string() + " --hours 2 --out " + (dir / "c").string(), dir);
    bool differs = false;
    for (const auto& e : std::filesystem::directory_iterator(dir / "a"))
        differs = differs || slurp(e.path()) != slurp(dir / "c" / e.path().filename());
    CHECK(differs);
}

TEST_CASE("gen-archive edge cases and exit codes") {
    TempDir dir;
    write_config(dir / "c.json");
    auto zero = run_cli("gen-archive --config " + (dir / "c.json").string() + " --hours 0 --out " + (dir / "z").string(), dir);
    CHECK(zero.code == 0);
    CHECK(count_files(dir / "z") == 0);

    CHECK(run_cli("gen-archive --config " + (dir / "c.json").string() + " --hours 1 --out /proc/mandm-nope", dir).code == 2);
    CHECK(run_cli("gen-archive --config " + (dir / "missing.json").string() + " --hours 1 --out " + (dir / "m").string(), dir)
              .code == 2);
    CHECK(run_cli("gen-archive --config " + (dir / "c.json").string() + " --hours -1 --out " + (dir / "n").string(), dir)
              .code == 1);
    std::ofstream(dir / "bad.json") << R"({"sim": {"racks": 0, "nodes_per_rack": 1}})";
    CHECK(run_cli("gen-archive --config " + (dir / "bad.json").string() + " --hours 1 --out " + (dir / "x").string(), dir)
              .code == 1);
    CHECK(run_cli("bogus-command", dir).code == 1);
    ::unsetenv("MANDM_CONFIG");
    CHECK(run_cli("gen-archive --hours 1 --out " + (dir / "y").string(), dir).code == 1);
}

TEST_CASE("sim reports reconciled counts; bench-load reads the archive back") {
    TempDir dir;
    write_config(dir / "c.json");
    auto r = run_cli("sim --config " + (dir / "c.json").string() + " --ticks 10", dir);
    REQUIRE(r.code == 0);
    auto j = json::parse(r.out);
    CHECK(j.at("ticks") == 10);
    CHECK(j.at("telemetry_triples") == 10 * 6 * 5);
    CHECK(j.at("store").at("triple_count") ==
          j.at("telemetry_triples").get<std::uint64_t>() + j.at("job_triples").get<std::uint64_t>());

    REQUIRE(run_cli("gen-archive --config " + (dir / "c.json").string() + " --hours 1 --out " + (dir / "a").string(), dir)
                .code == 0);
    auto bench = run_cli("bench-load --archive " + (dir / "a").string() + " --from 0 --to 9999999999 --latency-ms 5 --json",
                         dir);
    REQUIRE(bench.code == 0);
    auto b = json::parse(bench.out);
    CHECK(b.at("files") == 12);
    CHECK(b.at("s_per_file").get<double>() >= 0.005);
    CHECK(b.at("warm_s_per_file").get<double>() < b.at("s_per_file").get<double>());
    CHECK(run_cli("bench-load --archive " + (dir / "none").string() + " --from 0 --to 1", dir).code == 2);
}
