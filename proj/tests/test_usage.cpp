#include <doctest.h>

#include <random>

#include "mandm/error.hpp"
#include "mandm/usage.hpp"
#include "oracles.hpp"

using namespace mandm;

namespace {
UsageConfig caps(std::uint32_t node_cap, std::uint32_t file_cap = 1000) {
    UsageConfig c;
    c.node_cap = node_cap;
    c.file_cap = file_cap;
    return c;
}
}  // namespace

TEST_CASE("compute_usage examples") {
    const auto cfg = caps(64);
    CHECK(compute_usage(0, 0, cfg) == 0.0);
    CHECK(compute_usage(64, 1000, cfg) == 100.0);
    // Frozen from the oracle: 80*0.5 + 20*0 and 80*min(3,1) + 0.
    CHECK(compute_usage(32, 0, cfg) == doctest::Approx(40.0).epsilon(1e-12));
    CHECK(compute_usage(192, 0, cfg) == doctest::Approx(80.0).epsilon(1e-12));
    CHECK(compute_usage(10, 100, cfg) == doctest::Approx(14.5).epsilon(1e-12));
}

TEST_CASE("compute_usage is bounded, monotone and matches the direct formula") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::uint64_t> count(0, 5000);
    std::uniform_int_distribution<std::uint32_t> cap(1, 512);
    for (int i = 0; i < 20000; ++i) {
        const auto cfg = caps(cap(rng), cap(rng) * 4);
        const auto n = count(rng), f = count(rng);
        const double u = compute_usage(n, f, cfg);
        REQUIRE(u >= 0.0);
        REQUIRE(u <= 100.0);
        REQUIRE(u == doctest::Approx(oracle::usage(double(n), double(f), cfg.node_cap, cfg.file_cap)).epsilon(1e-12));
        REQUIRE(compute_usage(n + 1, f, cfg) >= u);
        REQUIRE(compute_usage(n, f + 1, cfg) >= u);
    }
}

TEST_CASE("compute_usage ratio invariance under scaled node cap") {
    for (std::uint32_t cap = 1; cap <= 40; ++cap)
        for (std::uint64_t n = 0; n <= 2ull * cap; ++n)
            for (std::uint32_t k : {2u, 3u, 7u})
                CHECK(compute_usage(n * k, 17, caps(cap * k)) == doctest::Approx(compute_usage(n, 17, caps(cap))));
}

TEST_CASE("classify_usage boundaries and colors") {
    const auto cfg = caps(64);
    CHECK(classify_usage(0, cfg) == Tier::Normal);
    CHECK(classify_usage(49.999, cfg) == Tier::Normal);
    CHECK(classify_usage(50, cfg) == Tier::Elevated);
    CHECK(classify_usage(79.999, cfg) == Tier::Elevated);
    CHECK(classify_usage(80, cfg) == Tier::Critical);
    CHECK(classify_usage(100, cfg) == Tier::Critical);
    CHECK(tier_color(Tier::Normal) == "green");
    CHECK(tier_color(Tier::Elevated) == "cyan");
    CHECK(tier_color(Tier::Critical) == "red");
    CHECK(Tier::Normal < Tier::Elevated);
    CHECK(Tier::Elevated < Tier::Critical);
}

TEST_CASE("classify_usage is monotone") {
    const auto cfg = caps(64);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 100);
    for (int i = 0; i < 10000; ++i) {
        double a = u(rng), b = u(rng);
        if (a > b) std::swap(a, b);
        REQUIRE(classify_usage(a, cfg) <= classify_usage(b, cfg));
    }
}

TEST_CASE("avatar_scale and gpu_color") {
    CHECK(avatar_scale(0) == 1.0);
    CHECK(avatar_scale(100) == 4.0);
    CHECK(avatar_scale(50) == doctest::Approx(2.5));
    CHECK(gpu_color(0) == 0.0);
    CHECK(gpu_color(100) == 1.0);
    CHECK(gpu_color(50) == 0.5);
    for (double u = 0; u < 100; u += 0.25) {
        CHECK(avatar_scale(u + 0.25) > avatar_scale(u));
        CHECK(gpu_color(u + 0.25) >= gpu_color(u));
    }
}

TEST_CASE("UsageConfig validation") {
    auto cfg = caps(64);
    CHECK_NOTHROW(cfg.validate());
    cfg.node_weight = 70;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = caps(64);
    cfg.elevated_threshold = 85;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    CHECK_THROWS_AS(caps(0).validate(), ValidationError);
}
