#include <cmath>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "qnet/graph.hpp"

using namespace qnet;

TEST_CASE("graph construction rejects malformed edge lists") {
    CHECK_THROWS_AS(Graph(3, {{0, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(Graph(3, {{0, 3}}), std::invalid_argument);
    CHECK_THROWS_AS(Graph(3, {{0, 1}, {1, 0}}), std::invalid_argument);
    const Graph g(4, {{2, 1}, {0, 3}});
    CHECK(g.has_edge(1, 2));
    CHECK(g.has_edge(3, 0));
    CHECK_FALSE(g.has_edge(0, 1));
    CHECK(g.edge_count() == 2);
    CHECK(Graph::complete(5).edge_count() == 10);
    CHECK(Graph::cycle(5).degree(3) == 2);
}

TEST_CASE("patterns by name") {
    for (const char* name : standard_pattern_names()) {
        const auto f = pattern_by_name(name);
        CHECK(f.name == name);
        CHECK(f.l() >= f.n - 1);
    }
    const auto star = pattern_by_name("custom:0-1,0-2,0-3");
    CHECK(star.n == 4);
    CHECK(star.l() == 3);
    CHECK_THROWS_AS(pattern_by_name("custom:0-1,2-3"), std::invalid_argument);
    CHECK_THROWS_AS(pattern_by_name("pentagon"), std::invalid_argument);
}

TEST_CASE("critical exponents follow the appearance table") {
    // z at which each subgraph appears: -2, -3/2, -4/3, -1, -1, -2/3
    CHECK(critical_exponent(pattern_by_name("edge")) == Rational{-2, 1});
    CHECK(critical_exponent(pattern_by_name("path3")) == Rational{-3, 2});
    CHECK(critical_exponent(pattern_by_name("path4")) == Rational{-4, 3});
    CHECK(critical_exponent(pattern_by_name("triangle")) == Rational{-1, 1});
    CHECK(critical_exponent(pattern_by_name("square")) == Rational{-1, 1});
    CHECK(critical_exponent(pattern_by_name("k4")) == Rational{-2, 3});
}

TEST_CASE("scaling law clamps to a probability") {
    const ScalingLaw law{-1.0, 3.0};
    CHECK(law.classical_p(100) == doctest::Approx(0.03));
    CHECK(law.quantum_p(100) == doctest::Approx(0.06));
    CHECK(ScalingLaw{0.0, 2.0}.classical_p(10) == 1.0);
}

TEST_CASE("sample_gnp is deterministic and monotone in p") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Graph lo = sample_gnp(60, 0.05, seed);
        const Graph hi = sample_gnp(60, 0.2, seed);
        CHECK(lo.edges() == sample_gnp(60, 0.05, seed).edges());
        for (const auto& [a, b] : lo.edges()) CHECK(hi.has_edge(a, b));
    }
}

TEST_CASE("edge counts match the binomial mean") {
    // per-pair path and the geometric-skipping path
    struct Case {
        int N;
        double p;
        int samples;
    };
    for (const Case cs : {Case{200, 0.05, 200}, Case{3000, 0.0004, 60}}) {
        const double pairs = cs.N * (cs.N - 1) / 2.0;
        double total = 0.0;
        for (int s = 0; s < cs.samples; ++s) total += static_cast<double>(sample_gnp(cs.N, cs.p, 1000 + s).edge_count());
        const double mean = total / cs.samples;
        const double sigma = std::sqrt(pairs * cs.p * (1 - cs.p) / cs.samples);
        CHECK(std::abs(mean - pairs * cs.p) < 4.0 * sigma);
    }
}

TEST_CASE("containment agrees with exhaustive search") {
    const std::vector<std::string> names{"edge", "path3", "path4", "triangle", "square", "k4", "custom:0-1,0-2,0-3"};
    int positives = 0, checks = 0;
    for (std::uint64_t seed = 0; seed < 150; ++seed) {
        const int N = 4 + static_cast<int>(seed % 9);
        const double p = 0.1 + 0.05 * static_cast<double>(seed % 12);
        const Graph g = sample_gnp(N, p, seed);
        for (const auto& name : names) {
            const auto f = pattern_by_name(name);
            const bool expected = oracle::brute_contains(g, f);
            CHECK(contains_subgraph(g, f) == expected);
            positives += expected;
            ++checks;
        }
    }
    CHECK(positives > checks / 5);
    CHECK(positives < checks);
}

TEST_CASE("z grid and crossing interpolation") {
    const auto zs = z_grid(-1.6, -0.4, 0.1);
    REQUIRE(zs.size() == 13);
    CHECK(zs.front() == doctest::Approx(-1.6));
    CHECK(zs.back() == doctest::Approx(-0.4));
    CHECK_THROWS_AS(z_grid(0.0, -1.0, 0.1), std::invalid_argument);

    std::vector<SweepRow> rows{{10, -1.0, 0, 10, 1, 0.1}, {10, -0.5, 0, 10, 3, 0.3}, {10, 0.0, 0, 10, 7, 0.7}};
    // crossing of 0.5 between 0.3 at -0.5 and 0.7 at 0
    CHECK(*estimate_crossing(rows) == doctest::Approx(-0.25));
    rows[2].fraction = 0.4;
    CHECK_FALSE(estimate_crossing(rows).has_value());
}

TEST_CASE("sweep fractions are monotone in z and independent of thread count") {
    SweepConfig cfg;
    cfg.Ns = {32, 64};
    cfg.zs = z_grid(-2.0, 0.0, 0.1);
    cfg.trials = 40;
    cfg.seed = 11;
    cfg.threads = 1;
    const auto f = pattern_by_name("triangle");
    const SweepResult a = threshold_sweep(f, cfg);
    cfg.threads = 3;
    const SweepResult b = threshold_sweep(f, cfg);
    REQUIRE(a.rows.size() == 2 * cfg.zs.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].hits == b.rows[i].hits);
        CHECK(a.rows[i].fraction == doctest::Approx(static_cast<double>(a.rows[i].hits) / a.rows[i].trials));
    }
    for (int N : cfg.Ns) {
        const auto rows = a.rows_for(N);
        for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].hits >= rows[i - 1].hits);
        CHECK(rows.front().hits == 0);
        CHECK(rows.back().hits == cfg.trials);
    }
}

TEST_CASE("sweep fractions agree with independent G(N,p) samples") {
    SweepConfig cfg;
    cfg.Ns = {24};
    cfg.zs = {-1.3, -1.1, -0.9};
    cfg.trials = 400;
    cfg.seed = 5;
    const auto f = pattern_by_name("path3");
    const SweepResult r = threshold_sweep(f, cfg);
    for (const auto& row : r.rows) {
        CHECK(row.p == doctest::Approx(std::pow(24.0, row.z)));
        int hits = 0;
        for (int t = 0; t < 400; ++t) hits += contains_subgraph(sample_gnp(24, row.p, 90000 + t), f);
        const double a = row.fraction;
        const double b = hits / 400.0;
        const double pooled = (a + b) / 2.0;
        const double sigma = std::sqrt(2.0 * pooled * (1.0 - pooled) / 400.0);
        CHECK(std::abs(a - b) <= 4.0 * sigma + 1e-12);
    }
}
