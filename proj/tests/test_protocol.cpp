#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "qnet/network.hpp"
#include "qnet/protocol.hpp"

using namespace qnet;

namespace {

double falling(int D, int n) {
    double out = 1.0;
    for (int i = 0; i < n; ++i) out *= D - i;
    return out;
}

double odd_double_factorial(int c) {  // (c-1)!!
    return c <= 2 ? 1.0 : (c - 1) * odd_double_factorial(c - 2);
}

std::vector<std::string> labels_v(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(node_label(i));
    return out;
}

}  // namespace

TEST_CASE("round-robin colouring is a 1-factorization") {
    for (int c : {2, 4, 6, 8, 10}) {
        for (int col = 1; col < c; ++col) {
            std::vector<int> hits(static_cast<std::size_t>(c), 0);
            for (int i = 0; i < c; ++i)
                for (int j = i + 1; j < c; ++j) {
                    CHECK(matching_color(i, j, c) == matching_color(j, i, c));
                    CHECK(matching_color(i, j, c) == oracle::colour(i, j, c));
                    if (matching_color(i, j, c) == col) {
                        ++hits[static_cast<std::size_t>(i)];
                        ++hits[static_cast<std::size_t>(j)];
                    }
                }
            for (int h : hits) CHECK(h == 1);
        }
    }
}

TEST_CASE("build_kc enumerates every perfect matching once") {
    for (int c : {2, 4, 6, 8}) {
        const MatchingState k = build_kc(c);
        CHECK(k.native.size() == oracle::matchings(c).size());
        CHECK(static_cast<double>(k.native.size()) == odd_double_factorial(c));
        CHECK(double_factorial(c) == static_cast<std::uint64_t>(odd_double_factorial(c)));
        CHECK(k.native.norm2() == doctest::Approx(1.0));
        CHECK(k.native.reg().size() == static_cast<std::size_t>(c * (c - 1)));
        for (const auto& [idx, amp] : k.native.terms()) {
            CHECK(std::abs(amp - 1.0 / std::sqrt(odd_double_factorial(c))) < 1e-15);
            for (int a = 0; a < c; ++a) {
                int ones = 0;
                for (int b = 0; b < c; ++b) {
                    if (a == b) continue;
                    const auto pa = k.native.reg().position(qubit_label(a, b));
                    const auto pb = k.native.reg().position(qubit_label(b, a));
                    CHECK(idx[pa] == idx[pb]);
                    ones += idx[pa] == 2;
                }
                CHECK(ones == 1);
            }
        }
    }
    CHECK_THROWS_AS(build_kc(5), std::invalid_argument);
    CHECK_THROWS_AS(build_kc(0), std::invalid_argument);
}

TEST_CASE("relabelled K_4 is the four-party three-level GHZ state") {
    const SparseState r = relabel_kc(build_kc(4));
    const auto labels = labels_v(4);
    CHECK(fidelity(r, ghz_state(3, 3, labels)) >= 1.0 - 1e-12);
    CHECK(r.norm2() == doctest::Approx(1.0));
}

TEST_CASE("relabelled K_c holds partner colours") {
    for (int c : {2, 4, 6}) {
        const SparseState r = relabel_kc(build_kc(c));
        CHECK(r.size() == oracle::matchings(c).size());
        CHECK(r.norm2() == doctest::Approx(1.0));
        std::set<Index> expected;
        for (const auto& partner : oracle::matchings(c)) {
            Index idx;
            for (int v = 0; v < c; ++v) idx.push_back(static_cast<std::uint16_t>(oracle::colour(v, partner[static_cast<std::size_t>(v)], c)));
            expected.insert(idx);
        }
        for (const auto& [idx, amp] : r.terms()) CHECK(expected.count(idx) == 1);
    }
}

TEST_CASE("reducing K_c leaves K_{c-2} on the rest") {
    for (int c : {4, 6, 8}) {
        const auto branches = reduce_kc_branches(build_kc(c));
        REQUIRE(branches.size() == static_cast<std::size_t>(c - 1));
        double total = 0.0;
        for (const auto& b : branches) {
            total += b.probability;
            CHECK(b.probability == doctest::Approx(1.0 / (c - 1)));
            const MatchingState ref = build_kc(b.state.nodes);
            CHECK(b.state.native.reg() == ref.native.reg());
            CHECK(max_amplitude_error(b.state.native, ref.native) < 1e-12);
        }
        CHECK(total == doctest::Approx(1.0));
    }
    Rng rng(1);
    const auto b = reduce_kc(build_kc(6), rng);
    CHECK(b.state.c_nodes() == 4);
    CHECK_THROWS_AS(reduce_kc_branches(build_kc(2)), std::invalid_argument);
}

TEST_CASE("harvest succeeds when at least target/2 isolated pairs appear") {
    // isolated pairs are Poisson with mean c_coeff/2 in the limit
    const int target = 6;
    const double c_coeff = 12.0;
    int ok = 0;
    const int trials = 400;
    for (int s = 0; s < trials; ++s) {
        const auto h = step1_harvest(10000, -2.0, c_coeff, target, static_cast<std::uint64_t>(s));
        CHECK(h.harvested % 2 == 0);
        if (h.success) {
            ++ok;
            CHECK(h.reductions == (h.harvested - target) / 2);
            CHECK(h.reduce_choices.size() == static_cast<std::size_t>(h.reductions));
        }
    }
    const double lambda = c_coeff / 2.0;
    const double expected = 1.0 - std::exp(-lambda) * (1.0 + lambda + lambda * lambda / 2.0);
    const double sigma = std::sqrt(expected * (1 - expected) / trials);
    CHECK(std::abs(ok / double(trials) - expected) < 4.0 * sigma);
}

TEST_CASE("ket_d has D!/(D-n)! equal terms") {
    for (auto [n, D] : std::vector<std::pair<int, int>>{{2, 4}, {3, 4}, {2, 9}, {3, 16}}) {
        const SparseState k = ket_d(n, D);
        CHECK(static_cast<double>(k.size()) == falling(D, n));
        CHECK(k.norm2() == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(ket_d(3, 2), std::invalid_argument);
}

TEST_CASE("step 2 carves |D> out of K_c") {
    struct Case {
        int c, n;
        std::size_t accepted_min;
    };
    for (const Case cs : {Case{4, 2, 9}, Case{6, 2, 1}, Case{6, 3, 125}}) {
        const int D = cs.c - cs.n;
        const CarveResult r = step2_carve(build_kc(cs.c), cs.n);
        // kept nodes pairwise unmatched: D!/(D-n)! (D-n-1)!! / (c-1)!!
        const double links = falling(D, cs.n) * odd_double_factorial(D - cs.n) / odd_double_factorial(cs.c);
        CHECK(r.link_probability == doctest::Approx(links).epsilon(1e-12));
        double total = 0.0;
        for (const auto& b : r.branches) {
            total += b.probability;
            if (!b.accepted) continue;
            CHECK(b.state.size() == static_cast<std::size_t>(falling(D, cs.n)));
            CHECK(fidelity(b.state, ket_d(cs.n, D, labels_v(cs.n))) >= kAcceptFidelity);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.accepted_patterns().size() >= cs.accepted_min);
        // the all-(c-1) pattern carries no phase and is always accepted
        CHECK(r.accepted_patterns().count(std::vector<int>(static_cast<std::size_t>(D), cs.c - 1)) == 1);
    }
}

TEST_CASE("step 2 needs the phase correction") {
    const CarveResult with = step2_carve(build_kc(4), 2, true);
    const CarveResult without = step2_carve(build_kc(4), 2, false);
    CHECK(with.accepted_patterns().size() == 9);
    CHECK(without.accepted_patterns().size() < 9);
    CHECK(without.accepted_patterns().count({3, 3}) == 1);
}

TEST_CASE("set-partition expansion of |D>") {
    const auto terms = expand_partitions(3, 5);
    REQUIRE(terms.size() == 3);
    CHECK(terms[0].parts == std::vector<int>{1, 1, 1});
    CHECK(terms[0].weight == 1);
    CHECK(terms[1].parts == std::vector<int>{2, 1});
    CHECK(terms[1].weight == -1);
    CHECK(terms[1].placements.size() == 3);
    CHECK(terms[2].parts == std::vector<int>{3});
    CHECK(terms[2].weight == 2);

    const int bell[] = {1, 1, 2, 5, 15};
    for (int n = 1; n <= 4; ++n) {
        for (int D : {n, 5, 16}) {
            if (n == 4 && D == 16) continue;  // covered by the acceptance run
            const auto t = expand_partitions(n, D);
            std::size_t placements = 0;
            for (const auto& term : t) placements += term.placements.size();
            CHECK(placements == static_cast<std::size_t>(bell[n]));
            const SparseState sum = reconstruct(t);
            CHECK(max_amplitude_error(sum, ket_d(n, D).scaled(std::sqrt(falling(D, n)))) < 1e-12);
        }
    }
}

TEST_CASE("step 3 extracts the GHZ state with the predicted probability") {
    for (auto [n, d] : std::vector<std::pair<int, int>>{{2, 2}, {2, 3}, {2, 4}, {3, 3}, {3, 4}}) {
        const int D = d * d;
        const auto labels = labels_v(n);
        const ExtractResult ex = step3_extract_ghz(ket_d(n, D, labels), n, d);
        REQUIRE(ex.state.has_value());
        CHECK(fidelity(*ex.state, ghz_state(d, d, labels)) >= 1.0 - 1e-9);
        double fact = 1.0;
        for (int i = 2; i < n; ++i) fact *= i;
        const double predicted = fact * fact * D * std::pow(double(d), 1 - n) / falling(D, n);
        CHECK(ex.probability == doctest::Approx(predicted).epsilon(1e-9));
    }
    CHECK(step3_pattern(3, 4) == std::vector<int>{1, 1, 2});
    CHECK_THROWS_AS(step3_pattern(3, 2), std::invalid_argument);
}

TEST_CASE("step 3 removes every term with fewer than n parties in one block") {
    const int n = 3, d = 4, D = 16;
    const auto terms = expand_partitions(n, D);
    const double norm = std::sqrt(falling(D, n));
    for (const auto& t : terms) {
        const SparseState piece = t.state.scaled(static_cast<double>(t.weight) / norm);
        const double prob = step3_cascade(piece, n, d).norm2();
        if (t.parts.front() < n) CHECK(prob < 1e-12);
        else CHECK(prob > 1e-6);
    }
}

TEST_CASE("step 4 elements are complete and project onto |F>") {
    for (const char* name : {"edge", "path3", "triangle", "square", "custom:0-1,0-2,0-3"}) {
        const auto f = pattern_by_name(name);
        const int d = 1 << f.l();
        const auto labels = labels_v(f.n);
        for (int j = 0; j < f.n; ++j) {
            const auto els = step4_elements(f, j, labels[static_cast<std::size_t>(j)]);
            CHECK(completeness_error(els, std::vector<int>{d}) < 1e-12);
        }
        const ProjectResult pr = step4_project(ghz_state(d, d, labels), f);
        REQUIRE(pr.state.has_value());
        CHECK(pr.probability == doctest::Approx(std::pow(double(d), -f.n)).epsilon(1e-9));
        CHECK(fidelity(*pr.state, target_state(f, labels)) >= 1.0 - 1e-9);
    }
}

TEST_CASE("target state is one Bell pair per edge") {
    const auto f = pattern_by_name("path3");
    const SparseState t = target_state(f, labels_v(3));
    CHECK(t.size() == 4);
    CHECK(t.reg().labels() == std::vector<std::string>{"v0.e0", "v1.e0", "v1.e1", "v2.e1"});
    CHECK(std::abs(t.amplitude({2, 2, 1, 1}) - 0.5) < 1e-15);
}

TEST_CASE("exact edge protocol matches a dense simulation") {
    const auto dense = oracle::edge_pipeline_dense();
    const auto t = make_target(pattern_by_name("edge"));
    ProtocolOptions o;
    const ProtocolTrace tr = run_full_protocol(t, o);
    CHECK(tr.status == "success");
    CHECK(tr.fidelity >= 1.0 - 1e-9);
    CHECK(dense.min_fidelity >= 1.0 - 1e-9);
    CHECK(std::abs(tr.p_F - dense.p_F) < 1e-9);
    CHECK(tr.p_F == doctest::Approx(0.8 / 625.0 / 6.0 / 4.0).epsilon(1e-9));

    double product = 1.0;
    for (const auto& s : tr.steps) product *= s.probability;
    CHECK(product == doctest::Approx(tr.p_F).epsilon(1e-9));

    o.start_from_larger = false;
    CHECK(run_full_protocol(t, o).p_F == doctest::Approx(tr.p_F).epsilon(1e-12));
    CHECK(pure_success_probability(t) == doctest::Approx(tr.p_F).epsilon(1e-12));
    CHECK(step2_policy(t).size() == static_cast<std::size_t>(dense.accepted_patterns));
}

TEST_CASE("targets outside the materialized chain are reported, not run") {
    const auto tri = run_full_protocol(make_target(pattern_by_name("triangle")), {});
    CHECK(tri.status == "rejected");
    CHECK_FALSE(tri.success);
    const auto sq = run_full_protocol(make_target(pattern_by_name("square")), {});
    CHECK(sq.status == "too_large");
}

TEST_CASE("sampled runs are reproducible and fail at the expected rate") {
    const auto t = make_target(pattern_by_name("edge"));
    ProtocolOptions o;
    o.seed = 42;
    o.harvest_N = 2000;
    const auto a = run_sampled_protocols(t, o, 1500, 1);
    const auto b = run_sampled_protocols(t, o, 1500, 3);
    int link_failures = 0, reached_links = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].status == b[i].status);
        CHECK(a[i].steps.size() == b[i].steps.size());
        if (a[i].success) CHECK(a[i].fidelity >= 1.0 - 1e-9);
        if (a[i].status == "failed:harvest") continue;
        ++reached_links;
        link_failures += a[i].status == "failed:step2_links";
    }
    REQUIRE(reached_links > 1000);
    const double rate = link_failures / double(reached_links);
    CHECK(std::abs(rate - 0.2) < 4.0 * std::sqrt(0.2 * 0.8 / reached_links));
}

TEST_CASE("sampled chain reaches |F> when steps are forced through") {
    // one pure state, many seeds: every success must be the Bell pair
    const auto t = make_target(pattern_by_name("edge"));
    const auto& policy = step2_policy(t);
    const MatchingState k = build_kc(6);
    int successes = 0;
    for (std::uint64_t s = 0; s < 200000 && successes < 3; ++s) {
        Rng rng(s);
        ProtocolTrace tr;
        sample_chain(t, k, policy, true, rng, tr);
        if (tr.success) {
            ++successes;
            CHECK(tr.fidelity >= 1.0 - 1e-9);
        }
    }
    CHECK(successes >= 1);
}

TEST_CASE("amplification plan") {
    CHECK(repetitions_needed(0.5, 1e-3) == 10);
    CHECK(repetitions_needed(0.01, 0.01) == 459);
    CHECK(repetitions_needed(1.0, 0.01) == 1);
    CHECK_THROWS_AS(repetitions_needed(0.0, 0.01), std::invalid_argument);
    const auto plan = amplification_plan(10, 0.8, 0.01);
    CHECK(plan.L == 3);
    CHECK(plan.feasible);
    // sets of 4, 3 and 3 nodes keep 6 + 3 + 3 of the 45 links
    CHECK(plan.discarded_links == 33);
    CHECK_FALSE(amplification_plan(5, 0.01, 0.01).feasible);
}
