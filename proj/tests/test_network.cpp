#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "qnet/network.hpp"

using namespace qnet;

namespace {

// Joint degree distribution of G(N, p/2), by enumerating every edge set.
std::map<std::vector<int>, double> classical_degree_distribution(int N, double p) {
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < N; ++a)
        for (int b = a + 1; b < N; ++b) pairs.emplace_back(a, b);
    const double q = p / 2.0;
    std::map<std::vector<int>, double> dist;
    for (unsigned mask = 0; mask < (1u << pairs.size()); ++mask) {
        std::vector<int> deg(static_cast<std::size_t>(N), 0);
        double w = 1.0;
        for (std::size_t e = 0; e < pairs.size(); ++e) {
            if (mask & (1u << e)) {
                ++deg[static_cast<std::size_t>(pairs[e].first)];
                ++deg[static_cast<std::size_t>(pairs[e].second)];
                w *= q;
            } else {
                w *= 1.0 - q;
            }
        }
        dist[deg] += w;
    }
    return dist;
}

double binomial_pmf(int n, int k, double q) {
    long double c = 1.0L;
    for (int i = 0; i < k; ++i) c = c * (n - i) / (i + 1);
    return static_cast<double>(c * std::pow(static_cast<long double>(q), k) * std::pow(1.0L - q, n - k));
}

}  // namespace

TEST_CASE("link state and conversion probability") {
    const SparseState s = link_state(0.4);
    CHECK(std::norm(s.amplitude({1, 1})) == doctest::Approx(0.8));
    CHECK(std::norm(s.amplitude({2, 2})) == doctest::Approx(0.2));
    CHECK(singlet_conversion_prob(0.4) == doctest::Approx(0.4));
    CHECK_THROWS_AS(make_link(1.5), std::invalid_argument);
    CHECK_THROWS_AS(make_link(-0.1), std::invalid_argument);
    CHECK(convert_links(50, 0.1, 4).edges() == sample_gnp(50, 0.1, 4).edges());
}

TEST_CASE("vacuum overlap of the materialized state") {
    for (int N = 2; N <= 5; ++N) {
        for (double p : {0.1, 0.5, 1.0}) {
            const auto g = QuantumRandomGraph::materialize(N, p);
            CHECK(g.state().norm2() == doctest::Approx(1.0).epsilon(1e-12));
            const Index zero(g.state().reg().size(), 1);
            CHECK(std::norm(g.state().amplitude(zero)) == doctest::Approx(vacuum_overlap(N, p)).epsilon(1e-12));
        }
    }
    CHECK(vacuum_overlap(1000, std::pow(1000.0, -2.5)) > 0.99);
    CHECK_THROWS_AS(QuantumRandomGraph::materialize(7, 0.1), std::invalid_argument);
}

TEST_CASE("P_m joint outcomes equal the classical degree distribution in every order") {
    for (int N : {3, 4}) {
        for (double p : {0.3, 1.0}) {
            const auto g = QuantumRandomGraph::materialize(N, p);
            const auto reference = classical_degree_distribution(N, p);
            std::vector<int> order(static_cast<std::size_t>(N));
            std::iota(order.begin(), order.end(), 0);
            do {
                const auto dist = pm_joint_distribution(g, order);
                double tvd = 0.0;
                for (const auto& [k, v] : reference) {
                    const auto it = dist.find(k);
                    tvd += std::abs(v - (it == dist.end() ? 0.0 : it->second));
                }
                for (const auto& [k, v] : dist) {
                    if (!reference.count(k)) tvd += v;
                }
                CHECK(tvd / 2.0 < 1e-12);
            } while (std::next_permutation(order.begin(), order.end()));
        }
    }
}

TEST_CASE("single-node P_m outcomes are binomial") {
    const auto g = QuantumRandomGraph::materialize(5, 0.6);
    const auto recs = apply_pm_exact(g, 2);
    REQUIRE(recs.size() == 5);
    double total = 0.0;
    for (int m = 0; m < 5; ++m) {
        CHECK(recs[static_cast<std::size_t>(m)].probability == doctest::Approx(binomial_pmf(4, m, 0.3)).epsilon(1e-12));
        total += recs[static_cast<std::size_t>(m)].probability;
    }
    CHECK(total == doctest::Approx(1.0));
    CHECK(completeness_error(pm_elements(node_qubits(0, std::vector<int>{0, 1, 2})), std::vector<int>{2, 2}) < 1e-15);
}

TEST_CASE("outcome 0 leaves the other nodes in the smaller random graph") {
    const double p = 0.7;
    const auto g4 = QuantumRandomGraph::materialize(4, p);
    const auto rec = apply_pm_exact(g4, 3).front();
    CHECK(rec.probability == doctest::Approx(std::pow(1.0 - p / 2.0, 3)).epsilon(1e-12));
    std::vector<std::string> drop = node_qubits(3, std::vector<int>{0, 1, 2, 3});
    for (int x = 0; x < 3; ++x) drop.push_back(qubit_label(x, 3));
    const SparseState rest = factor_out(*rec.post_state, drop);
    const auto g3 = QuantumRandomGraph::materialize(3, p);
    CHECK(rest.reg() == g3.state().reg());
    CHECK(max_amplitude_error(rest, g3.state()) < 1e-12);
}

TEST_CASE("expected outcome counts") {
    // exact binomial expectation against a direct product evaluation
    for (int m = 0; m <= 4; ++m) {
        const auto e = expected_outcome_count(1000, -1.5, 2.0, m);
        const double q = 2.0 * std::pow(1000.0, -1.5);
        CHECK(e.exact == doctest::Approx(1000.0 * binomial_pmf(999, m, q)).epsilon(1e-9));
    }
    const auto e1 = expected_outcome_count(1e4, -2.0, 3.0, 1);
    CHECK(e1.asymptotic == doctest::Approx(3.0));
    CHECK(std::abs(e1.exact / e1.asymptotic - 1.0) < 0.02);
    CHECK(expected_outcome_count(10, -1.0, 1.0, 12).exact == 0.0);
    CHECK_THROWS_AS(expected_outcome_count(10, 0.0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("sampled outcome statistics are the degree histogram") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto stats = sample_pm_outcomes(300, 0.02, seed);
        const Graph g = sample_gnp(300, 0.01, seed);
        CHECK(stats.total() == 300);
        for (int m = 0; m < 10; ++m) {
            long long expected = 0;
            for (int v = 0; v < 300; ++v) expected += g.degree(v) == m;
            CHECK(stats.count(m) == expected);
        }
    }
    const auto scaled = sample_pm_outcomes_scaled(10000, -2.0, 3.0, 1);
    CHECK(scaled.p == doctest::Approx(6e-8));
    CHECK(scaled.total() == 10000);
}

TEST_CASE("isolated pairs") {
    const Graph g(7, {{0, 1}, {2, 3}, {3, 4}, {5, 6}});
    CHECK(isolated_pair_nodes(g) == 4);
    CHECK(isolated_pair_nodes(Graph(3, {})) == 0);
}
