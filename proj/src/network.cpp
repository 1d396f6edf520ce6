#include "qnet/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace qnet {

LinkSpec make_link(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("link: p must lie in [0, 1]");
    }
    return LinkSpec{p};
}

SparseState link_state(double p, const std::string& first, const std::string& second) {
    const LinkSpec link = make_link(p);
    SparseState s{QuditRegister({{first, 2}, {second, 2}})};
    s.add_term({1, 1}, std::sqrt(link.weight_00()));
    s.add_term({2, 2}, std::sqrt(link.weight_11()));
    s.prune();
    return s;
}

double singlet_conversion_prob(double p) {
    const LinkSpec link = make_link(p);
    return 2.0 * std::min(link.weight_00(), link.weight_11());
}

Graph convert_links(int node_count, double p, std::uint64_t seed) {
    return sample_gnp(node_count, singlet_conversion_prob(p), seed);
}

double vacuum_overlap(double N, double p) {
    make_link(p);
    if (N < 1) {
        throw std::invalid_argument("vacuum_overlap: N must be >= 1");
    }
    const double pairs = N * (N - 1.0) / 2.0;
    return std::exp(pairs * std::log1p(-p / 2.0));
}

double vacuum_overlap_asymptotic(double N, double z) { return std::exp(-std::pow(N, z + 2.0) / 4.0); }

OutcomeExpectation expected_outcome_count(double N, double z, double c_coeff, int m) {
    const double q = c_coeff * std::pow(N, z);
    if (!(q >= 0.0 && 2.0 * q <= 1.0)) {
        throw std::invalid_argument("expected_outcome_count: p = 2 c N^z outside [0, 1]");
    }
    if (m < 0) {
        throw std::invalid_argument("expected_outcome_count: m must be >= 0");
    }
    OutcomeExpectation out;
    if (static_cast<double>(m) > N - 1.0) {
        return out;
    }
    const double log_choose = std::lgamma(N) - std::lgamma(m + 1.0) - std::lgamma(N - m);
    const double tail = (N - 1.0 - m) * std::log1p(-q);
    const double head = m == 0 ? 0.0 : m * std::log(q);
    out.exact = q == 0.0 && m > 0 ? 0.0 : N * std::exp(log_choose + head + tail);
    out.asymptotic = std::pow(c_coeff, m) / std::tgamma(m + 1.0) * std::pow(N, m * (z + 1.0) + 1.0);
    return out;
}

long long OutcomeStats::count(int m) const {
    return m >= 0 && static_cast<std::size_t>(m) < counts.size() ? counts[static_cast<std::size_t>(m)] : 0;
}

long long OutcomeStats::total() const {
    long long t = 0;
    for (auto c : counts) t += c;
    return t;
}

OutcomeStats sample_pm_outcomes(int N, double p, std::uint64_t seed) {
    const LinkSpec link = make_link(p);
    const Graph g = sample_gnp(N, link.weight_11(), seed);
    OutcomeStats stats;
    stats.N = N;
    stats.p = p;
    stats.counts.assign(1, 0);
    for (int v = 0; v < N; ++v) {
        const auto deg = static_cast<std::size_t>(g.degree(v));
        if (deg >= stats.counts.size()) stats.counts.resize(deg + 1, 0);
        ++stats.counts[deg];
    }
    return stats;
}

OutcomeStats sample_pm_outcomes_scaled(int N, double z, double c_coeff, std::uint64_t seed) {
    const double p = 2.0 * c_coeff * std::pow(static_cast<double>(N), z);
    OutcomeStats stats = sample_pm_outcomes(N, p, seed);
    stats.z = z;
    stats.c_coeff = c_coeff;
    return stats;
}

int isolated_pair_nodes(const Graph& g) {
    int count = 0;
    for (int v = 0; v < g.node_count(); ++v) {
        if (g.degree(v) == 1 && g.degree(g.neighbors(v).front()) == 1) ++count;
    }
    return count;
}

std::string qubit_label(int owner, int partner) { return "q" + std::to_string(owner) + "." + std::to_string(partner); }

std::vector<std::string> node_qubits(int node, std::span<const int> nodes) {
    std::vector<std::string> out;
    for (int other : nodes) {
        if (other != node) out.push_back(qubit_label(node, other));
    }
    return out;
}

QuantumRandomGraph QuantumRandomGraph::materialize(int N, double p) {
    if (N < 1 || N > kMaterializeLimit) {
        throw std::invalid_argument("quantum random graph: materialization needs 1 <= N <= " +
                                    std::to_string(kMaterializeLimit));
    }
    QuantumRandomGraph g(N, make_link(p));
    std::vector<Site> sites;
    std::map<std::pair<int, int>, std::size_t> slot;
    for (int a = 0; a < N; ++a) {
        for (int b = 0; b < N; ++b) {
            if (a == b) continue;
            slot[{a, b}] = sites.size();
            sites.push_back({qubit_label(a, b), 2});
        }
    }
    std::vector<std::pair<int, int>> links;
    for (int a = 0; a < N; ++a) {
        for (int b = a + 1; b < N; ++b) links.emplace_back(a, b);
    }
    SparseState s{QuditRegister(std::move(sites))};
    const double amp00 = std::sqrt(g.link_.weight_00());
    const double amp11 = std::sqrt(g.link_.weight_11());
    const std::size_t L = links.size();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << L); ++mask) {
        Index idx(s.reg().size(), 1);
        double amp = 1.0;
        for (std::size_t e = 0; e < L; ++e) {
            if (mask >> e & 1U) {
                idx[slot[links[e]]] = 2;
                idx[slot[{links[e].second, links[e].first}]] = 2;
                amp *= amp11;
            } else {
                amp *= amp00;
            }
        }
        if (amp != 0.0) s.add_term(idx, amp);
    }
    s.prune();
    g.state_ = std::move(s);
    return g;
}

const SparseState& QuantumRandomGraph::state() const {
    if (!state_) {
        throw std::logic_error("quantum random graph: state is not materialized");
    }
    return *state_;
}

std::vector<MeasurementElement> pm_elements(std::span<const std::string> qubits) {
    const std::size_t k = qubits.size();
    std::vector<MeasurementElement> out(k + 1);
    for (std::size_t m = 0; m <= k; ++m) {
        out[m].label = "m=" + std::to_string(m);
        out[m].acts_on.assign(qubits.begin(), qubits.end());
        for (const auto& q : qubits) out[m].outputs.push_back({q, 2});
    }
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
        Index idx(k);
        for (std::size_t i = 0; i < k; ++i) idx[i] = (mask >> i & 1U) ? 2 : 1;
        const auto ones = static_cast<std::size_t>(std::popcount(mask));
        out[ones].action[idx] = {{idx, 1.0}};
    }
    return out;
}

std::vector<OutcomeRecord> apply_pm_exact(const QuantumRandomGraph& g, int node) {
    if (!g.materialized()) {
        throw std::logic_error("apply_pm_exact: graph is not materialized");
    }
    if (node < 0 || node >= g.N()) {
        throw std::invalid_argument("apply_pm_exact: node out of range");
    }
    std::vector<int> nodes(static_cast<std::size_t>(g.N()));
    for (int i = 0; i < g.N(); ++i) nodes[static_cast<std::size_t>(i)] = i;
    const auto qubits = node_qubits(node, nodes);
    const auto elements = pm_elements(qubits);
    return measure(g.state(), elements);
}

std::map<std::vector<int>, double> pm_joint_distribution(const QuantumRandomGraph& g, std::span<const int> order) {
    std::vector<int> nodes(static_cast<std::size_t>(g.N()));
    for (int i = 0; i < g.N(); ++i) nodes[static_cast<std::size_t>(i)] = i;
    std::map<std::vector<int>, double> dist;
    std::vector<int> outcome(static_cast<std::size_t>(g.N()), -1);
    std::function<void(const SparseState&, std::size_t, double)> walk = [&](const SparseState& s, std::size_t step,
                                                                             double prob) {
        if (step == order.size()) {
            dist[outcome] += prob;
            return;
        }
        const int node = order[step];
        const auto elements = pm_elements(node_qubits(node, nodes));
        for (std::size_t m = 0; m < elements.size(); ++m) {
            OutcomeRecord rec = apply_element(s, elements[m]);
            if (!rec.possible()) continue;
            outcome[static_cast<std::size_t>(node)] = static_cast<int>(m);
            walk(*rec.post_state, step + 1, prob * rec.probability);
        }
        outcome[static_cast<std::size_t>(node)] = -1;
    };
    walk(g.state(), 0, 1.0);
    return dist;
}

}  // namespace qnet
