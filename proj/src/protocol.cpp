#include "qnet/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>

#include "qnet/network.hpp"

namespace qnet {

namespace {

constexpr int kMaxMatchingNodes = 12;
// Branches whose joint probability falls below this are dropped from the
// exact step-2 tree.
constexpr double kBranchFloor = 1e-20;

std::uint16_t lvl(long v) { return static_cast<std::uint16_t>(v); }

std::size_t draw(const std::vector<double>& weights, Rng& rng) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double u = uniform01(rng) * total;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        last = i;
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    return last;
}

std::vector<int> iota_nodes(int c) {
    std::vector<int> nodes(static_cast<std::size_t>(c));
    std::iota(nodes.begin(), nodes.end(), 0);
    return nodes;
}

std::vector<std::string> kept_labels(const MatchingState& m, int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(node_label(m.nodes[static_cast<std::size_t>(i)]));
    return out;
}

std::vector<int> incident_edges(const SubgraphPattern& f, int j) {
    std::vector<int> out;
    for (int e = 0; e < f.l(); ++e) {
        const auto& [a, b] = f.edges[static_cast<std::size_t>(e)];
        if (a == j || b == j) out.push_back(e);
    }
    return out;
}

std::string fmt_outcomes(std::span<const int> k) {
    std::string s;
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(k[i]);
    }
    return s;
}

}  // namespace

std::uint64_t double_factorial(int c) {
    std::uint64_t out = 1;
    for (int k = c - 1; k > 1; k -= 2) out *= static_cast<std::uint64_t>(k);
    return out;
}

int matching_color(int i, int j, int c) {
    if (c < 2 || c % 2 != 0 || i == j || i < 0 || j < 0 || i >= c || j >= c) {
        throw std::invalid_argument("matching_color: need distinct positions below an even c");
    }
    const int m = c - 1;
    if (i == m) std::swap(i, j);
    if (j == m) return (2 * i) % m + 1;
    return (i + j) % m + 1;
}

std::string node_label(int node) { return "v" + std::to_string(node); }

MatchingState build_kc(int c) {
    if (c < 2 || c % 2 != 0) {
        throw std::invalid_argument("build_kc: c must be even and positive, got " + std::to_string(c));
    }
    const auto nodes = iota_nodes(c);
    return build_kc(nodes);
}

std::vector<std::vector<int>> perfect_matchings(int c) {
    if (c < 2 || c % 2 != 0) {
        throw std::invalid_argument("perfect_matchings: c must be even and positive");
    }
    std::vector<std::vector<int>> out;
    std::vector<int> partner(static_cast<std::size_t>(c), -1);
    std::function<void()> rec = [&] {
        const auto free = std::find(partner.begin(), partner.end(), -1);
        if (free == partner.end()) {
            out.push_back(partner);
            return;
        }
        const int i = static_cast<int>(free - partner.begin());
        for (int j = i + 1; j < c; ++j) {
            if (partner[static_cast<std::size_t>(j)] != -1) continue;
            partner[static_cast<std::size_t>(i)] = j;
            partner[static_cast<std::size_t>(j)] = i;
            rec();
            partner[static_cast<std::size_t>(i)] = -1;
            partner[static_cast<std::size_t>(j)] = -1;
        }
    };
    rec();
    return out;
}

SparseState matching_superposition(std::span<const int> nodes, std::span<const std::vector<int>> matchings) {
    const int c = static_cast<int>(nodes.size());
    if (matchings.empty()) {
        throw std::invalid_argument("matching_superposition: no matchings");
    }
    std::vector<Site> sites;
    for (int a : nodes) {
        for (const auto& q : node_qubits(a, nodes)) sites.push_back({q, 2});
    }
    SparseState s{QuditRegister(std::move(sites))};
    const auto slot = [c](int i, int j) { return static_cast<std::size_t>(i * (c - 1) + (j < i ? j : j - 1)); };
    const double amp = 1.0 / std::sqrt(static_cast<double>(matchings.size()));
    for (const auto& partner : matchings) {
        if (static_cast<int>(partner.size()) != c) {
            throw std::invalid_argument("matching_superposition: partner table size mismatch");
        }
        Index idx(s.reg().size(), 1);
        for (int i = 0; i < c; ++i) idx[slot(i, partner[static_cast<std::size_t>(i)])] = 2;
        s.add_term(idx, amp);
    }
    return s;
}

MatchingState build_kc(std::span<const int> nodes) {
    const int c = static_cast<int>(nodes.size());
    if (c < 2 || c % 2 != 0) {
        throw std::invalid_argument("build_kc: c must be even and positive, got " + std::to_string(c));
    }
    if (c > kMaxMatchingNodes) {
        throw std::invalid_argument("build_kc: c above " + std::to_string(kMaxMatchingNodes) + " is not materialized");
    }
    MatchingState m;
    m.nodes.assign(nodes.begin(), nodes.end());
    m.native = matching_superposition(nodes, perfect_matchings(c));
    return m;
}

MeasurementElement relabel_element(const MatchingState& m, int position) {
    const int c = m.c_nodes();
    const int a = m.nodes.at(static_cast<std::size_t>(position));
    MeasurementElement e;
    e.label = "relabel " + node_label(a);
    e.acts_on = node_qubits(a, m.nodes);
    e.outputs = {{node_label(a), c - 1}};
    int slot = 0;
    for (int j = 0; j < c; ++j) {
        if (j == position) continue;
        Index config(static_cast<std::size_t>(c - 1), 1);
        config[static_cast<std::size_t>(slot++)] = 2;
        e.action[config] = {{Index{lvl(matching_color(position, j, c))}, 1.0}};
    }
    return e;
}

SparseState relabel_kc(const MatchingState& m) {
    SparseState s = m.native;
    for (int i = 0; i < m.c_nodes(); ++i) s = apply_map(s, relabel_element(m, i));
    return s;
}

std::vector<ReduceBranch> reduce_kc_branches(const MatchingState& m) {
    const int c = m.c_nodes();
    if (c < 4) {
        throw std::invalid_argument("reduce_kc: need at least four nodes");
    }
    const int a = m.nodes.back();
    const auto qubits = node_qubits(a, m.nodes);
    std::vector<ReduceBranch> out;
    for (int j = 0; j < c - 1; ++j) {
        const int b = m.nodes[static_cast<std::size_t>(j)];
        MeasurementElement e;
        e.label = "partner " + std::to_string(b);
        e.acts_on = qubits;
        for (const auto& q : qubits) e.outputs.push_back({q, 2});
        Index config(qubits.size(), 1);
        config[static_cast<std::size_t>(j)] = 2;
        e.action[config] = {{config, 1.0}};
        OutcomeRecord rec = apply_element(m.native, e);
        if (!rec.possible()) continue;

        std::vector<int> rest;
        for (int x : m.nodes) {
            if (x != a && x != b) rest.push_back(x);
        }
        std::vector<std::string> drop = qubits;
        for (const auto& q : node_qubits(b, m.nodes)) drop.push_back(q);
        for (int x : rest) {
            drop.push_back(qubit_label(x, a));
            drop.push_back(qubit_label(x, b));
        }
        ReduceBranch br;
        br.measured_node = a;
        br.partner = b;
        br.probability = rec.probability;
        br.state.nodes = rest;
        br.state.native = factor_out(*rec.post_state, drop);
        out.push_back(std::move(br));
    }
    return out;
}

ReduceBranch reduce_kc(const MatchingState& m, Rng& rng) {
    auto branches = reduce_kc_branches(m);
    std::vector<double> w;
    for (const auto& b : branches) w.push_back(b.probability);
    return std::move(branches[draw(w, rng)]);
}

HarvestResult step1_harvest(int N, double z, double c_coeff, int target_c, std::uint64_t seed) {
    if (N < 2 || target_c < 2 || target_c % 2 != 0 || c_coeff <= 0.0) {
        throw std::invalid_argument("step1_harvest: need N >= 2, even target_c >= 2 and c_coeff > 0");
    }
    const ScalingLaw law{z, c_coeff};
    const double p = law.quantum_p(N);
    const Graph g = sample_gnp(N, p / 2.0, derive_seed(seed, "harvest", 0));
    HarvestResult h;
    h.target_c = target_c;
    h.harvested = isolated_pair_nodes(g);
    h.success = h.harvested >= target_c;
    if (!h.success) return h;
    h.reductions = (h.harvested - target_c) / 2;
    Rng rng(derive_seed(seed, "harvest", 1));
    for (int r = 0; r < h.reductions; ++r) {
        const int current = h.harvested - 2 * r;
        h.reduce_choices.push_back(static_cast<int>(uniform01(rng) * (current - 1)));
    }
    return h;
}

SubgraphTarget make_target(const SubgraphPattern& f) {
    if (f.l() < 1 || f.l() > 30) {
        throw std::invalid_argument("make_target: need 1 <= l <= 30 edges");
    }
    SubgraphTarget t;
    t.pattern = f;
    t.n = f.n;
    t.l = f.l();
    t.d = std::uint64_t{1} << t.l;
    t.D = t.d * t.d;
    t.c_nodes = static_cast<std::uint64_t>(t.n) + t.D;
    return t;
}

SparseState ket_d(int n, int D, std::span<const std::string> labels) {
    if (n < 1 || D < n || static_cast<int>(labels.size()) != n || D > 65535) {
        throw std::invalid_argument("ket_d: need 1 <= n <= D <= 65535 and n labels");
    }
    std::vector<Site> sites;
    for (const auto& l : labels) sites.push_back({l, D});
    SparseState s{QuditRegister(std::move(sites))};
    double count = 1.0;
    for (int i = 0; i < n; ++i) count *= D - i;
    const double amp = 1.0 / std::sqrt(count);
    Index idx(static_cast<std::size_t>(n));
    std::vector<char> used(static_cast<std::size_t>(D) + 1, 0);
    std::function<void(int)> rec = [&](int pos) {
        if (pos == n) {
            s.add_term(idx, amp);
            return;
        }
        for (int i = 1; i <= D; ++i) {
            if (used[static_cast<std::size_t>(i)]) continue;
            used[static_cast<std::size_t>(i)] = 1;
            idx[static_cast<std::size_t>(pos)] = lvl(i);
            rec(pos + 1);
            used[static_cast<std::size_t>(i)] = 0;
        }
    };
    rec(0);
    return s;
}

SparseState ket_d(int n, int D) {
    std::vector<std::string> labels;
    for (int i = 0; i < n; ++i) labels.push_back("s" + std::to_string(i));
    return ket_d(n, D, labels);
}

CarveLinks carve_links(const MatchingState& m, int n) {
    if (n < 1 || n > m.c_nodes()) {
        throw std::invalid_argument("carve_links: need 1 <= n <= c");
    }
    SparseState s = m.native;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const auto q = qubit_label(m.nodes[static_cast<std::size_t>(i)], m.nodes[static_cast<std::size_t>(j)]);
            MeasurementElement e;
            e.label = q + "=0";
            e.acts_on = {q};
            e.outputs = {{q, 2}};
            e.action[{1}] = {{Index{1}, 1.0}};
            s = apply_map(s, e);
        }
    }
    CarveLinks out;
    out.probability = std::clamp(s.norm2() / m.native.norm2(), 0.0, 1.0);
    if (!s.empty() && out.probability > 0.0) out.state = MatchingState{m.nodes, s.normalized()};
    else out.probability = 0.0;
    return out;
}

MeasurementElement carve_correction(const MatchingState& m, int n, int position, std::span<const int> k,
                                    bool phase_correction) {
    const int c = m.c_nodes();
    const int D = c - n;
    if (static_cast<int>(k.size()) != D) {
        throw std::invalid_argument("carve_correction: need one outcome per D-node");
    }
    const auto label = node_label(m.nodes.at(static_cast<std::size_t>(position)));
    MeasurementElement e;
    e.label = "correct " + label;
    e.acts_on = {label};
    e.outputs = {{label, D}};
    for (int j = n; j < c; ++j) {
        const int col = matching_color(position, j, c);
        const Amplitude phase =
            phase_correction ? root_of_unity(c - 1, static_cast<long long>(col) * k[static_cast<std::size_t>(j - n)])
                             : Amplitude{1.0};
        e.action[{lvl(col)}] = {{Index{lvl(j - n + 1)}, phase}};
    }
    return e;
}

SparseState apply_carve_correction(const SparseState& s, const MatchingState& m, int n, std::span<const int> k,
                                   bool phase_correction) {
    SparseState out = s;
    for (int i = 0; i < n; ++i) out = apply_map(out, carve_correction(m, n, i, k, phase_correction));
    return out;
}

std::set<std::vector<int>> CarveResult::accepted_patterns() const {
    std::set<std::vector<int>> out;
    for (const auto& b : branches) {
        if (b.accepted) out.insert(b.outcomes);
    }
    return out;
}

CarveResult step2_carve(const MatchingState& m, int n, bool phase_correction) {
    const int c = m.c_nodes();
    if (n < 2 || n >= c) {
        throw std::invalid_argument("step2_carve: need 2 <= n < c");
    }
    const int D = c - n;
    CarveResult out;
    out.kept.assign(m.nodes.begin(), m.nodes.begin() + n);
    const CarveLinks links = carve_links(m, n);
    out.link_probability = links.probability;
    if (!links.state || D < n) return out;

    const auto labels = kept_labels(m, n);
    const SparseState target = ket_d(n, D, labels);
    const SparseState relabelled = relabel_kc(*links.state);
    std::vector<int> k(static_cast<std::size_t>(D), 0);
    std::function<void(const SparseState&, int)> rec = [&](const SparseState& s, int j) {
        if (j == c) {
            CarveBranch br;
            br.outcomes = k;
            br.probability = s.norm2();
            SparseState corrected = apply_carve_correction(s, m, n, k, phase_correction);
            br.fidelity = fidelity(corrected, target);
            br.accepted = br.fidelity >= kAcceptFidelity;
            br.state = corrected.normalized();
            if (br.accepted) out.accepted_probability += br.probability;
            out.branches.push_back(std::move(br));
            return;
        }
        const auto site = node_label(m.nodes[static_cast<std::size_t>(j)]);
        for (int kk = 1; kk <= c - 1; ++kk) {
            SparseState next = apply_map(s, fourier_bra(site, kk, c - 1));
            if (next.norm2() < kBranchFloor) continue;
            k[static_cast<std::size_t>(j - n)] = kk;
            rec(next, j + 1);
        }
    };
    rec(relabelled, n);
    return out;
}

std::vector<PartitionTerm> expand_partitions(int n, int D, std::span<const std::string> labels) {
    if (n < 1 || D < 1 || static_cast<int>(labels.size()) != n) {
        throw std::invalid_argument("expand_partitions: need n >= 1, D >= 1 and n labels");
    }
    std::vector<Site> sites;
    for (const auto& l : labels) sites.push_back({l, D});
    const QuditRegister reg(std::move(sites));
    std::map<std::vector<int>, PartitionTerm, std::greater<>> grouped;
    std::vector<int> block_of(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int pos, int blocks) {
        if (pos < n) {
            for (int b = 0; b <= blocks; ++b) {
                block_of[static_cast<std::size_t>(pos)] = b;
                rec(pos + 1, std::max(blocks, b + 1));
            }
            return;
        }
        std::vector<std::vector<int>> placement(static_cast<std::size_t>(blocks));
        for (int i = 0; i < n; ++i) placement[static_cast<std::size_t>(block_of[static_cast<std::size_t>(i)])].push_back(i);
        std::vector<int> parts;
        long long weight = 1;
        for (const auto& b : placement) {
            const int size = static_cast<int>(b.size());
            parts.push_back(size);
            long long f = 1;
            for (int x = 2; x < size; ++x) f *= x;
            weight *= (size % 2 == 1 ? 1 : -1) * f;
        }
        std::sort(parts.begin(), parts.end(), std::greater<>());
        auto [it, inserted] = grouped.try_emplace(parts);
        PartitionTerm& term = it->second;
        if (inserted) {
            term.parts = parts;
            term.weight = weight;
            term.state = SparseState(reg);
        }
        term.placements.push_back(placement);
        // sum over one level per block
        std::vector<int> level(static_cast<std::size_t>(blocks), 1);
        Index idx(static_cast<std::size_t>(n));
        while (true) {
            for (int i = 0; i < n; ++i) {
                idx[static_cast<std::size_t>(i)] = lvl(level[static_cast<std::size_t>(block_of[static_cast<std::size_t>(i)])]);
            }
            term.state.add_term(idx, 1.0);
            int b = 0;
            while (b < blocks && level[static_cast<std::size_t>(b)] == D) level[static_cast<std::size_t>(b++)] = 1;
            if (b == blocks) break;
            ++level[static_cast<std::size_t>(b)];
        }
    };
    rec(0, 0);
    // most blocks first: the all-distinct term leads
    std::vector<PartitionTerm> out;
    for (auto& [parts, term] : grouped) out.push_back(std::move(term));
    std::stable_sort(out.begin(), out.end(),
                     [](const PartitionTerm& a, const PartitionTerm& b) { return a.parts.size() > b.parts.size(); });
    return out;
}

std::vector<PartitionTerm> expand_partitions(int n, int D) {
    std::vector<std::string> labels;
    for (int i = 0; i < n; ++i) labels.push_back("s" + std::to_string(i));
    return expand_partitions(n, D, labels);
}

SparseState reconstruct(std::span<const PartitionTerm> terms) {
    if (terms.empty()) {
        throw std::invalid_argument("reconstruct: no terms");
    }
    SparseState out(terms.front().state.reg());
    for (const auto& t : terms) out = out.axpy(static_cast<double>(t.weight), t.state);
    return out;
}

std::vector<int> step3_pattern(int n, int d) {
    if (n < 1 || d < n) {
        throw std::invalid_argument("step3_pattern: need 1 <= n <= d");
    }
    std::vector<int> k(static_cast<std::size_t>(n), 1);
    k.back() = d - n + 1;
    return k;
}

SparseState step3_cascade(const SparseState& s, int n, int d) {
    const auto labels = s.reg().labels();
    if (static_cast<int>(labels.size()) != n) {
        throw std::invalid_argument("step3: state must have n sites");
    }
    const auto k = step3_pattern(n, d);
    SparseState out = s;
    std::map<std::string, std::string> rename;
    for (int i = 0; i < n; ++i) {
        const auto& l = labels[static_cast<std::size_t>(i)];
        out = split_site(out, l, d);
        out = apply_map(out, fourier_bra(l + ".1", k[static_cast<std::size_t>(i)], d));
        rename[l + ".0"] = l;
    }
    return relabel_sites(out, rename);
}

ExtractResult step3_extract_ghz(const SparseState& s, int n, int d) {
    const SparseState raw = step3_cascade(s, n, d);
    ExtractResult out;
    out.probability = std::clamp(raw.norm2() / s.norm2(), 0.0, 1.0);
    if (!raw.empty() && out.probability > 0.0) out.state = raw.normalized();
    else out.probability = 0.0;
    return out;
}

std::string edge_qubit_label(const std::string& node, int edge) { return node + ".e" + std::to_string(edge); }

std::vector<MeasurementElement> step4_elements(const SubgraphPattern& f, int j, const std::string& label) {
    const int l = f.l();
    const int d = 1 << l;
    const auto inc = incident_edges(f, j);
    if (inc.empty()) {
        throw std::invalid_argument("step4: node without edges");
    }
    const auto bits_of = [&](int i) {
        Index phi;
        for (int e : inc) phi.push_back(lvl((((i - 1) >> (l - 1 - e)) & 1) + 1));
        return phi;
    };
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    MeasurementElement a;
    a.label = "A" + std::to_string(j);
    a.acts_on = {label};
    for (int e : inc) a.outputs.push_back({edge_qubit_label(label, e), 2});
    for (int i = 1; i <= d; ++i) a.action[{lvl(i)}] = {{bits_of(i), inv_sqrt_d}};

    const double s = std::ldexp(1.0, l - static_cast<int>(inc.size()));
    const double shrink = (1.0 - std::sqrt(1.0 - s / d)) / s;
    MeasurementElement comp;
    comp.label = "fail" + std::to_string(j);
    comp.acts_on = {label};
    comp.outputs = {{label, d}};
    for (int i = 1; i <= d; ++i) {
        MeasurementElement::Column col;
        const Index key = bits_of(i);
        for (int i2 = 1; i2 <= d; ++i2) {
            if (bits_of(i2) != key) continue;
            const double v = (i2 == i ? 1.0 : 0.0) - shrink;
            if (std::abs(v) > 0.0) col.push_back({Index{lvl(i2)}, v});
        }
        comp.action[{lvl(i)}] = std::move(col);
    }
    return {a, comp};
}

ProjectResult step4_project(const SparseState& ghz, const SubgraphPattern& f) {
    const auto labels = ghz.reg().labels();
    if (static_cast<int>(labels.size()) != f.n) {
        throw std::invalid_argument("step4: state must have one site per pattern node");
    }
    SparseState s = ghz;
    for (int j = 0; j < f.n; ++j) s = apply_map(s, step4_elements(f, j, labels[static_cast<std::size_t>(j)]).front());
    ProjectResult out;
    out.probability = std::clamp(s.norm2() / ghz.norm2(), 0.0, 1.0);
    if (!s.empty() && out.probability > 0.0) out.state = s.normalized();
    else out.probability = 0.0;
    return out;
}

SparseState target_state(const SubgraphPattern& f, std::span<const std::string> node_labels) {
    if (static_cast<int>(node_labels.size()) != f.n || f.l() < 1) {
        throw std::invalid_argument("target_state: need one label per node and at least one edge");
    }
    std::optional<SparseState> out;
    const double h = 1.0 / std::sqrt(2.0);
    for (int e = 0; e < f.l(); ++e) {
        const auto& [a, b] = f.edges[static_cast<std::size_t>(e)];
        SparseState pair{QuditRegister({{edge_qubit_label(node_labels[static_cast<std::size_t>(a)], e), 2},
                                        {edge_qubit_label(node_labels[static_cast<std::size_t>(b)], e), 2}})};
        pair.add_term({1, 1}, h);
        pair.add_term({2, 2}, h);
        out = out ? tensor(*out, pair) : pair;
    }
    std::vector<std::string> order;
    for (int j = 0; j < f.n; ++j) {
        for (int e : incident_edges(f, j)) order.push_back(edge_qubit_label(node_labels[static_cast<std::size_t>(j)], e));
    }
    return reorder(*out, order);
}

namespace {

const MatchingState& cached_kc(int c) {
    static std::mutex mutex;
    static std::map<int, MatchingState> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(c);
    if (it == cache.end()) it = cache.emplace(c, build_kc(c)).first;
    return it->second;
}

struct PolicyEntry {
    std::set<std::vector<int>> accepted;
    double p_F = 0.0;
};

// Accepted step-2 patterns and the exact success probability from a pure
// |K_c>, computed once per (c, target).
const PolicyEntry& cached_policy(const SubgraphTarget& t) {
    static std::mutex mutex;
    static std::map<std::pair<int, std::string>, PolicyEntry> cache;
    const int c = static_cast<int>(t.c_nodes);
    std::lock_guard lock(mutex);
    const auto key = std::make_pair(c, t.name() + "/" + std::to_string(t.n));
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    PolicyEntry entry;
    const MatchingState& k = cached_kc(c);
    const CarveResult carve = step2_carve(k, t.n);
    entry.accepted = carve.accepted_patterns();
    for (const auto& br : carve.branches) {
        if (!br.accepted) continue;
        const ExtractResult ex = step3_extract_ghz(br.state, t.n, static_cast<int>(t.d));
        if (!ex.state) continue;
        const ProjectResult pr = step4_project(*ex.state, t.pattern);
        entry.p_F += carve.link_probability * br.probability * ex.probability * pr.probability;
    }
    return cache.emplace(key, std::move(entry)).first->second;
}

bool reject_early(const SubgraphTarget& t, ProtocolTrace& trace) {
    if (t.c_nodes % 2 != 0) {
        trace.status = "rejected";
        trace.steps.push_back({"build", {"c=" + std::to_string(t.c_nodes) + " is odd: no perfect matching"}, 0.0, 0});
        return true;
    }
    if (t.c_nodes > static_cast<std::uint64_t>(kFullChainLimit)) {
        trace.status = "too_large";
        trace.steps.push_back(
            {"build", {"c=" + std::to_string(t.c_nodes) + " exceeds " + std::to_string(kFullChainLimit)}, 0.0, 0});
        return true;
    }
    return false;
}

ProtocolTrace run_exact(const SubgraphTarget& t, const ProtocolOptions& options) {
    ProtocolTrace trace;
    trace.target = t.name();
    trace.mode = Mode::exact;
    trace.c_nodes = static_cast<int>(t.c_nodes);
    if (reject_early(t, trace)) return trace;

    const int c = trace.c_nodes;
    const int n = t.n;
    const int d = static_cast<int>(t.d);
    const int start = options.start_from_larger && c + 2 <= kFullChainLimit ? c + 2 : c;
    std::vector<ReduceBranch> branches;
    if (start > c) {
        branches = reduce_kc_branches(build_kc(start));
    } else {
        branches.push_back({-1, -1, 1.0, cached_kc(c)});
    }
    StepRecord reduce{"reduce", {}, 0.0, branches.size()};
    for (const auto& b : branches) {
        reduce.probability += b.probability;
        if (b.measured_node >= 0) {
            reduce.outcomes.push_back(std::to_string(b.measured_node) + "-" + std::to_string(b.partner));
        }
    }
    trace.steps.push_back(reduce);

    double links = 0.0, accepted = 0.0, extracted = 0.0, projected = 0.0;
    double worst_fidelity = 1.0;
    std::size_t accepted_count = 0;
    std::set<std::string> patterns;
    for (const auto& b : branches) {
        const CarveResult carve = step2_carve(b.state, n, options.phase_correction);
        links += b.probability * carve.link_probability;
        const auto labels = kept_labels(b.state, n);
        const SparseState target = target_state(t.pattern, labels);
        for (const auto& br : carve.branches) {
            if (!br.accepted) continue;
            ++accepted_count;
            patterns.insert(fmt_outcomes(br.outcomes));
            const double w = b.probability * carve.link_probability * br.probability;
            accepted += w;
            const ExtractResult ex = step3_extract_ghz(br.state, n, d);
            if (!ex.state) continue;
            extracted += w * ex.probability;
            const ProjectResult pr = step4_project(*ex.state, t.pattern);
            if (!pr.state) continue;
            projected += w * ex.probability * pr.probability;
            const double fid = fidelity(*pr.state, target);
            worst_fidelity = std::min(worst_fidelity, fid);
            if (!trace.final_state) trace.final_state = *pr.state;
        }
    }
    const auto ratio = [](double a, double b) { return b > 0.0 ? a / b : 0.0; };
    trace.steps.push_back({"step2_links", {}, ratio(links, reduce.probability), branches.size()});
    trace.steps.push_back(
        {"step2_fourier", std::vector<std::string>(patterns.begin(), patterns.end()), ratio(accepted, links), accepted_count});
    trace.steps.push_back({"step3", {"k=" + fmt_outcomes(step3_pattern(n, d))}, ratio(extracted, accepted), 1});
    trace.steps.push_back({"step4", {"A"}, ratio(projected, extracted), 1});
    trace.p_F = projected;
    trace.success = projected > 0.0 && trace.final_state.has_value();
    trace.fidelity = trace.success ? worst_fidelity : 0.0;
    trace.status = trace.success ? "success" : "failed";
    return trace;
}

ProtocolTrace run_sampled(const SubgraphTarget& t, const ProtocolOptions& options) {
    ProtocolTrace trace;
    trace.target = t.name();
    trace.mode = Mode::sampled;
    trace.c_nodes = static_cast<int>(t.c_nodes);
    if (reject_early(t, trace)) return trace;

    const int c = trace.c_nodes;
    const PolicyEntry& policy = cached_policy(t);
    trace.p_F = policy.p_F;
    Rng rng(derive_seed(options.seed, "protocol-run", 0));

    const double cc = options.harvest_c_coeff > 0.0 ? options.harvest_c_coeff : 2.0 * c;
    HarvestResult h;
    int attempts = 0;
    while (attempts < options.max_harvest_attempts) {
        h = step1_harvest(options.harvest_N, options.harvest_z, cc, c,
                          derive_seed(options.seed, "protocol-harvest", static_cast<std::uint64_t>(attempts)));
        ++attempts;
        if (h.success) break;
    }
    StepRecord harvest{"harvest",
                       {"attempts=" + std::to_string(attempts), "harvested=" + std::to_string(h.harvested),
                        "reductions=" + std::to_string(h.reductions)},
                       h.success ? 1.0 / attempts : 0.0,
                       1};
    trace.steps.push_back(harvest);
    if (!h.success) {
        trace.status = "failed:harvest";
        return trace;
    }
    trace.steps.push_back({"reduce", {"choices=" + fmt_outcomes(h.reduce_choices)}, 1.0, h.reduce_choices.size()});

    sample_chain(t, cached_kc(c), policy.accepted, options.phase_correction, rng, trace);
    return trace;
}

}  // namespace

ProtocolTrace run_full_protocol(const SubgraphTarget& t, const ProtocolOptions& options) {
    return options.mode == Mode::exact ? run_exact(t, options) : run_sampled(t, options);
}

std::vector<ProtocolTrace> run_sampled_protocols(const SubgraphTarget& t, const ProtocolOptions& options, int runs,
                                                 unsigned threads) {
    if (runs < 0) {
        throw std::invalid_argument("run_sampled_protocols: runs must be non-negative");
    }
    if (t.c_nodes % 2 == 0 && t.c_nodes <= static_cast<std::uint64_t>(kFullChainLimit)) cached_policy(t);
    std::vector<ProtocolTrace> out(static_cast<std::size_t>(runs));
    parallel_for(out.size(), threads, [&](std::size_t r) {
        ProtocolOptions o = options;
        o.mode = Mode::sampled;
        o.seed = derive_seed(options.seed, "protocol", r);
        out[r] = run_sampled(t, o);
    });
    return out;
}

const std::set<std::vector<int>>& step2_policy(const SubgraphTarget& t) { return cached_policy(t).accepted; }

double pure_success_probability(const SubgraphTarget& t) { return cached_policy(t).p_F; }

void sample_chain(const SubgraphTarget& t, const MatchingState& k, const std::set<std::vector<int>>& accepted,
                  bool phase_correction, Rng& rng, ProtocolTrace& trace) {
    const int c = k.c_nodes();
    const int n = t.n;
    const int d = static_cast<int>(t.d);
    const auto fail = [&](const std::string& step) {
        trace.status = "failed:" + step;
        trace.success = false;
    };
    const CarveLinks links = carve_links(k, n);
    const bool links_ok = uniform01(rng) < links.probability;
    trace.steps.push_back(
        {"step2_links", {links_ok ? "all 00" : "link found"}, links_ok ? links.probability : 1.0 - links.probability, 1});
    if (!links_ok) return fail("step2_links");

    SparseState s = relabel_kc(*links.state);
    std::vector<int> outcomes;
    double p_pattern = 1.0;
    for (int j = n; j < c; ++j) {
        const auto records = measure(s, fourier_measurement(node_label(k.nodes[static_cast<std::size_t>(j)]), c - 1));
        std::vector<double> w;
        for (const auto& r : records) w.push_back(r.probability);
        const std::size_t pick = draw(w, rng);
        outcomes.push_back(static_cast<int>(pick) + 1);
        p_pattern *= records[pick].probability;
        s = *records[pick].post_state;
    }
    trace.steps.push_back({"step2_fourier", {"k=" + fmt_outcomes(outcomes)}, p_pattern, 1});
    if (accepted.count(outcomes) == 0) return fail("step2_fourier");
    s = apply_carve_correction(s, k, n, outcomes, phase_correction).normalized();

    const auto labels = s.reg().labels();
    const auto pattern = step3_pattern(n, d);
    std::vector<int> drawn;
    double p3 = 1.0;
    std::map<std::string, std::string> rename;
    for (int i = 0; i < n; ++i) {
        const auto& l = labels[static_cast<std::size_t>(i)];
        s = split_site(s, l, d);
        const auto records = measure(s, fourier_measurement(l + ".1", d));
        std::vector<double> w;
        for (const auto& r : records) w.push_back(r.probability);
        const std::size_t pick = draw(w, rng);
        drawn.push_back(static_cast<int>(pick) + 1);
        p3 *= records[pick].probability;
        s = *records[pick].post_state;
        rename[l + ".0"] = l;
        if (drawn.back() != pattern[static_cast<std::size_t>(i)]) break;
    }
    trace.steps.push_back({"step3", {"k=" + fmt_outcomes(drawn)}, p3, 1});
    if (drawn != pattern) return fail("step3");
    s = relabel_sites(s, rename);

    std::vector<std::string> marks;
    double p4 = 1.0;
    bool step4_ok = true;
    for (int j = 0; j < n && step4_ok; ++j) {
        const auto records = measure(s, step4_elements(t.pattern, j, labels[static_cast<std::size_t>(j)]));
        const std::size_t pick = draw({records[0].probability, records[1].probability}, rng);
        p4 *= records[pick].probability;
        marks.push_back(pick == 0 ? "A" : "fail");
        s = *records[pick].post_state;
        step4_ok = pick == 0;
    }
    trace.steps.push_back({"step4", marks, p4, 1});
    if (!step4_ok) return fail("step4");

    trace.fidelity = fidelity(s, target_state(t.pattern, labels));
    trace.final_state = std::move(s);
    trace.success = true;
    trace.status = "success";
}

std::uint64_t repetitions_needed(double p_F, double eps_fail) {
    if (!(p_F > 0.0) || p_F > 1.0 || !(eps_fail > 0.0) || eps_fail >= 1.0) {
        throw std::invalid_argument("repetitions: need 0 < p_F <= 1 and 0 < eps_fail < 1");
    }
    if (p_F >= 1.0) return 1;
    const double q = 1.0 - p_F;
    auto L = static_cast<std::uint64_t>(std::max(1.0, std::ceil(std::log(eps_fail) / std::log(q))));
    while (std::pow(q, static_cast<double>(L)) > eps_fail) ++L;
    while (L > 1 && std::pow(q, static_cast<double>(L - 1)) <= eps_fail) --L;
    return L;
}

AmplificationPlan amplification_plan(std::uint64_t N, double p_F, double eps_fail) {
    AmplificationPlan plan;
    plan.N = N;
    plan.p_F = p_F;
    plan.eps_fail = eps_fail;
    plan.L = repetitions_needed(p_F, eps_fail);
    plan.feasible = plan.L <= N;
    if (plan.feasible) {
        plan.set_size = N / plan.L;
        const std::uint64_t big = N % plan.L;
        const auto pairs = [](std::uint64_t s) { return s * (s == 0 ? 0 : s - 1) / 2; };
        const std::uint64_t inside = big * pairs(plan.set_size + 1) + (plan.L - big) * pairs(plan.set_size);
        plan.discarded_links = pairs(N) - inside;
    }
    return plan;
}

const char* mode_name(Mode m) { return m == Mode::exact ? "exact" : "sampled"; }

nlohmann::ordered_json to_json(const ProtocolTrace& t, bool include_state) {
    nlohmann::ordered_json j;
    j["target"] = t.target;
    j["mode"] = mode_name(t.mode);
    j["c"] = t.c_nodes;
    j["status"] = t.status;
    j["success"] = t.success;
    j["p_F"] = t.p_F;
    j["fidelity"] = t.fidelity;
    j["steps"] = nlohmann::ordered_json::array();
    for (const auto& s : t.steps) {
        nlohmann::ordered_json js;
        js["step"] = s.step;
        js["probability"] = s.probability;
        js["branches"] = s.branches;
        js["outcomes"] = s.outcomes;
        j["steps"].push_back(js);
    }
    if (include_state && t.final_state) j["final_state"] = to_json(*t.final_state);
    return j;
}

nlohmann::ordered_json to_json(const AmplificationPlan& p) {
    nlohmann::ordered_json j;
    j["N"] = p.N;
    j["p_F"] = p.p_F;
    j["eps_fail"] = p.eps_fail;
    j["L"] = p.L;
    j["set_size"] = p.set_size;
    j["discarded_links"] = p.discarded_links;
    j["feasible"] = p.feasible;
    return j;
}

}  // namespace qnet
