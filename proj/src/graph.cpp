#include "qnet/graph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace qnet {

Graph::Graph(int node_count, std::vector<Edge> edges) : node_count_(node_count) {
    if (node_count < 0) {
        throw std::invalid_argument("graph: negative node count");
    }
    for (auto& [a, b] : edges) {
        if (a == b) {
            throw std::invalid_argument("graph: self-loop at node " + std::to_string(a));
        }
        if (a < 0 || b < 0 || a >= node_count || b >= node_count) {
            throw std::invalid_argument("graph: endpoint out of range");
        }
        if (a > b) {
            std::swap(a, b);
        }
    }
    std::sort(edges.begin(), edges.end());
    if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
        throw std::invalid_argument("graph: duplicate edge");
    }
    edges_ = std::move(edges);
    adjacency_.assign(static_cast<std::size_t>(node_count), {});
    for (const auto& [a, b] : edges_) {
        adjacency_[static_cast<std::size_t>(a)].push_back(b);
        adjacency_[static_cast<std::size_t>(b)].push_back(a);
    }
    for (auto& list : adjacency_) {
        std::sort(list.begin(), list.end());
    }
}

bool Graph::has_edge(int a, int b) const {
    const auto& list = neighbors(a);
    return std::binary_search(list.begin(), list.end(), b);
}

Graph Graph::complete(int node_count) {
    std::vector<Edge> edges;
    for (int a = 0; a < node_count; ++a) {
        for (int b = a + 1; b < node_count; ++b) {
            edges.emplace_back(a, b);
        }
    }
    return Graph(node_count, std::move(edges));
}

Graph Graph::cycle(int node_count) {
    std::vector<Edge> edges;
    for (int a = 0; a < node_count; ++a) {
        edges.emplace_back(a, (a + 1) % node_count);
    }
    return Graph(node_count, std::move(edges));
}

SubgraphPattern make_pattern(std::string name, int n, std::vector<Edge> edges) {
    if (n < 1) {
        throw std::invalid_argument("pattern: needs at least one node");
    }
    const Graph g(n, edges);  // validates loops, ranges, duplicates
    std::vector<int> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int reached = 1;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int w : g.neighbors(v)) {
            if (!seen[static_cast<std::size_t>(w)]) {
                seen[static_cast<std::size_t>(w)] = 1;
                ++reached;
                stack.push_back(w);
            }
        }
    }
    if (reached != n) {
        throw std::invalid_argument("pattern '" + name + "' is not connected");
    }
    return SubgraphPattern{std::move(name), n, g.edges()};
}

namespace {

constexpr std::array<const char*, 6> kStandardNames = {"edge", "path3", "path4", "triangle", "square", "k4"};

SubgraphPattern parse_custom(const std::string& body) {
    std::vector<Edge> edges;
    int n = 0;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto dash = item.find('-');
        if (dash == std::string::npos) {
            throw std::invalid_argument("custom pattern: expected a-b, got '" + item + "'");
        }
        std::size_t used_a = 0;
        std::size_t used_b = 0;
        int a = 0;
        int b = 0;
        const std::string sa = item.substr(0, dash);
        const std::string sb = item.substr(dash + 1);
        try {
            a = std::stoi(sa, &used_a);
            b = std::stoi(sb, &used_b);
        } catch (const std::exception&) {
            throw std::invalid_argument("custom pattern: bad edge '" + item + "'");
        }
        if (used_a != sa.size() || used_b != sb.size() || a < 0 || b < 0) {
            throw std::invalid_argument("custom pattern: bad edge '" + item + "'");
        }
        edges.emplace_back(a, b);
        n = std::max({n, a + 1, b + 1});
    }
    if (edges.empty()) {
        throw std::invalid_argument("custom pattern: empty edge list");
    }
    return make_pattern("custom:" + body, n, std::move(edges));
}

}  // namespace

std::span<const char* const> standard_pattern_names() { return kStandardNames; }

SubgraphPattern pattern_by_name(const std::string& spec) {
    if (spec == "edge") return make_pattern(spec, 2, {{0, 1}});
    if (spec == "path3") return make_pattern(spec, 3, {{0, 1}, {1, 2}});
    if (spec == "path4") return make_pattern(spec, 4, {{0, 1}, {1, 2}, {2, 3}});
    if (spec == "triangle") return make_pattern(spec, 3, {{0, 1}, {0, 2}, {1, 2}});
    if (spec == "square") return make_pattern(spec, 4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
    if (spec == "k4") return make_pattern(spec, 4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
    if (spec.rfind("custom:", 0) == 0) {
        return parse_custom(spec.substr(7));
    }
    throw std::invalid_argument("unknown pattern '" + spec + "'");
}

Rational critical_exponent(const SubgraphPattern& f) {
    if (f.l() == 0) {
        throw std::domain_error("critical exponent undefined for a pattern without edges");
    }
    const std::int64_t g = std::gcd<std::int64_t, std::int64_t>(f.n, f.l());
    return Rational{-f.n / g, f.l() / g};
}

double ScalingLaw::classical_p(double n) const { return std::clamp(c_coeff * std::pow(n, z), 0.0, 1.0); }

double ScalingLaw::quantum_p(double n) const { return std::clamp(2.0 * c_coeff * std::pow(n, z), 0.0, 1.0); }

std::size_t EdgeField::count_below(double p) const {
    const auto it = std::partition_point(edges.begin(), edges.end(), [p](const CoupledEdge& e) { return e.u < p; });
    return static_cast<std::size_t>(it - edges.begin());
}

Graph EdgeField::graph_at(double p) const {
    if (p > p_cap) {
        throw std::invalid_argument("edge field: p exceeds the sampled cap");
    }
    const std::size_t count = count_below(p);
    std::vector<Edge> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.emplace_back(edges[i].a, edges[i].b);
    }
    return Graph(node_count, std::move(out));
}

EdgeField sample_edge_field(int node_count, double p_cap, std::uint64_t seed) {
    if (!(p_cap >= 0.0 && p_cap <= 1.0)) {
        throw std::invalid_argument("edge field: probability outside [0, 1]");
    }
    EdgeField field;
    field.node_count = std::max(node_count, 0);
    field.p_cap = p_cap;
    if (node_count < 2 || p_cap == 0.0) {
        return field;
    }
    Rng rng(seed);
    if (node_count <= kPerPairSamplingLimit || p_cap == 1.0) {
        for (int a = 0; a < node_count; ++a) {
            for (int b = a + 1; b < node_count; ++b) {
                const double u = uniform01(rng);
                if (u < p_cap) {
                    field.edges.push_back({u, a, b});
                }
            }
        }
    } else {
        // Geometric skipping over the row-major pair enumeration; each kept
        // pair gets u uniform on [0, p_cap) so prefixes stay G(N, p).
        const std::uint64_t n = static_cast<std::uint64_t>(node_count);
        const std::uint64_t total = n * (n - 1) / 2;
        const double log_q = std::log1p(-p_cap);
        std::uint64_t pos = 0;
        int a = 0;
        std::uint64_t row_start = 0;  // linear index of pair (a, a+1)
        while (true) {
            const double r = uniform01(rng);
            const double skip = std::floor(std::log1p(-r) / log_q);
            if (skip >= static_cast<double>(total - pos)) {
                break;
            }
            pos += static_cast<std::uint64_t>(skip);
            while (pos >= row_start + (n - 1 - static_cast<std::uint64_t>(a))) {
                row_start += n - 1 - static_cast<std::uint64_t>(a);
                ++a;
            }
            const int b = a + 1 + static_cast<int>(pos - row_start);
            field.edges.push_back({p_cap * uniform01(rng), a, b});
            ++pos;
            if (pos >= total) {
                break;
            }
        }
    }
    std::sort(field.edges.begin(), field.edges.end(), [](const CoupledEdge& x, const CoupledEdge& y) {
        return x.u < y.u || (x.u == y.u && std::tie(x.a, x.b) < std::tie(y.a, y.b));
    });
    return field;
}

Graph sample_gnp(int node_count, double p, std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("sample_gnp: probability outside [0, 1]");
    }
    if (node_count <= 0) {
        return Graph(0, {});
    }
    return sample_edge_field(node_count, p, seed).graph_at(p);
}

namespace {

struct PatternPlan {
    std::vector<int> order;                   // pattern vertices in search order
    std::vector<int> degree;                  // pattern degree, by search position
    std::vector<std::vector<int>> back_refs;  // earlier search positions adjacent to this one
};

PatternPlan plan_search(const SubgraphPattern& f) {
    const Graph pg = f.as_graph();
    PatternPlan plan;
    std::vector<int> position(static_cast<std::size_t>(f.n), -1);
    for (int step = 0; step < f.n; ++step) {
        int best = -1;
        int best_links = -1;
        for (int v = 0; v < f.n; ++v) {
            if (position[static_cast<std::size_t>(v)] >= 0) continue;
            int links = 0;
            for (int w : pg.neighbors(v)) {
                links += position[static_cast<std::size_t>(w)] >= 0 ? 1 : 0;
            }
            if (links > best_links || (links == best_links && pg.degree(v) > pg.degree(best))) {
                best = v;
                best_links = links;
            }
        }
        position[static_cast<std::size_t>(best)] = step;
        plan.order.push_back(best);
        plan.degree.push_back(pg.degree(best));
        std::vector<int> refs;
        for (int w : pg.neighbors(best)) {
            const int pos = position[static_cast<std::size_t>(w)];
            if (pos >= 0 && pos < step) refs.push_back(pos);
        }
        plan.back_refs.push_back(std::move(refs));
    }
    return plan;
}

class Matcher {
  public:
    Matcher(const Graph& g, const PatternPlan& plan)
        : g_(g), plan_(plan), image_(plan.order.size(), -1), used_(static_cast<std::size_t>(g.node_count()), 0) {}

    bool search(std::size_t k) {
        if (k == plan_.order.size()) return true;
        const auto& refs = plan_.back_refs[k];
        if (refs.empty()) {
            for (int v = 0; v < g_.node_count(); ++v) {
                if (try_place(k, v)) return true;
            }
            return false;
        }
        const int anchor = image_[static_cast<std::size_t>(refs.front())];
        for (int v : g_.neighbors(anchor)) {
            if (try_place(k, v)) return true;
        }
        return false;
    }

  private:
    bool try_place(std::size_t k, int v) {
        if (used_[static_cast<std::size_t>(v)] || g_.degree(v) < plan_.degree[k]) return false;
        const auto& refs = plan_.back_refs[k];
        for (std::size_t i = 1; i < refs.size(); ++i) {
            if (!g_.has_edge(image_[static_cast<std::size_t>(refs[i])], v)) return false;
        }
        image_[k] = v;
        used_[static_cast<std::size_t>(v)] = 1;
        if (search(k + 1)) return true;
        used_[static_cast<std::size_t>(v)] = 0;
        image_[k] = -1;
        return false;
    }

    const Graph& g_;
    const PatternPlan& plan_;
    std::vector<int> image_;
    std::vector<char> used_;
};

}  // namespace

bool contains_subgraph(const Graph& g, const SubgraphPattern& f) {
    if (f.n > g.node_count()) return false;
    if (static_cast<std::size_t>(f.l()) > g.edge_count()) return false;
    if (f.n == 0) return true;
    const PatternPlan plan = plan_search(f);
    Matcher matcher(g, plan);
    return matcher.search(0);
}

std::vector<SweepRow> SweepResult::rows_for(int N) const {
    std::vector<SweepRow> out;
    for (const auto& row : rows) {
        if (row.N == N) out.push_back(row);
    }
    std::sort(out.begin(), out.end(), [](const SweepRow& a, const SweepRow& b) { return a.z < b.z; });
    return out;
}

std::vector<double> z_grid(double z_min, double z_max, double z_step) {
    if (!(z_step > 0.0) || !(z_max >= z_min)) {
        throw std::invalid_argument("z grid: need z_step > 0 and z_max >= z_min");
    }
    const auto count = static_cast<std::size_t>(std::floor((z_max - z_min) / z_step + 0.5)) + 1;
    std::vector<double> zs;
    zs.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        // Snap to 1e-12 so printed grids do not carry accumulation noise.
        zs.push_back(std::round((z_min + static_cast<double>(i) * z_step) * 1e12) / 1e12);
    }
    return zs;
}

SweepResult threshold_sweep(const SubgraphPattern& f, const SweepConfig& config) {
    if (config.trials < 1) {
        throw std::invalid_argument("sweep: trials must be >= 1");
    }
    std::vector<double> zs = config.zs;
    std::sort(zs.begin(), zs.end());
    zs.erase(std::unique(zs.begin(), zs.end()), zs.end());

    SweepResult result{f, config.c_coeff, {}};
    for (int N : config.Ns) {
        if (N < 1) {
            throw std::invalid_argument("sweep: N must be >= 1");
        }
        std::vector<double> ps;
        for (double z : zs) {
            ps.push_back(ScalingLaw{z, config.c_coeff}.classical_p(N));
        }
        // first_hit[t] = index of the smallest grid p at which trial t contains f
        std::vector<std::size_t> first_hit(static_cast<std::size_t>(config.trials), zs.size());
        if (!zs.empty()) {
            const double p_cap = ps.back();
            parallel_for(first_hit.size(), config.threads, [&](std::size_t t) {
                const EdgeField field =
                    sample_edge_field(N, p_cap, derive_seed(config.seed, "sweep", static_cast<std::uint64_t>(N), t));
                // Containment is monotone along the coupling, so bisect the grid.
                std::size_t lo = 0;
                std::size_t hi = zs.size();
                while (lo < hi) {
                    const std::size_t mid = (lo + hi) / 2;
                    if (contains_subgraph(field.graph_at(ps[mid]), f)) {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                first_hit[t] = lo;
            });
        }
        for (std::size_t i = 0; i < zs.size(); ++i) {
            SweepRow row{N, zs[i], ps[i], config.trials, 0, 0.0};
            for (std::size_t hit : first_hit) {
                row.hits += hit <= i ? 1 : 0;
            }
            row.fraction = static_cast<double>(row.hits) / static_cast<double>(row.trials);
            result.rows.push_back(row);
        }
    }
    return result;
}

std::optional<double> estimate_crossing(std::span<const SweepRow> rows, double level) {
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        const SweepRow& a = rows[i];
        const SweepRow& b = rows[i + 1];
        if (a.fraction < level && b.fraction >= level) {
            const double t = (level - a.fraction) / (b.fraction - a.fraction);
            return a.z + t * (b.z - a.z);
        }
    }
    return std::nullopt;
}

}  // namespace qnet
