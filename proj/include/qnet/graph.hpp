#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qnet/rng.hpp"

namespace qnet {

using Edge = std::pair<int, int>;

/// Simple undirected graph. Edges are stored normalized (first < second),
/// sorted and unique; adjacency lists are sorted.
class Graph {
  public:
    Graph() = default;
    /// Throws std::invalid_argument on self-loops or out-of-range endpoints.
    /// Duplicate edges (in either orientation) are rejected as well.
    Graph(int node_count, std::vector<Edge> edges);

    int node_count() const { return node_count_; }
    std::size_t edge_count() const { return edges_.size(); }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<int>& neighbors(int v) const { return adjacency_[static_cast<std::size_t>(v)]; }
    int degree(int v) const { return static_cast<int>(neighbors(v).size()); }
    bool has_edge(int a, int b) const;

    static Graph complete(int node_count);
    static Graph cycle(int node_count);

  private:
    int node_count_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::vector<int>> adjacency_;
};

/// Target subgraph F = (V, E): connected, node labels 0..n-1.
struct SubgraphPattern {
    std::string name;
    int n = 0;
    std::vector<Edge> edges;

    int l() const { return static_cast<int>(edges.size()); }
    Graph as_graph() const { return Graph(n, edges); }
};

/// Validates connectivity and edge sanity. Throws std::invalid_argument.
SubgraphPattern make_pattern(std::string name, int n, std::vector<Edge> edges);

/// edge, path3, path4, triangle, square, k4, or custom:<a-b,c-d,...>.
SubgraphPattern pattern_by_name(const std::string& spec);

/// Names accepted by pattern_by_name besides the custom form.
std::span<const char* const> standard_pattern_names();

struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    friend bool operator==(const Rational&, const Rational&) = default;
};

/// -n/l in lowest terms; throws std::domain_error when l == 0.
Rational critical_exponent(const SubgraphPattern& f);

/// p = c_coeff * N^z for classical sweeps, and p = 2 c_coeff N^z for the
/// quantum link parameter. Both are clamped to [0, 1].
struct ScalingLaw {
    double z = -2.0;
    double c_coeff = 1.0;

    double classical_p(double n) const;
    double quantum_p(double n) const;
};

/// Node pair together with the uniform variate that decided it. Graphs at
/// any p <= p_cap are the prefixes with u < p, which gives a monotone
/// coupling across p for one seed.
struct CoupledEdge {
    double u;
    int a;
    int b;
};

/// Per-pair threshold at which each pair first appears.
struct EdgeField {
    int node_count = 0;
    double p_cap = 0.0;
    std::vector<CoupledEdge> edges;  // sorted by u

    Graph graph_at(double p) const;
    std::size_t count_below(double p) const;
};

/// Largest N that is sampled with one Bernoulli draw per pair; larger graphs
/// use geometric skipping.
inline constexpr int kPerPairSamplingLimit = 1 << 10;

EdgeField sample_edge_field(int node_count, double p_cap, std::uint64_t seed);

/// G(N, p). Deterministic given seed; for N <= kPerPairSamplingLimit the
/// result for p1 <= p2 is an edge subset of the result for p2.
Graph sample_gnp(int node_count, double p, std::uint64_t seed);

/// True iff g has a (not necessarily induced) subgraph isomorphic to f.
bool contains_subgraph(const Graph& g, const SubgraphPattern& f);

struct SweepRow {
    int N = 0;
    double z = 0.0;
    double p = 0.0;
    int trials = 0;
    int hits = 0;
    double fraction = 0.0;
};

struct SweepResult {
    SubgraphPattern pattern;
    double c_coeff = 1.0;
    std::vector<SweepRow> rows;

    /// Rows for one N in ascending z.
    std::vector<SweepRow> rows_for(int N) const;
};

struct SweepConfig {
    std::vector<int> Ns;
    std::vector<double> zs;
    double c_coeff = 1.0;
    int trials = 200;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Hit fractions of f over the (N, z) grid. Trial t at size N uses one
/// coupled edge field for every z, so fractions are non-decreasing in z.
SweepResult threshold_sweep(const SubgraphPattern& f, const SweepConfig& config);

/// z grid from z_min to z_max (inclusive, within half a step) in steps of z_step.
std::vector<double> z_grid(double z_min, double z_max, double z_step);

/// Linear interpolation of the first upward crossing of `level` by the
/// fraction curve. nullopt if the curve never crosses inside the grid.
std::optional<double> estimate_crossing(std::span<const SweepRow> rows, double level = 0.5);

}  // namespace qnet
