#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qnet/graph.hpp"
#include "qnet/sparse_state.hpp"

namespace qnet {

/// Link state sqrt(1 - p/2)|00> + sqrt(p/2)|11>.
struct LinkSpec {
    double p = 0.0;

    double weight_00() const { return 1.0 - p / 2.0; }
    double weight_11() const { return p / 2.0; }
};

/// Throws std::invalid_argument unless 0 <= p <= 1.
LinkSpec make_link(double p);

SparseState link_state(double p, const std::string& first = "a", const std::string& second = "b");

/// Optimal LOCC probability of turning one link into |Phi+>: twice the
/// smaller Schmidt weight, which is p itself.
double singlet_conversion_prob(double p);

/// Classical graph left after every link independently attempts the optimal
/// singlet conversion. Shares the coupling of sample_gnp, so for equal seeds
/// the two coincide.
Graph convert_links(int node_count, double p, std::uint64_t seed);

/// |<G_{N,p}|0...0>|^2 = (1 - p/2)^{N(N-1)/2}.
double vacuum_overlap(double N, double p);
/// exp(-N^{z+2}/4): large-N form of the vacuum overlap at p = N^z.
double vacuum_overlap_asymptotic(double N, double z);

struct OutcomeExpectation {
    double exact = 0.0;       // N (N-1 choose m) q^m (1-q)^{N-1-m}, q = c N^z
    double asymptotic = 0.0;  // c^m / m! * N^{m(z+1)+1}
};

/// Expected number of P_m outcomes equal to m over all N nodes at
/// p = 2 c N^z. Throws if p falls outside [0, 1].
OutcomeExpectation expected_outcome_count(double N, double z, double c_coeff, int m);

/// Histogram of P_m outcomes over the N nodes of one sample.
struct OutcomeStats {
    int N = 0;
    double p = 0.0;
    double z = 0.0;
    double c_coeff = 0.0;
    std::vector<long long> counts;  // counts[m] = x_m

    long long count(int m) const;
    long long total() const;
};

/// Per-node P_m outcomes follow the degree sequence of G(N, p/2): sample it.
OutcomeStats sample_pm_outcomes(int N, double p, std::uint64_t seed);
OutcomeStats sample_pm_outcomes_scaled(int N, double z, double c_coeff, std::uint64_t seed);

/// Nodes of degree one whose single neighbour also has degree one.
int isolated_pair_nodes(const Graph& g);

/// Label of the qubit that node `owner` holds for its link with `partner`.
std::string qubit_label(int owner, int partner);
/// The N-1 qubit labels of a node in partner order.
std::vector<std::string> node_qubits(int node, std::span<const int> nodes);

/// Largest N that is materialized as an explicit state.
inline constexpr int kMaterializeLimit = 6;

class QuantumRandomGraph {
  public:
    QuantumRandomGraph(int N, LinkSpec link) : N_(N), link_(link) {}

    /// Builds the explicit N(N-1)-qubit product state (node-major site order).
    static QuantumRandomGraph materialize(int N, double p);

    int N() const { return N_; }
    const LinkSpec& link() const { return link_; }
    bool materialized() const { return state_.has_value(); }
    const SparseState& state() const;

  private:
    int N_;
    LinkSpec link_;
    std::optional<SparseState> state_;
};

/// Complete set {P_m}_{m=0..N-1} on the given qubits: projector onto
/// configurations with exactly m qubits in |1>.
std::vector<MeasurementElement> pm_elements(std::span<const std::string> qubits);

/// Applies {P_m} to one node of a materialized graph.
std::vector<OutcomeRecord> apply_pm_exact(const QuantumRandomGraph& g, int node);

/// Exact joint distribution of P_m outcomes when nodes are measured in `order`.
std::map<std::vector<int>, double> pm_joint_distribution(const QuantumRandomGraph& g, std::span<const int> order);

}  // namespace qnet
