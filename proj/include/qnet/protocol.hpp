#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qnet/graph.hpp"
#include "qnet/rng.hpp"
#include "qnet/sparse_state.hpp"

namespace qnet {

/// (c-1)!! for even c; 1 for c <= 0.
std::uint64_t double_factorial(int c);

/// Colour in 1..c-1 of the pair of node positions (i, j) in the round-robin
/// 1-factorization of K_c: pairs of equal colour form a perfect matching.
int matching_color(int i, int j, int c);

/// Label of the qudit that holds node `node` after relabelling.
std::string node_label(int node);

/// Uniform superposition of all perfect matchings of the nodes in `nodes`,
/// stored on the c(c-1) link qubits q{a}.{b} in node-major order. Node
/// positions in `nodes` fix the colouring used by relabel_kc.
struct MatchingState {
    std::vector<int> nodes;
    SparseState native;

    int c_nodes() const { return static_cast<int>(nodes.size()); }
};

/// Every perfect matching of c positions as a partner table, in
/// lexicographic order of the pairing choices.
std::vector<std::vector<int>> perfect_matchings(int c);

/// Normalized uniform superposition of the given matchings (partner tables
/// over positions) on the native link qubits of `nodes`.
SparseState matching_superposition(std::span<const int> nodes, std::span<const std::vector<int>> matchings);

/// |K_c> on nodes 0..c-1 (or the given node ids). Throws for odd or
/// non-positive c.
MatchingState build_kc(int c);
MatchingState build_kc(std::span<const int> nodes);

/// Per-node local map that rewrites the node's c-1 qubits as one (c-1)-level
/// qudit holding the colour of its partner. Configurations that are not
/// one-hot are annihilated.
MeasurementElement relabel_element(const MatchingState& m, int position);

/// Applies relabel_element at every node: sites v{a} of dimension c-1.
SparseState relabel_kc(const MatchingState& m);

struct ReduceBranch {
    int measured_node = 0;
    int partner = 0;
    double probability = 0.0;
    MatchingState state;
};

/// The last node measures which of its links carries the pair; both matched
/// nodes drop out, leaving |K_{c-2}> on the rest. One branch per partner.
std::vector<ReduceBranch> reduce_kc_branches(const MatchingState& m);
ReduceBranch reduce_kc(const MatchingState& m, Rng& rng);

struct HarvestResult {
    bool success = false;
    int harvested = 0;  // nodes in isolated edges of G(N, p/2)
    int target_c = 0;
    int reductions = 0;
    std::vector<int> reduce_choices;  // partner position drawn at each reduction
};

/// Samples G(N, p/2) with p = 2 c_coeff N^z, collects the nodes of isolated
/// edges and draws the reductions down to target_c nodes.
HarvestResult step1_harvest(int N, double z, double c_coeff, int target_c, std::uint64_t seed);

/// Target of the protocol together with its derived sizes.
struct SubgraphTarget {
    SubgraphPattern pattern;
    int n = 0;
    int l = 0;
    std::uint64_t d = 0;  // 2^l
    std::uint64_t D = 0;  // d^2
    std::uint64_t c_nodes = 0;

    std::string name() const { return pattern.name; }
};

SubgraphTarget make_target(const SubgraphPattern& f);

/// Normalized sum over pairwise-distinct (i_1..i_n) in [1, D]^n.
SparseState ket_d(int n, int D, std::span<const std::string> labels);
SparseState ket_d(int n, int D);

struct CarveLinks {
    double probability = 0.0;  // all kept-kept links found in |00>
    std::optional<MatchingState> state;
};

/// Projects the links between the first n nodes onto |00>.
CarveLinks carve_links(const MatchingState& m, int n);

/// Kept node at `position` moves from colour to D-node index, with the phase
/// that undoes the Fourier outcomes k (one per D-node, in position order).
MeasurementElement carve_correction(const MatchingState& m, int n, int position, std::span<const int> k,
                                    bool phase_correction);

/// Applies the corrections of every kept node.
SparseState apply_carve_correction(const SparseState& s, const MatchingState& m, int n, std::span<const int> k,
                                   bool phase_correction);

struct CarveBranch {
    std::vector<int> outcomes;  // Fourier outcome of each D-node
    double probability = 0.0;   // conditional on carve_links success
    double fidelity = 0.0;      // with ket_d after correction
    bool accepted = false;
    SparseState state;  // corrected kept-node state
};

struct CarveResult {
    std::vector<int> kept;
    double link_probability = 0.0;
    double accepted_probability = 0.0;  // conditional on link success
    std::vector<CarveBranch> branches;  // every possible outcome pattern

    std::set<std::vector<int>> accepted_patterns() const;
};

inline constexpr double kAcceptFidelity = 1.0 - 1e-9;

/// Exact step 2 on a matching state: link projection, Fourier measurement of
/// the D = c - n other nodes and the local correction. A pattern is accepted
/// when the corrected state is |D> up to global phase.
CarveResult step2_carve(const MatchingState& m, int n, bool phase_correction = true);

/// One term of the set-partition expansion of |D>: all set partitions with
/// block sizes `parts` share the Moebius weight prod (-1)^{|B|-1} (|B|-1)!.
struct PartitionTerm {
    std::vector<int> parts;
    long long weight = 0;
    std::vector<std::vector<std::vector<int>>> placements;
    SparseState state;  // sum over placements of prod_B sum_i |i..i>_B, unweighted
};

std::vector<PartitionTerm> expand_partitions(int n, int D, std::span<const std::string> labels);
std::vector<PartitionTerm> expand_partitions(int n, int D);
/// sum_terms weight * state: the unnormalized |D>.
SparseState reconstruct(std::span<const PartitionTerm> terms);

/// Fourier outcomes step 3 keeps: (1, ..., 1, d - n + 1).
std::vector<int> step3_pattern(int n, int d);

/// Splits every site into two d-level halves and contracts each second half
/// with the step-3 Fourier bra. Returns the unnormalized post-selected
/// vector on the first halves, relabelled back to the original labels.
SparseState step3_cascade(const SparseState& s, int n, int d);

struct ExtractResult {
    double probability = 0.0;
    std::optional<SparseState> state;  // normalized
};

ExtractResult step3_extract_ghz(const SparseState& s, int n, int d);

/// Site labels of the qubits node j holds in |F>, one per incident edge.
std::string edge_qubit_label(const std::string& node, int edge);

/// {A_j / sqrt(d), C_j} for pattern node j on the site `label`.
std::vector<MeasurementElement> step4_elements(const SubgraphPattern& f, int j, const std::string& label);

struct ProjectResult {
    double probability = 0.0;
    std::optional<SparseState> state;
};

ProjectResult step4_project(const SparseState& ghz, const SubgraphPattern& f);

/// |F>: one |Phi+> per edge, node-major qubit order.
SparseState target_state(const SubgraphPattern& f, std::span<const std::string> node_labels);

enum class Mode { exact, sampled };

struct StepRecord {
    std::string step;
    std::vector<std::string> outcomes;
    double probability = 0.0;  // conditional on reaching this step
    std::size_t branches = 1;
};

struct ProtocolTrace {
    std::string target;
    Mode mode = Mode::exact;
    int c_nodes = 0;
    std::string status;  // success, failed:<step>, rejected, too_large
    bool success = false;
    double p_F = 0.0;
    double fidelity = 0.0;
    std::vector<StepRecord> steps;
    std::optional<SparseState> final_state;
};

/// Largest c for which the chain is materialized.
inline constexpr int kFullChainLimit = 8;

struct ProtocolOptions {
    Mode mode = Mode::exact;
    std::uint64_t seed = 0;
    bool phase_correction = true;
    /// Exact mode starts from K_{c+2} when it fits, so the reduction is part
    /// of the chain.
    bool start_from_larger = true;
    int harvest_N = 10000;
    double harvest_z = -2.0;
    double harvest_c_coeff = 0.0;  // 0 selects 2c
    int max_harvest_attempts = 10000;
};

ProtocolTrace run_full_protocol(const SubgraphTarget& t, const ProtocolOptions& options);

/// Independent sampled runs r = 0..runs-1 with seeds derived from options.seed.
std::vector<ProtocolTrace> run_sampled_protocols(const SubgraphTarget& t, const ProtocolOptions& options,
                                                 int runs, unsigned threads);

/// Step-2 patterns that yield |D> from the pure |K_c> of the target, and
/// the exact success probability of steps 2-4 from that state. Cached.
const std::set<std::vector<int>>& step2_policy(const SubgraphTarget& t);
double pure_success_probability(const SubgraphTarget& t);

/// Samples steps 2-4 on a state in matching form. Step 2 accepts exactly the
/// patterns in `accepted`. Appends step records and sets the outcome fields
/// of `trace`.
void sample_chain(const SubgraphTarget& t, const MatchingState& m, const std::set<std::vector<int>>& accepted,
                  bool phase_correction, Rng& rng, ProtocolTrace& trace);

struct AmplificationPlan {
    std::uint64_t N = 0;
    double p_F = 0.0;
    double eps_fail = 0.0;
    std::uint64_t L = 0;  // number of disjoint node sets
    std::uint64_t set_size = 0;
    std::uint64_t discarded_links = 0;  // links between different sets
    bool feasible = false;              // L <= N
};

/// Smallest L with (1 - p_F)^L <= eps_fail.
std::uint64_t repetitions_needed(double p_F, double eps_fail);
AmplificationPlan amplification_plan(std::uint64_t N, double p_F, double eps_fail);

const char* mode_name(Mode m);
nlohmann::ordered_json to_json(const ProtocolTrace& t, bool include_state = false);
nlohmann::ordered_json to_json(const AmplificationPlan& p);

}  // namespace qnet
