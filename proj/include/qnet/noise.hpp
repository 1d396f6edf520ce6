#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qnet/protocol.hpp"
#include "qnet/sparse_state.hpp"

namespace qnet {

/// Link source that emits |phi(p)> with probability 1 - eps and |00>
/// otherwise: rho = (1 - eps)|phi><phi| + eps|00><00|.
struct MixedLink {
    double p = 0.0;
    double eps = 0.0;
};

struct EnsembleComponent {
    double weight = 0.0;
    SparseState state;  // unit norm
    std::string tag;
};

/// Density operator sum_i w_i |psi_i><psi_i|.
struct PureEnsemble {
    std::vector<EnsembleComponent> components;
    double pruned_mass = 0.0;  // weight of dropped components

    double total_weight() const;
    std::size_t size() const { return components.size(); }
};

/// Components lighter than this are dropped and their weight is reported.
inline constexpr double kComponentFloor = 1e-14;

PureEnsemble mixed_link(double p, double eps);
PureEnsemble mixed_link(const MixedLink& link);

/// Post-selected matching state built from mixed links (infinite-N limit).
/// A partial matching T of t links known to be present is a component
/// |T> (x) |K_{c-2t}> with weight (c-2t-1)!! u^{c/2-t} (1-u)^t / (c-1)!!,
/// u = 1 - eps. Components with the same state are merged; the first one is
/// |K_c> with weight (1 - eps)^{c/2}. States are in native link-qubit form
/// on nodes 0..c-1.
PureEnsemble build_kc_noisy(int c, double eps);

/// <M|rho|M'> of the ensemble for perfect matchings M, M' (matrix indexed in
/// perfect_matchings order).
std::vector<std::vector<double>> matching_density(const PureEnsemble& e, int c);

/// Harvest constant that keeps the expected number of isolated pairs when
/// links fail with probability eps.
double adjusted_c_coeff(double c_coeff, double eps);

/// Smallest r with (1 - x)^r <= eps_fail; throws unless 0 < x <= 1.
std::uint64_t retry_budget(double x, double eps_fail);

struct NoisyReport {
    std::string target;
    Mode mode = Mode::exact;
    double eps = 0.0;
    double x_theory = 0.0;          // (1 - eps)^{c/2}
    double x_measured = 0.0;        // weight on |F> relative to the pure success probability
    std::optional<std::uint64_t> retry_budget;
    double pruned_mass = 0.0;
    double p_pure = 0.0;            // success probability of steps 2-4 from |K_c>
    double success_mass = 0.0;      // probability that steps 2-4 report success
    double f_mass = 0.0;            // part of success_mass that ends in |F>
    double conditional_f_weight = 0.0;  // f_mass / success_mass
    double repetitions = 0.0;       // 1 / x_measured
    double c_coeff_adjusted = 0.0;
    std::size_t components = 0;
    int runs = 0;                   // sampled mode only
    PureEnsemble final;             // successful branches, weights normalized
};

struct NoisyOptions {
    Mode mode = Mode::exact;
    std::uint64_t seed = 0;
    int runs = 1000;
    unsigned threads = 1;
    double eps_fail = 1e-3;
    double harvest_c_coeff = 0.0;  // 0 selects 2c
};

/// Propagates every ensemble component through steps 2-4 with the step-2
/// patterns accepted for the pure state. Exact mode follows every branch;
/// sampled mode draws components and outcomes.
NoisyReport run_protocol_noisy(const SubgraphTarget& t, double eps, const NoisyOptions& options);

nlohmann::ordered_json to_json(const NoisyReport& r);

}  // namespace qnet
