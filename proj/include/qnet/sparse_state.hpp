#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace qnet {

using Amplitude = std::complex<double>;
/// One local level per site. Levels are 1-based: a site of dimension d takes
/// values 1..d. Qubit |0> is level 1 and |1> is level 2.
using Index = std::vector<std::uint16_t>;

/// Amplitudes below this magnitude are dropped after every operation.
inline constexpr double kPruneThreshold = 1e-13;

struct Site {
    std::string label;
    int dim = 2;

    friend bool operator==(const Site&, const Site&) = default;
};

/// Ordered list of labelled sites with their local dimensions.
class QuditRegister {
  public:
    QuditRegister() = default;
    /// Labels must be unique and dimensions >= 1. A one-level site only shows
    /// up for the degenerate two-node matching state.
    explicit QuditRegister(std::vector<Site> sites);

    std::size_t size() const { return sites_.size(); }
    bool empty() const { return sites_.empty(); }
    const std::vector<Site>& sites() const { return sites_; }
    const Site& operator[](std::size_t i) const { return sites_[i]; }
    std::optional<std::size_t> find(const std::string& label) const;
    /// Like find, but throws std::invalid_argument for unknown labels.
    std::size_t position(const std::string& label) const;
    std::vector<std::string> labels() const;
    /// Product of local dimensions as a double (may exceed 2^64).
    double total_dimension() const;

    friend bool operator==(const QuditRegister&, const QuditRegister&) = default;

  private:
    std::vector<Site> sites_;
};

/// Sparse ket over a QuditRegister. Amplitudes are kept in lexicographic
/// index order, which makes iteration and serialization deterministic.
///
/// Operations never modify their inputs. States produced by the named
/// constructors and by measurement post-states have unit norm; linear
/// combinations built with add_term/axpy are left unnormalized.
class SparseState {
  public:
    using Terms = std::map<Index, Amplitude>;

    SparseState() = default;
    explicit SparseState(QuditRegister reg) : reg_(std::move(reg)) {}

    static SparseState basis(QuditRegister reg, Index idx);

    const QuditRegister& reg() const { return reg_; }
    const Terms& terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }
    bool empty() const { return terms_.empty(); }

    Amplitude amplitude(const Index& idx) const;
    double norm2() const;

    /// Accumulates `value` onto idx. Validates arity and level ranges.
    void add_term(const Index& idx, Amplitude value);
    void prune(double threshold = kPruneThreshold);

    SparseState normalized() const;
    SparseState scaled(Amplitude factor) const;
    /// this + factor * other on an identical register.
    SparseState axpy(Amplitude factor, const SparseState& other) const;

  private:
    QuditRegister reg_;
    Terms terms_;
};

/// Linear map from a group of sites onto a (possibly empty) group of output
/// sites. Output sites take the place of the first acted-on site in register
/// order; an empty output list contracts the sites away (a bra).
/// Input configurations missing from `action` are annihilated.
struct MeasurementElement {
    using Column = std::vector<std::pair<Index, Amplitude>>;

    std::string label;
    std::vector<std::string> acts_on;
    std::vector<Site> outputs;
    std::map<Index, Column> action;  // local input index (acts_on order) -> output terms
};

struct OutcomeRecord {
    std::string label;
    double probability = 0.0;               // ||K psi||^2
    std::optional<SparseState> post_state;  // K psi / ||K psi||; empty when impossible

    bool possible() const { return post_state.has_value(); }
};

/// e^{2 pi i m / d}, taken from one shared table per d.
Amplitude root_of_unity(int d, long long m);

SparseState tensor(const SparseState& a, const SparseState& b);

/// Unnormalized K psi. Input need not be normalized.
SparseState apply_map(const SparseState& s, const MeasurementElement& e);
OutcomeRecord apply_element(const SparseState& s, const MeasurementElement& e);
std::vector<OutcomeRecord> measure(const SparseState& s, std::span<const MeasurementElement> elements);

/// max |(sum_e K_e^dagger K_e - 1)_{ij}| on the acted-on space. The elements
/// must act on the same sites with dimensions `input_dims`.
double completeness_error(std::span<const MeasurementElement> elements, std::span<const int> input_dims);

/// Computational-basis projectors {|j><j|} for one site.
std::vector<MeasurementElement> computational_measurement(const Site& site);

/// Single-site Fourier vector |Phi_1^{k,d}>, amplitudes e^{2 pi i jk/d}/sqrt(d).
SparseState fourier_vector(int k, int d, const std::string& label = "s0");
/// Bra <Phi_1^{k,d}| on one site (contracts the site away).
MeasurementElement fourier_bra(const std::string& site, int k, int d);
/// Complete Fourier-basis measurement {<Phi_1^{k,d}|}_{k=1..d}.
std::vector<MeasurementElement> fourier_measurement(const std::string& site, int d);

/// |Phi_n^{k,d}> on the given sites (n = labels.size()).
SparseState ghz_state(int k, int d, std::span<const std::string> labels);
/// Convenience overload labelling sites s0..s{n-1}.
SparseState ghz_state(int n, int k, int d);

/// Replaces a site of dimension d^2 by two d-level sites `label.0`, `label.1`
/// with j = (j1 - 1) d + j2.
SparseState split_site(const SparseState& s, const std::string& label, int d);
/// Inverse of split_site; the merged site takes `merged_label`.
SparseState merge_sites(const SparseState& s, const std::string& first, const std::string& second,
                        const std::string& merged_label);

/// <a|b>; registers must match exactly.
Amplitude inner(const SparseState& a, const SparseState& b);
/// |<a|b>|^2 / (||a||^2 ||b||^2); registers must match exactly.
double fidelity(const SparseState& a, const SparseState& b);

/// Same state with sites reordered to `labels` (a permutation of the register).
SparseState reorder(const SparseState& s, std::span<const std::string> labels);
/// Renames sites; `mapping` pairs old label -> new label.
SparseState relabel_sites(const SparseState& s, const std::map<std::string, std::string>& mapping);

/// Removes sites that hold the same level in every term (a product factor).
/// Throws std::invalid_argument if one of them is not in a definite level.
SparseState factor_out(const SparseState& s, std::span<const std::string> labels);

/// Amplitude-wise maximum difference over the union of supports.
double max_amplitude_error(const SparseState& a, const SparseState& b);

/// Debug dump: list of {indices, re, im} in lexicographic index order.
nlohmann::ordered_json to_json(const SparseState& s);

}  // namespace qnet
