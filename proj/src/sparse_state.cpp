#include "qnet/sparse_state.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace qnet {

Amplitude root_of_unity(int d, long long m) {
    static std::mutex mutex;
    static std::unordered_map<int, std::vector<Amplitude>> tables;
    const long long r = ((m % d) + d) % d;
    std::lock_guard lock(mutex);
    auto [it, inserted] = tables.try_emplace(d);
    if (inserted) {
        it->second.reserve(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) {
            it->second.push_back(std::polar(1.0, 2.0 * std::numbers::pi * j / d));
        }
    }
    return it->second[static_cast<std::size_t>(r)];
}

namespace {

void check_levels(const QuditRegister& reg, const Index& idx) {
    if (idx.size() != reg.size()) {
        throw std::invalid_argument("state: index arity does not match register");
    }
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 1 || idx[i] > reg[i].dim) {
            throw std::invalid_argument("state: level out of range at site " + reg[i].label);
        }
    }
}

}  // namespace

QuditRegister::QuditRegister(std::vector<Site> sites) : sites_(std::move(sites)) {
    std::set<std::string> seen;
    for (const auto& s : sites_) {
        if (s.dim < 1) {
            throw std::invalid_argument("register: site '" + s.label + "' has dimension < 1");
        }
        if (!seen.insert(s.label).second) {
            throw std::invalid_argument("register: duplicate site label '" + s.label + "'");
        }
    }
}

std::optional<std::size_t> QuditRegister::find(const std::string& label) const {
    for (std::size_t i = 0; i < sites_.size(); ++i) {
        if (sites_[i].label == label) return i;
    }
    return std::nullopt;
}

std::size_t QuditRegister::position(const std::string& label) const {
    if (auto pos = find(label)) return *pos;
    throw std::invalid_argument("register: no site labelled '" + label + "'");
}

std::vector<std::string> QuditRegister::labels() const {
    std::vector<std::string> out;
    out.reserve(sites_.size());
    for (const auto& s : sites_) out.push_back(s.label);
    return out;
}

double QuditRegister::total_dimension() const {
    double total = 1.0;
    for (const auto& s : sites_) total *= s.dim;
    return total;
}

SparseState SparseState::basis(QuditRegister reg, Index idx) {
    SparseState s(std::move(reg));
    s.add_term(idx, 1.0);
    return s;
}

Amplitude SparseState::amplitude(const Index& idx) const {
    const auto it = terms_.find(idx);
    return it == terms_.end() ? Amplitude{} : it->second;
}

double SparseState::norm2() const {
    double total = 0.0;
    for (const auto& [idx, a] : terms_) total += std::norm(a);
    return total;
}

void SparseState::add_term(const Index& idx, Amplitude value) {
    check_levels(reg_, idx);
    terms_[idx] += value;
}

void SparseState::prune(double threshold) {
    std::erase_if(terms_, [threshold](const auto& kv) { return std::abs(kv.second) < threshold; });
}

SparseState SparseState::normalized() const {
    const double n2 = norm2();
    if (n2 <= 0.0) {
        throw std::domain_error("state: cannot normalize the zero vector");
    }
    return scaled(1.0 / std::sqrt(n2));
}

SparseState SparseState::scaled(Amplitude factor) const {
    SparseState out(reg_);
    for (const auto& [idx, a] : terms_) out.terms_.emplace_hint(out.terms_.end(), idx, a * factor);
    out.prune();
    return out;
}

SparseState SparseState::axpy(Amplitude factor, const SparseState& other) const {
    if (!(reg_ == other.reg_)) {
        throw std::invalid_argument("state: axpy on different registers");
    }
    SparseState out = *this;
    for (const auto& [idx, a] : other.terms_) out.terms_[idx] += factor * a;
    out.prune();
    return out;
}

SparseState tensor(const SparseState& a, const SparseState& b) {
    std::vector<Site> sites = a.reg().sites();
    sites.insert(sites.end(), b.reg().sites().begin(), b.reg().sites().end());
    SparseState out{QuditRegister(std::move(sites))};  // rejects overlapping labels
    for (const auto& [ia, va] : a.terms()) {
        for (const auto& [ib, vb] : b.terms()) {
            Index idx = ia;
            idx.insert(idx.end(), ib.begin(), ib.end());
            out.add_term(idx, va * vb);
        }
    }
    out.prune();
    return out;
}

SparseState apply_map(const SparseState& s, const MeasurementElement& e) {
    const QuditRegister& reg = s.reg();
    std::vector<std::size_t> positions;
    std::vector<char> acted(reg.size(), 0);
    for (const auto& label : e.acts_on) {
        const std::size_t pos = reg.position(label);
        if (acted[pos]) {
            throw std::invalid_argument("element '" + e.label + "': site listed twice");
        }
        acted[pos] = 1;
        positions.push_back(pos);
    }
    const std::size_t first = positions.empty() ? reg.size() : *std::min_element(positions.begin(), positions.end());

    // Each slot of the new index copies either an old site (>= 0) or an
    // output slot (encoded as -1 - k).
    std::vector<Site> sites;
    std::vector<long> source;
    for (std::size_t i = 0; i <= reg.size(); ++i) {
        if (i == first) {
            for (std::size_t k = 0; k < e.outputs.size(); ++k) {
                sites.push_back(e.outputs[k]);
                source.push_back(-1 - static_cast<long>(k));
            }
        }
        if (i < reg.size() && !acted[i]) {
            sites.push_back(reg[i]);
            source.push_back(static_cast<long>(i));
        }
    }
    SparseState out{QuditRegister(std::move(sites))};
    Index local(positions.size());
    Index next(source.size());
    for (const auto& [idx, amp] : s.terms()) {
        for (std::size_t k = 0; k < positions.size(); ++k) local[k] = idx[positions[k]];
        const auto it = e.action.find(local);
        if (it == e.action.end()) continue;
        for (const auto& [produced, coeff] : it->second) {
            if (produced.size() != e.outputs.size()) {
                throw std::invalid_argument("element '" + e.label + "': output arity mismatch");
            }
            for (std::size_t k = 0; k < source.size(); ++k) {
                next[k] = source[k] >= 0 ? idx[static_cast<std::size_t>(source[k])]
                                         : produced[static_cast<std::size_t>(-1 - source[k])];
            }
            out.add_term(next, amp * coeff);
        }
    }
    out.prune();
    return out;
}

OutcomeRecord apply_element(const SparseState& s, const MeasurementElement& e) {
    SparseState raw = apply_map(s, e);
    OutcomeRecord rec;
    rec.label = e.label;
    rec.probability = std::clamp(raw.norm2(), 0.0, 1.0);
    if (!raw.empty() && rec.probability > 0.0) {
        rec.post_state = raw.normalized();
    } else {
        rec.probability = 0.0;
    }
    return rec;
}

std::vector<OutcomeRecord> measure(const SparseState& s, std::span<const MeasurementElement> elements) {
    std::vector<OutcomeRecord> out;
    out.reserve(elements.size());
    for (const auto& e : elements) out.push_back(apply_element(s, e));
    return out;
}

double completeness_error(std::span<const MeasurementElement> elements, std::span<const int> input_dims) {
    std::vector<Index> inputs{Index{}};
    for (int d : input_dims) {
        std::vector<Index> grown;
        for (const auto& prefix : inputs) {
            for (int j = 1; j <= d; ++j) {
                Index idx = prefix;
                idx.push_back(static_cast<std::uint16_t>(j));
                grown.push_back(std::move(idx));
            }
        }
        inputs = std::move(grown);
    }
    const std::size_t dim = inputs.size();
    std::vector<Amplitude> gram(dim * dim);
    for (const auto& e : elements) {
        if (e.acts_on.size() != input_dims.size()) {
            throw std::invalid_argument("completeness: element arity mismatch");
        }
        std::vector<std::map<Index, Amplitude>> columns(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            if (auto it = e.action.find(inputs[i]); it != e.action.end()) {
                for (const auto& [out, v] : it->second) columns[i][out] += v;
            }
        }
        for (std::size_t i = 0; i < dim; ++i) {
            for (std::size_t j = 0; j < dim; ++j) {
                Amplitude acc{};
                for (const auto& [out, v] : columns[i]) {
                    if (auto it = columns[j].find(out); it != columns[j].end()) acc += std::conj(v) * it->second;
                }
                gram[i * dim + j] += acc;
            }
        }
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            const Amplitude target = i == j ? 1.0 : 0.0;
            worst = std::max(worst, std::abs(gram[i * dim + j] - target));
        }
    }
    return worst;
}

std::vector<MeasurementElement> computational_measurement(const Site& site) {
    std::vector<MeasurementElement> out;
    for (int j = 1; j <= site.dim; ++j) {
        MeasurementElement e;
        e.label = site.label + "=" + std::to_string(j);
        e.acts_on = {site.label};
        e.outputs = {site};
        const Index level{static_cast<std::uint16_t>(j)};
        e.action[level] = {{level, 1.0}};
        out.push_back(std::move(e));
    }
    return out;
}

SparseState fourier_vector(int k, int d, const std::string& label) {
    if (d < 1 || k < 1 || k > d) {
        throw std::invalid_argument("fourier_vector: need 1 <= k <= d");
    }
    SparseState s{QuditRegister({{label, d}})};
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (int j = 1; j <= d; ++j) {
        s.add_term({static_cast<std::uint16_t>(j)}, scale * root_of_unity(d, static_cast<long long>(j) * k));
    }
    s.prune();
    return s;
}

MeasurementElement fourier_bra(const std::string& site, int k, int d) {
    if (d < 1 || k < 1 || k > d) {
        throw std::invalid_argument("fourier_bra: need 1 <= k <= d");
    }
    MeasurementElement e;
    e.label = "k=" + std::to_string(k);
    e.acts_on = {site};
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (int j = 1; j <= d; ++j) {
        e.action[{static_cast<std::uint16_t>(j)}] = {
            {Index{}, scale * std::conj(root_of_unity(d, static_cast<long long>(j) * k))}};
    }
    return e;
}

std::vector<MeasurementElement> fourier_measurement(const std::string& site, int d) {
    std::vector<MeasurementElement> out;
    for (int k = 1; k <= d; ++k) out.push_back(fourier_bra(site, k, d));
    return out;
}

SparseState ghz_state(int k, int d, std::span<const std::string> labels) {
    if (labels.empty() || d < 1 || k < 1 || k > d) {
        throw std::invalid_argument("ghz_state: need n >= 1 and 1 <= k <= d");
    }
    std::vector<Site> sites;
    for (const auto& l : labels) sites.push_back({l, d});
    SparseState s{QuditRegister(std::move(sites))};
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (int j = 1; j <= d; ++j) {
        s.add_term(Index(labels.size(), static_cast<std::uint16_t>(j)),
                   scale * root_of_unity(d, static_cast<long long>(j) * k));
    }
    s.prune();
    return s;
}

SparseState ghz_state(int n, int k, int d) {
    if (n < 1) {
        throw std::invalid_argument("ghz_state: need n >= 1");
    }
    std::vector<std::string> labels;
    for (int i = 0; i < n; ++i) labels.push_back("s" + std::to_string(i));
    return ghz_state(k, d, labels);
}

SparseState split_site(const SparseState& s, const std::string& label, int d) {
    const std::size_t pos = s.reg().position(label);
    if (d < 1 || s.reg()[pos].dim != d * d) {
        throw std::invalid_argument("split_site: dimension of '" + label + "' is not " + std::to_string(d) + "^2");
    }
    MeasurementElement e;
    e.label = "split";
    e.acts_on = {label};
    e.outputs = {{label + ".0", d}, {label + ".1", d}};
    for (int j = 1; j <= d * d; ++j) {
        const auto j1 = static_cast<std::uint16_t>((j - 1) / d + 1);
        const auto j2 = static_cast<std::uint16_t>((j - 1) % d + 1);
        e.action[{static_cast<std::uint16_t>(j)}] = {{Index{j1, j2}, 1.0}};
    }
    return apply_map(s, e);
}

SparseState merge_sites(const SparseState& s, const std::string& first, const std::string& second,
                        const std::string& merged_label) {
    const int d1 = s.reg()[s.reg().position(first)].dim;
    const int d2 = s.reg()[s.reg().position(second)].dim;
    MeasurementElement e;
    e.label = "merge";
    e.acts_on = {first, second};
    e.outputs = {{merged_label, d1 * d2}};
    for (int j1 = 1; j1 <= d1; ++j1) {
        for (int j2 = 1; j2 <= d2; ++j2) {
            e.action[{static_cast<std::uint16_t>(j1), static_cast<std::uint16_t>(j2)}] = {
                {Index{static_cast<std::uint16_t>((j1 - 1) * d2 + j2)}, 1.0}};
        }
    }
    return apply_map(s, e);
}

Amplitude inner(const SparseState& a, const SparseState& b) {
    if (!(a.reg() == b.reg())) {
        throw std::invalid_argument("inner: register mismatch");
    }
    const auto& small = a.size() <= b.size() ? a.terms() : b.terms();
    const auto& large = a.size() <= b.size() ? b.terms() : a.terms();
    Amplitude acc{};
    for (const auto& [idx, v] : small) {
        if (auto it = large.find(idx); it != large.end()) acc += std::conj(v) * it->second;
    }
    return a.size() <= b.size() ? acc : std::conj(acc);
}

double fidelity(const SparseState& a, const SparseState& b) {
    const double na = a.norm2();
    const double nb = b.norm2();
    if (na <= 0.0 || nb <= 0.0) {
        if (!(a.reg() == b.reg())) throw std::invalid_argument("fidelity: register mismatch");
        return 0.0;
    }
    return std::clamp(std::norm(inner(a, b)) / (na * nb), 0.0, 1.0);
}

SparseState reorder(const SparseState& s, std::span<const std::string> labels) {
    if (labels.size() != s.reg().size()) {
        throw std::invalid_argument("reorder: label list is not a permutation of the register");
    }
    std::vector<std::size_t> from;
    std::vector<Site> sites;
    for (const auto& l : labels) {
        from.push_back(s.reg().position(l));
        sites.push_back(s.reg()[from.back()]);
    }
    SparseState out{QuditRegister(std::move(sites))};
    Index next(labels.size());
    for (const auto& [idx, v] : s.terms()) {
        for (std::size_t k = 0; k < from.size(); ++k) next[k] = idx[from[k]];
        out.add_term(next, v);
    }
    return out;
}

SparseState relabel_sites(const SparseState& s, const std::map<std::string, std::string>& mapping) {
    std::vector<Site> sites = s.reg().sites();
    for (auto& site : sites) {
        if (auto it = mapping.find(site.label); it != mapping.end()) site.label = it->second;
    }
    SparseState out{QuditRegister(std::move(sites))};
    for (const auto& [idx, v] : s.terms()) out.add_term(idx, v);
    return out;
}

SparseState factor_out(const SparseState& s, std::span<const std::string> labels) {
    if (s.empty()) {
        throw std::invalid_argument("factor_out: zero state");
    }
    MeasurementElement e;
    e.label = "factor";
    std::vector<std::size_t> positions;
    for (const auto& l : labels) {
        e.acts_on.push_back(l);
        positions.push_back(s.reg().position(l));
    }
    Index fixed;
    for (auto p : positions) fixed.push_back(s.terms().begin()->first[p]);
    for (const auto& [idx, v] : s.terms()) {
        for (std::size_t k = 0; k < positions.size(); ++k) {
            if (idx[positions[k]] != fixed[k]) {
                throw std::invalid_argument("factor_out: site '" + labels[k] + "' is not in a definite level");
            }
        }
    }
    e.action[fixed] = {{Index{}, 1.0}};
    return apply_map(s, e);
}

double max_amplitude_error(const SparseState& a, const SparseState& b) {
    if (!(a.reg() == b.reg())) {
        throw std::invalid_argument("max_amplitude_error: register mismatch");
    }
    double worst = 0.0;
    for (const auto& [idx, v] : a.terms()) worst = std::max(worst, std::abs(v - b.amplitude(idx)));
    for (const auto& [idx, v] : b.terms()) worst = std::max(worst, std::abs(v - a.amplitude(idx)));
    return worst;
}

nlohmann::ordered_json to_json(const SparseState& s) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& [idx, v] : s.terms()) {
        nlohmann::ordered_json term;
        term["indices"] = idx;
        term["re"] = v.real();
        term["im"] = v.imag();
        out.push_back(std::move(term));
    }
    return out;
}

}  // namespace qnet
