#include "qnet/noise.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>

#include "qnet/network.hpp"

namespace qnet {

namespace {

constexpr int kNoisyMatchingLimit = 10;

void check_eps(double eps) {
    if (!(eps >= 0.0 && eps <= 1.0)) {
        throw std::invalid_argument("noise: eps must lie in [0, 1]");
    }
}

std::string pairs_tag(const std::vector<std::pair<int, int>>& pairs) {
    if (pairs.empty()) return "K";
    std::string s = "T=";
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(pairs[i].first) + "-" + std::to_string(pairs[i].second);
    }
    return s;
}

struct ComponentOutcome {
    double success = 0.0;
    double f = 0.0;
    std::vector<EnsembleComponent> finals;  // weights relative to the component
};

ComponentOutcome propagate(const SubgraphTarget& t, const MatchingState& m, const std::set<std::vector<int>>& policy,
                           const SparseState& target) {
    ComponentOutcome out;
    const int n = t.n;
    const int d = static_cast<int>(t.d);
    const CarveResult carve = step2_carve(m, n);
    for (const auto& br : carve.branches) {
        if (policy.count(br.outcomes) == 0) continue;
        const double w = carve.link_probability * br.probability;
        const ExtractResult ex = step3_extract_ghz(br.state, n, d);
        if (!ex.state) continue;
        const ProjectResult pr = step4_project(*ex.state, t.pattern);
        if (!pr.state) continue;
        const double mass = w * ex.probability * pr.probability;
        const bool is_f = fidelity(*pr.state, target) >= kAcceptFidelity;
        out.success += mass;
        if (is_f) out.f += mass;
        out.finals.push_back({mass, *pr.state, is_f ? "F" : "other"});
    }
    return out;
}

}  // namespace

double PureEnsemble::total_weight() const {
    double total = 0.0;
    for (const auto& c : components) total += c.weight;
    return total;
}

PureEnsemble mixed_link(double p, double eps) {
    check_eps(eps);
    const SparseState phi = link_state(p);  // validates p
    PureEnsemble e;
    if (1.0 - eps > 0.0) e.components.push_back({1.0 - eps, phi, "phi"});
    if (eps > 0.0) e.components.push_back({eps, SparseState::basis(phi.reg(), {1, 1}), "vacuum"});
    return e;
}

PureEnsemble mixed_link(const MixedLink& link) { return mixed_link(link.p, link.eps); }

PureEnsemble build_kc_noisy(int c, double eps) {
    check_eps(eps);
    if (c < 2 || c % 2 != 0) {
        throw std::invalid_argument("build_kc_noisy: c must be even and positive, got " + std::to_string(c));
    }
    if (c > kNoisyMatchingLimit) {
        throw std::invalid_argument("build_kc_noisy: c above " + std::to_string(kNoisyMatchingLimit) +
                                    " is not materialized");
    }
    const auto matchings = perfect_matchings(c);
    std::vector<int> nodes(static_cast<std::size_t>(c));
    std::iota(nodes.begin(), nodes.end(), 0);
    const double u = 1.0 - eps;
    const double norm = static_cast<double>(double_factorial(c));

    std::map<std::vector<std::size_t>, std::size_t> slot_of;
    std::vector<std::vector<std::size_t>> keys;
    std::vector<double> weights;
    std::vector<std::string> tags;
    std::vector<std::pair<int, int>> chosen;
    std::vector<char> used(static_cast<std::size_t>(c), 0);
    std::function<void(int)> rec = [&](int i) {
        if (i == c) {
            const int t = static_cast<int>(chosen.size());
            const double w = static_cast<double>(double_factorial(c - 2 * t)) * std::pow(u, c / 2 - t) *
                             std::pow(1.0 - u, t) / norm;
            // |K_c> stays its own component even where it coincides with a
            // separable one (c = 2).
            std::vector<std::size_t> key;
            if (t == 0) key.push_back(matchings.size());
            for (std::size_t k = 0; k < matchings.size(); ++k) {
                const auto& partner = matchings[k];
                const bool contains = std::all_of(chosen.begin(), chosen.end(), [&](const auto& pr) {
                    return partner[static_cast<std::size_t>(pr.first)] == pr.second;
                });
                if (contains) key.push_back(k);
            }
            auto [it, inserted] = slot_of.try_emplace(key, keys.size());
            if (inserted) {
                keys.push_back(key);
                weights.push_back(0.0);
                tags.push_back(pairs_tag(chosen));
            }
            weights[it->second] += w;
            return;
        }
        if (used[static_cast<std::size_t>(i)]) {
            rec(i + 1);
            return;
        }
        rec(i + 1);
        used[static_cast<std::size_t>(i)] = 1;
        for (int j = i + 1; j < c; ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            used[static_cast<std::size_t>(j)] = 1;
            chosen.emplace_back(i, j);
            rec(i + 1);
            chosen.pop_back();
            used[static_cast<std::size_t>(j)] = 0;
        }
        used[static_cast<std::size_t>(i)] = 0;
    };
    rec(0);

    PureEnsemble e;
    for (std::size_t k = 0; k < keys.size(); ++k) {
        if (weights[k] < kComponentFloor) {
            e.pruned_mass += weights[k];
            continue;
        }
        std::vector<std::vector<int>> subset;
        for (std::size_t idx : keys[k]) {
            if (idx < matchings.size()) subset.push_back(matchings[idx]);
        }
        e.components.push_back({weights[k], matching_superposition(nodes, subset), tags[k]});
    }
    return e;
}

std::vector<std::vector<double>> matching_density(const PureEnsemble& e, int c) {
    const auto matchings = perfect_matchings(c);
    std::vector<int> nodes(static_cast<std::size_t>(c));
    std::iota(nodes.begin(), nodes.end(), 0);
    std::vector<Index> index;
    for (const auto& m : matchings) {
        const std::vector<std::vector<int>> one{m};
        index.push_back(matching_superposition(nodes, one).terms().begin()->first);
    }
    const std::size_t k = matchings.size();
    std::vector<std::vector<double>> rho(k, std::vector<double>(k, 0.0));
    for (const auto& comp : e.components) {
        std::vector<Amplitude> amp(k);
        for (std::size_t i = 0; i < k; ++i) amp[i] = comp.state.amplitude(index[i]);
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) rho[i][j] += comp.weight * std::real(std::conj(amp[i]) * amp[j]);
        }
    }
    return rho;
}

double adjusted_c_coeff(double c_coeff, double eps) {
    if (!(eps >= 0.0 && eps < 1.0) || !(c_coeff > 0.0)) {
        throw std::invalid_argument("adjusted_c_coeff: need c_coeff > 0 and 0 <= eps < 1");
    }
    return c_coeff / (1.0 - eps);
}

std::uint64_t retry_budget(double x, double eps_fail) {
    if (!(x > 0.0) || x > 1.0) {
        throw std::invalid_argument("retry_budget: need 0 < x <= 1");
    }
    return repetitions_needed(x, eps_fail);
}

NoisyReport run_protocol_noisy(const SubgraphTarget& t, double eps, const NoisyOptions& options) {
    check_eps(eps);
    const int c = static_cast<int>(t.c_nodes);
    if (t.c_nodes % 2 != 0 || t.c_nodes > static_cast<std::uint64_t>(kFullChainLimit)) {
        throw std::invalid_argument("run_protocol_noisy: target needs an even c <= " + std::to_string(kFullChainLimit) +
                                    ", got c=" + std::to_string(t.c_nodes));
    }
    if (options.mode == Mode::sampled && options.runs < 1) {
        throw std::invalid_argument("run_protocol_noisy: sampled mode needs runs >= 1");
    }
    NoisyReport r;
    r.target = t.name();
    r.mode = options.mode;
    r.eps = eps;
    r.x_theory = std::pow(1.0 - eps, c / 2);
    const double cc = options.harvest_c_coeff > 0.0 ? options.harvest_c_coeff : 2.0 * c;
    r.c_coeff_adjusted = eps < 1.0 ? adjusted_c_coeff(cc, eps) : 0.0;

    const PureEnsemble ensemble = build_kc_noisy(c, eps);
    r.pruned_mass = ensemble.pruned_mass;
    r.components = ensemble.size();
    const auto& policy = step2_policy(t);
    r.p_pure = pure_success_probability(t);

    std::vector<int> nodes(static_cast<std::size_t>(c));
    std::iota(nodes.begin(), nodes.end(), 0);
    std::vector<std::string> kept;
    for (int i = 0; i < t.n; ++i) kept.push_back(node_label(i));
    const SparseState target = target_state(t.pattern, kept);

    std::vector<ComponentOutcome> outcomes(ensemble.size());
    parallel_for(ensemble.size(), options.threads, [&](std::size_t i) {
        outcomes[i] = propagate(t, MatchingState{nodes, ensemble.components[i].state}, policy, target);
    });

    // Exact mode weights each component by its ensemble weight; sampled mode
    // by the frequency with which it is drawn.
    std::vector<double> weight(ensemble.size());
    if (options.mode == Mode::exact) {
        for (std::size_t i = 0; i < ensemble.size(); ++i) weight[i] = ensemble.components[i].weight;
    } else {
        r.runs = options.runs;
        std::vector<double> cumulative;
        double acc = 0.0;
        for (const auto& comp : ensemble.components) cumulative.push_back(acc += comp.weight);
        for (int run = 0; run < options.runs; ++run) {
            Rng rng(derive_seed(options.seed, "noise", static_cast<std::uint64_t>(run)));
            const double u = uniform01(rng) * acc;
            const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
            const auto i = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
                it - cumulative.begin(), static_cast<std::ptrdiff_t>(ensemble.size()) - 1));
            weight[i] += 1.0 / options.runs;
        }
    }
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        r.success_mass += weight[i] * outcomes[i].success;
        r.f_mass += weight[i] * outcomes[i].f;
    }
    for (std::size_t i = 0; i < ensemble.size() && r.success_mass > 0.0; ++i) {
        for (const auto& fin : outcomes[i].finals) {
            const double w = weight[i] * fin.weight / r.success_mass;
            if (w < kComponentFloor) continue;
            r.final.components.push_back({w, fin.state, ensemble.components[i].tag + ":" + fin.tag});
        }
    }
    r.x_measured = r.p_pure > 0.0 ? r.f_mass / r.p_pure : 0.0;
    r.conditional_f_weight = r.success_mass > 0.0 ? r.f_mass / r.success_mass : 0.0;
    if (r.x_measured > 0.0) {
        r.repetitions = 1.0 / r.x_measured;
        r.retry_budget = retry_budget(std::min(r.x_measured, 1.0), options.eps_fail);
    }
    return r;
}

nlohmann::ordered_json to_json(const NoisyReport& r) {
    nlohmann::ordered_json j;
    j["eps"] = r.eps;
    j["x_theory"] = r.x_theory;
    j["x_measured"] = r.x_measured;
    j["retry_budget"] = r.retry_budget ? nlohmann::ordered_json(*r.retry_budget) : nlohmann::ordered_json(nullptr);
    j["pruned_mass"] = r.pruned_mass;
    j["target"] = r.target;
    j["mode"] = mode_name(r.mode);
    j["p_pure"] = r.p_pure;
    j["success_mass"] = r.success_mass;
    j["f_mass"] = r.f_mass;
    j["conditional_f_weight"] = r.conditional_f_weight;
    j["repetitions"] = r.repetitions;
    j["c_coeff_adjusted"] = r.c_coeff_adjusted;
    j["components"] = r.components;
    if (r.mode == Mode::sampled) j["runs"] = r.runs;
    return j;
}

}  // namespace qnet
