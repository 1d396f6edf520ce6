#pragma once

// Independent reference computations used by the tests. They share no code
// with the library beyond the Graph/Pattern containers.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include "qnet/graph.hpp"

namespace oracle {

using cplx = std::complex<double>;

/// Tries every injective map of pattern nodes into graph nodes.
inline bool brute_contains(const qnet::Graph& g, const qnet::SubgraphPattern& f) {
    const int N = g.node_count();
    std::vector<int> image(static_cast<std::size_t>(f.n), -1);
    std::vector<char> used(static_cast<std::size_t>(N), 0);
    std::function<bool(int)> rec = [&](int v) {
        if (v == f.n) {
            for (const auto& [a, b] : f.edges) {
                if (!g.has_edge(image[static_cast<std::size_t>(a)], image[static_cast<std::size_t>(b)])) return false;
            }
            return true;
        }
        for (int x = 0; x < N; ++x) {
            if (used[static_cast<std::size_t>(x)]) continue;
            used[static_cast<std::size_t>(x)] = 1;
            image[static_cast<std::size_t>(v)] = x;
            const bool ok = rec(v + 1);
            used[static_cast<std::size_t>(x)] = 0;
            if (ok) return true;
        }
        return false;
    };
    return rec(0);
}

/// Perfect matchings of c nodes as partner tables, via bitmasks.
inline std::vector<std::vector<int>> matchings(int c) {
    std::vector<std::vector<int>> out;
    std::vector<int> partner(static_cast<std::size_t>(c), -1);
    std::function<void(unsigned)> rec = [&](unsigned free) {
        if (free == 0) {
            out.push_back(partner);
            return;
        }
        const int i = __builtin_ctz(free);
        for (int j = i + 1; j < c; ++j) {
            if (!(free & (1u << j))) continue;
            partner[static_cast<std::size_t>(i)] = j;
            partner[static_cast<std::size_t>(j)] = i;
            rec(free & ~(1u << i) & ~(1u << j));
        }
    };
    rec((1u << c) - 1);
    return out;
}

/// Round-robin edge colouring of K_c with colours 1..c-1.
inline int colour(int i, int j, int c) {
    const int m = c - 1;
    if (i == m || j == m) {
        const int other = i == m ? j : i;
        return (2 * other) % m + 1;
    }
    return (i + j) % m + 1;
}

inline cplx omega(double num, double d) { return std::polar(1.0, 2.0 * std::numbers::pi * num / d); }

struct EdgePipeline {
    double link_probability = 0.0;
    double p_F = 0.0;
    double min_fidelity = 1.0;
    int accepted_patterns = 0;
};

/// Dense simulation of steps 2-4 for the edge target from the relabelled
/// |K_6>: six qudits of dimension 5, kept nodes 0 and 1.
inline EdgePipeline edge_pipeline_dense() {
    constexpr int c = 6, q = 5, n = 2, D = 4, d = 2;
    std::vector<cplx> psi(15625, 0.0);
    const auto ms = matchings(c);
    for (const auto& partner : ms) {
        int idx = 0;
        for (int v = 0; v < c; ++v) idx = idx * q + (colour(v, partner[static_cast<std::size_t>(v)], c) - 1);
        psi[static_cast<std::size_t>(idx)] += 1.0 / std::sqrt(static_cast<double>(ms.size()));
    }
    // kept nodes must not share a link
    const int joint = colour(0, 1, c) - 1;
    double link = 0.0;
    for (int idx = 0; idx < 15625; ++idx) {
        if (idx / 3125 == joint) psi[static_cast<std::size_t>(idx)] = 0.0;
        link += std::norm(psi[static_cast<std::size_t>(idx)]);
    }
    EdgePipeline out;
    out.link_probability = link;

    for (int pat = 0; pat < 625; ++pat) {
        int k[4];
        for (int b = 0, r = pat; b < 4; ++b, r /= 5) k[3 - b] = r % 5 + 1;
        cplx kept[q][q] = {};
        for (int idx = 0; idx < 15625; ++idx) {
            const cplx a = psi[static_cast<std::size_t>(idx)];
            if (a == 0.0) continue;
            int lv[6];
            for (int v = 5, r = idx; v >= 0; --v, r /= q) lv[v] = r % q + 1;
            cplx f = a;
            for (int b = 0; b < 4; ++b) f *= std::conj(omega(lv[2 + b] * k[b], q)) / std::sqrt(double(q));
            kept[lv[0] - 1][lv[1] - 1] += f;
        }
        // colour -> D index with the phase that undoes the outcome
        cplx m[D][D] = {};
        for (int a1 = 0; a1 < q; ++a1) {
            for (int a2 = 0; a2 < q; ++a2) {
                if (kept[a1][a2] == 0.0) continue;
                int b1 = -1, b2 = -1;
                for (int b = n; b < c; ++b) {
                    if (colour(0, b, c) == a1 + 1) b1 = b;
                    if (colour(1, b, c) == a2 + 1) b2 = b;
                }
                if (b1 < 0 || b2 < 0) continue;
                m[b1 - n][b2 - n] += kept[a1][a2] * omega((a1 + 1) * k[b1 - n], q) * omega((a2 + 1) * k[b2 - n], q);
            }
        }
        double norm2 = 0.0, overlap2 = 0.0;
        cplx overlap = 0.0;
        for (int i = 0; i < D; ++i) {
            for (int j = 0; j < D; ++j) {
                norm2 += std::norm(m[i][j]);
                if (i != j) overlap += m[i][j];
            }
        }
        overlap2 = std::norm(overlap) / 12.0;
        if (norm2 < 1e-20 || overlap2 / norm2 < 1.0 - 1e-9) continue;
        ++out.accepted_patterns;

        // step 3: split into (hi, lo), contract lo with <Phi_1^{k}| for k = (1, d-n+1)
        const int k3[2] = {1, d - n + 1};
        cplx g[d][d] = {};
        for (int i = 0; i < D; ++i) {
            for (int j = 0; j < D; ++j) {
                const int i1 = i / d, i2 = i % d + 1, j1 = j / d, j2 = j % d + 1;
                g[i1][j1] += m[i][j] * std::conj(omega(i2 * k3[0], d)) * std::conj(omega(j2 * k3[1], d)) / double(d);
            }
        }
        // step 4 for one edge: level i -> qubit (i-1), amplitude 1/sqrt(d) per node
        double fin = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) fin += std::norm(g[i][j]) / (d * d);
        out.p_F += fin;
        const double fid = std::norm(g[0][0] + g[1][1]) / (2.0 * (fin * d * d));
        out.min_fidelity = std::min(out.min_fidelity, fid);
    }
    return out;
}

}  // namespace oracle
