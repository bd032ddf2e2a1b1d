#pragma once

// Independent reference computations used only by the tests. They avoid the
// library's incidence tables and solvers: cube membership is decided by
// integer interval containment and minimizations use plain compass search.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

/// Does the scale-j cube with corner index m contain finest cell (a, b) of a
/// lattice with finest scale J?
inline bool contains(int j, std::int64_t m0, std::int64_t m1, int J, std::int64_t a, std::int64_t b, int n) {
    const int shift = J - j;
    if ((a >> shift) != m0) return false;
    return n == 1 || (b >> shift) == m1;
}

/// BM norm by direct enumeration. values[cell * d + i], row-major cells.
inline double bm_norm(const std::vector<double>& values, int d, int n, int J, int j_min, double p, double t, double r,
                      double q) {
    const std::int64_t side = std::int64_t{1} << (J - j_min);
    const double cell_volume = std::pow(2.0, -J * n);
    std::vector<double> terms;
    for (int j = j_min; j <= J; ++j) {
        const std::int64_t per_axis = std::int64_t{1} << (j - j_min);
        const std::int64_t m1_count = n == 2 ? per_axis : 1;
        for (std::int64_t m0 = 0; m0 < per_axis; ++m0) {
            for (std::int64_t m1 = 0; m1 < m1_count; ++m1) {
                double integral = 0.0;
                for (std::int64_t a = 0; a < side; ++a) {
                    for (std::int64_t b = 0; b < (n == 2 ? side : 1); ++b) {
                        if (!contains(j, m0, m1, J, a, b, n)) continue;
                        const std::size_t cell = static_cast<std::size_t>(n == 2 ? a * side + b : a);
                        double s = 0.0;
                        for (int i = 0; i < d; ++i) s += std::pow(std::abs(values[cell * d + i]), q);
                        integral += std::pow(s, p / q) * cell_volume;
                    }
                }
                const double volume = std::pow(2.0, -j * n);
                terms.push_back(std::pow(volume, 1.0 / t - 1.0 / p) * std::pow(integral, 1.0 / p));
            }
        }
    }
    if (std::isinf(r)) return *std::max_element(terms.begin(), terms.end());
    double acc = 0.0;
    for (double v : terms) acc += std::pow(v, r);
    return std::pow(acc, 1.0 / r);
}

/// Compass search with step halving; adequate for small convex problems.
inline double compass_minimize(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                               double step, double min_step = 1e-12) {
    double best = f(x);
    while (step > min_step) {
        bool improved = false;
        for (std::size_t k = 0; k < x.size(); ++k) {
            for (double dir : {1.0, -1.0}) {
                auto y = x;
                y[k] += dir * step;
                const double v = f(y);
                if (v < best) {
                    best = v;
                    x = std::move(y);
                    improved = true;
                }
            }
        }
        if (!improved) step *= 0.5;
    }
    return best;
}

/// Block norm of a function supported on one finest cell, minimizing over
/// splitting weights w_l >= 0, sum w_l = 1 along the ancestor chain.
/// `caps[l]` is |Q_l|^{1/t'-1/p'} for the l-th ancestor; `base` is
/// |v|_{q'} cellvol^{1/p'}.
inline double single_cell_splitting(const std::vector<double>& caps, double base, double r_conj) {
    const std::size_t L = caps.size();
    auto cost = [&](const std::vector<double>& z) {
        // Softmax-free parametrization: weights are |z_l| normalized.
        double total = 0.0;
        for (double v : z) total += std::abs(v);
        if (total == 0.0) return std::numeric_limits<double>::infinity();
        double acc = 0.0;
        double top = 0.0;
        for (std::size_t l = 0; l < L; ++l) top = std::max(top, caps[l] * std::abs(z[l]) / total);
        if (std::isinf(r_conj)) return base * top;
        for (std::size_t l = 0; l < L; ++l) acc += std::pow(caps[l] * std::abs(z[l]) / total / top, r_conj);
        return base * top * std::pow(acc, 1.0 / r_conj);
    };
    // Coarse grid over the simplex picks the start, compass search refines it.
    std::vector<double> best_z(L, 1.0);
    double best = cost(best_z);
    const int steps = L <= 3 ? 40 : 12;
    std::vector<int> idx(L, 0);
    std::function<void(std::size_t, int)> grid = [&](std::size_t k, int left) {
        if (k + 1 == L) {
            idx[k] = left;
            std::vector<double> z(L);
            for (std::size_t l = 0; l < L; ++l) z[l] = idx[l];
            const double v = cost(z);
            if (v < best) {
                best = v;
                best_z = z;
            }
            return;
        }
        for (int i = 0; i <= left; ++i) {
            idx[k] = i;
            grid(k + 1, left - i);
        }
    };
    grid(0, steps);
    double total = 0.0;
    for (double v : best_z) total += v;
    for (double& v : best_z) v /= total;
    return compass_minimize(cost, best_z, 0.05, 1e-13);
}

/// Block norm on the 2-cell lattice (n = 1, J = 1, j_min = 0, d = 1) by
/// direct search over the coarse-cube piece (y0, y1); the finest cubes take
/// the remainders g - y. `cap0` is the window's |Q|^{1/t'-1/p'} and `cap1`
/// the half-cells'.
inline double two_cell_block_norm(double g0, double g1, double p_conj, double r_conj, double cap0, double cap1) {
    const double cv = 0.5;
    auto cost = [&](const std::vector<double>& y) {
        const double lam0 = cap0 * std::pow((std::pow(std::abs(y[0]), p_conj) + std::pow(std::abs(y[1]), p_conj)) * cv,
                                            1.0 / p_conj);
        const double lam1 = cap1 * std::abs(g0 - y[0]) * std::pow(cv, 1.0 / p_conj);
        const double lam2 = cap1 * std::abs(g1 - y[1]) * std::pow(cv, 1.0 / p_conj);
        if (std::isinf(r_conj)) return std::max({lam0, lam1, lam2});
        return std::pow(std::pow(lam0, r_conj) + std::pow(lam1, r_conj) + std::pow(lam2, r_conj), 1.0 / r_conj);
    };
    double best = std::numeric_limits<double>::infinity();
    // Several starts guard against stalls on the nonsmooth kinks.
    for (double a : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        best = std::min(best, compass_minimize(cost, {a * g0, a * g1}, 0.5 * (std::abs(g0) + std::abs(g1) + 1.0), 1e-14));
    }
    return best;
}

}  // namespace oracle
