#include "bmkit/block_norms.hpp"

#include <Eigen/Dense>
#include <ceres/ceres.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "bmkit/bm_norms.hpp"
#include "bmkit/error.hpp"

namespace bmkit {

namespace {

using Evaluator = std::function<bool(const double*, double*, double*)>;

class FirstOrder final : public ceres::FirstOrderFunction {
public:
    FirstOrder(int size, Evaluator eval) : size_(size), eval_(std::move(eval)) {}
    bool Evaluate(const double* x, double* cost, double* gradient) const override { return eval_(x, cost, gradient); }
    int NumParameters() const override { return size_; }

private:
    int size_;
    Evaluator eval_;
};

/// Calls `stop` every `every` iterations with the current iterate written back.
class StopCheck final : public ceres::IterationCallback {
public:
    StopCheck(const std::function<bool()>& stop, int every) : stop_(stop), every_(every) {}
    ceres::CallbackReturnType operator()(const ceres::IterationSummary& s) override {
        if (s.iteration == 0 || s.iteration % every_ != 0 || !s.step_is_successful) return ceres::SOLVER_CONTINUE;
        return stop_() ? ceres::SOLVER_TERMINATE_SUCCESSFULLY : ceres::SOLVER_CONTINUE;
    }

private:
    const std::function<bool()>& stop_;
    int every_;
};

/// Runs L-BFGS to its own convergence, to `max_iters`, or until `stop` (checked
/// every 20 iterations) reports that the certified gap is small enough.
/// Returns iterations used.
int minimize(std::vector<double>& x, const Evaluator& eval, int max_iters, const std::function<bool()>& stop = {}) {
    if (x.empty() || max_iters <= 0) return 0;
    ceres::GradientProblem problem(new FirstOrder(static_cast<int>(x.size()), eval));
    ceres::GradientProblemSolver::Options options;
    options.line_search_direction_type = ceres::LBFGS;
    options.max_lbfgs_rank = 30;
    options.max_num_iterations = max_iters;
    options.function_tolerance = 1e-16;
    options.gradient_tolerance = 1e-15;
    options.parameter_tolerance = 1e-16;
    options.logging_type = ceres::SILENT;
    options.minimizer_progress_to_stdout = false;
    StopCheck check(stop, 20);
    if (stop) {
        options.update_state_every_iteration = true;
        options.callbacks.push_back(&check);
    }
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(options, problem, x.data(), &summary);
    return std::max<int>(1, static_cast<int>(summary.iterations.size()) - 1);
}

/// l^q-dual direction of v in l^{q'}: <w, v> = |v|_{q'} and |w|_q = 1.
void dual_direction(std::span<const double> v, double q_conj, std::span<double> out) {
    const double norm = value_norm_unchecked(v, q_conj);
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = norm > 0.0 ? std::copysign(std::pow(std::abs(v[i]) / norm, q_conj - 1.0), v[i]) : 0.0;
    }
}

double relative_gap(double upper, double lower) {
    if (upper <= 0.0) return 0.0;
    return std::max(0.0, upper - lower) / upper;
}

// Primal route. For each support cell the splitting is g_Q(c) = X_{Q,c} g(c)/|g(c)|_{q'}
// with sum over the ancestor chain of X_{Q,c} equal to h(c) = |g(c)|_{q'}; the finest
// ancestor absorbs h(c) minus the others, leaving the coarser weights free.
class PrimalProblem {
public:
    PrimalProblem(const GridFunction& g, const ExponentSet& e, double scale)
        : lat_(*g.lattice()), L_(lat_.levels()), p_conj_(e.p_conj()), cv_(lat_.cell_volume()) {
        const double q_conj = e.q_conj();
        for (std::size_t c = 0; c < lat_.cell_count(); ++c) {
            const double h = value_norm_unchecked(g.cell(c), q_conj);
            if (h > 0.0) {
                cells_.push_back(c);
                h_.push_back(h / scale);
            }
        }
        weight_.resize(lat_.cube_count());
        for (std::size_t id = 0; id < lat_.cube_count(); ++id) {
            weight_[id] = cube_power(lat_.cube(id).j, lat_.n(), 1.0 / e.p() - 1.0 / e.t());
        }
        sums_.assign(lat_.cube_count(), 0.0);
        full_.assign(cells_.size() * L_, 0.0);
        deriv_.assign(cells_.size() * L_, 0.0);
    }

    std::size_t free_count() const { return cells_.size() * (L_ - 1); }
    const std::vector<std::size_t>& cells() const { return cells_; }
    int levels() const { return L_; }

    /// Start from weights proportional to |Q|^{-r(1/t'-1/p')}, the single-cell optimum.
    std::vector<double> initial_point(double r) const {
        std::vector<double> x(free_count());
        for (std::size_t s = 0; s < cells_.size(); ++s) {
            const auto anc = lat_.ancestors(cells_[s]);
            std::vector<double> logw(L_);
            double top = -std::numeric_limits<double>::infinity();
            for (int l = 0; l < L_; ++l) {
                logw[l] = -r * std::log(weight_[anc[l]]);
                top = std::max(top, logw[l]);
            }
            double total = 0.0;
            for (int l = 0; l < L_; ++l) total += std::exp(logw[l] - top);
            for (int l = 0; l + 1 < L_; ++l) x[s * (L_ - 1) + l] = h_[s] * std::exp(logw[l] - top) / total;
        }
        return x;
    }

    void expand(const double* x) const {
        for (std::size_t s = 0; s < cells_.size(); ++s) {
            double acc = 0.0;
            for (int l = 0; l + 1 < L_; ++l) {
                full_[s * L_ + l] = x[s * (L_ - 1) + l];
                acc += x[s * (L_ - 1) + l];
            }
            full_[s * L_ + L_ - 1] = h_[s] - acc;
        }
        std::fill(sums_.begin(), sums_.end(), 0.0);
        for (std::size_t s = 0; s < cells_.size(); ++s) {
            const auto anc = lat_.ancestors(cells_[s]);
            for (int l = 0; l < L_; ++l) sums_[anc[l]] += cv_ * std::pow(std::abs(full_[s * L_ + l]), p_conj_);
        }
    }

    /// sum_Q (a_Q S_Q^{1/p'})^{rc}, with its gradient in the free weights.
    bool evaluate(const double* x, double* cost, double* grad, double rc) const {
        expand(x);
        double total = 0.0;
        for (std::size_t id = 0; id < sums_.size(); ++id) {
            if (sums_[id] > 0.0) total += std::pow(weight_[id] * std::pow(sums_[id], 1.0 / p_conj_), rc);
        }
        *cost = total;
        if (!std::isfinite(total)) return false;
        if (grad != nullptr) {
            derivatives(rc);
            for (std::size_t s = 0; s < cells_.size(); ++s) {
                const double last = deriv_[s * L_ + L_ - 1];
                for (int l = 0; l + 1 < L_; ++l) grad[s * (L_ - 1) + l] = deriv_[s * L_ + l] - last;
            }
        }
        return true;
    }

    /// Partial derivatives in the full (cell, level) values; expand() must have run.
    void derivatives(double rc) const {
        for (std::size_t s = 0; s < cells_.size(); ++s) {
            const auto anc = lat_.ancestors(cells_[s]);
            for (int l = 0; l < L_; ++l) {
                const double S = sums_[anc[l]];
                const double X = full_[s * L_ + l];
                double d = 0.0;
                if (S > 0.0 && X != 0.0) {
                    const double a = std::pow(weight_[anc[l]], rc);
                    d = rc * a * std::pow(S, rc / p_conj_ - 1.0) * cv_ * std::pow(std::abs(X), p_conj_ - 1.0);
                    if (!std::isfinite(d)) d = 0.0;
                    d = std::copysign(d, X);
                }
                deriv_[s * L_ + l] = d;
            }
        }
    }

    /// True cost (exponent r_conj, possibly 1) of the current splitting, in scaled units.
    double true_cost(const double* x, double r_conj) const {
        expand(x);
        std::vector<double> terms;
        for (std::size_t id = 0; id < sums_.size(); ++id) {
            if (sums_[id] > 0.0) terms.push_back(weight_[id] * std::pow(sums_[id], 1.0 / p_conj_));
        }
        return lr_aggregate(terms, r_conj);
    }

    /// Dual candidate f(c) = nu_c dualdir(g(c)) with nu_c the multiplier estimate; exact at the optimum.
    GridFunction implied_dual(const double* x, const GridFunction& g, double q_conj, double rc) const {
        expand(x);
        derivatives(rc);
        GridFunction f(g.lattice(), g.dim());
        std::vector<double> dir(g.dim());
        for (std::size_t s = 0; s < cells_.size(); ++s) {
            dual_direction(g.cell(cells_[s]), q_conj, dir);
            // At the optimum every level's derivative equals the multiplier; average them
            // with mass weights so nearly empty levels do not dominate.
            double num = 0.0;
            double den = 0.0;
            for (int l = 0; l < L_; ++l) {
                num += std::abs(full_[s * L_ + l]) * deriv_[s * L_ + l];
                den += std::abs(full_[s * L_ + l]);
            }
            const double nu = den > 0.0 ? num / den / cv_ : 0.0;
            for (int i = 0; i < g.dim(); ++i) f.at(cells_[s], i) = nu * dir[i];
        }
        return f;
    }

    /// Splitting values X_{Q,c}, [support cell][level], in scaled units; valid after expand().
    const std::vector<double>& splits() const { return full_; }

private:
    const Lattice& lat_;
    int L_;
    double p_conj_;
    double cv_;
    std::vector<std::size_t> cells_;
    std::vector<double> h_;
    std::vector<double> weight_;  // |Q|^{1/p-1/t} = |Q|^{1/t'-1/p'}
    mutable std::vector<double> sums_;
    mutable std::vector<double> full_;
    mutable std::vector<double> deriv_;
};

double lower_bound_from(const GridFunction& g, const GridFunction& f, const ExponentSet& e) {
    const double pair = pairing(g, f);
    const double norm = bm_norm(f, e);
    if (!(pair > 0.0) || !(norm > 0.0) || !std::isfinite(pair / norm)) return 0.0;
    return pair / norm;
}

/// Blocks from a scalar splitting: cube l of cell cells[s] receives g(c) X[s L + l] / |g(c)|_{q'}.
BlockDecomposition decomposition_from(const std::vector<std::size_t>& cells, const std::vector<double>& X,
                                      const GridFunction& g, const ExponentSet& e, double scale) {
    const auto& lat = *g.lattice();
    const int L = lat.levels();
    const double q_conj = e.q_conj();
    std::vector<GridFunction> pieces;
    std::vector<std::size_t> ids;
    std::vector<long> slot(lat.cube_count(), -1);
    for (std::size_t s = 0; s < cells.size(); ++s) {
        const auto c = cells[s];
        const auto anc = lat.ancestors(c);
        const double h = value_norm_unchecked(g.cell(c), q_conj);
        for (int l = 0; l < L; ++l) {
            const double x = X[s * L + l] * scale;
            if (x == 0.0) continue;
            if (slot[anc[l]] < 0) {
                slot[anc[l]] = static_cast<long>(pieces.size());
                pieces.emplace_back(g.lattice(), g.dim());
                ids.push_back(anc[l]);
            }
            auto& piece = pieces[static_cast<std::size_t>(slot[anc[l]])];
            for (int i = 0; i < g.dim(); ++i) piece.at(c, i) = g.at(c, i) * (x / h);
        }
    }
    BlockDecomposition dec;
    for (std::size_t k = 0; k < pieces.size(); ++k) {
        const auto& Q = lat.cube(ids[k]);
        const double lambda =
            cube_power(Q.j, lat.n(), 1.0 / e.p() - 1.0 / e.t()) * lp_norm_on_cube(pieces[k], Q, e.p_conj(), q_conj);
        if (!(lambda > 0.0)) continue;
        pieces[k] *= 1.0 / lambda;
        dec.entries.push_back({Q, lambda, std::move(pieces[k])});
    }
    std::sort(dec.entries.begin(), dec.entries.end(), [](const auto& a, const auto& b) { return a.cube < b.cube; });
    GridFunction residual = g;
    residual -= dec.reconstruct(g);
    dec.residual_norm = lp_norm_on_cube(residual, lat.cube(0), e.p_conj(), q_conj);
    return dec;
}

/// Smallest cube of the family containing the support of f (f nonzero).
CubeIndex smallest_cover(const GridFunction& f) {
    const auto& lat = *f.lattice();
    std::vector<std::uint32_t> common;
    bool first = true;
    for (std::size_t c = 0; c < lat.cell_count(); ++c) {
        if (value_norm_unchecked(f.cell(c), 2.0) == 0.0) continue;
        const auto anc = lat.ancestors(c);
        if (first) {
            common.assign(anc.begin(), anc.end());
            first = false;
        } else {
            std::size_t keep = 0;
            while (keep < common.size() && common[keep] == anc[keep]) ++keep;
            common.resize(keep);
        }
    }
    return lat.cube(common.back());
}

double capacity_lambda(const GridFunction& piece, const CubeIndex& Q, const ExponentSet& e) {
    return cube_power(Q.j, piece.lattice()->n(), 1.0 / e.p() - 1.0 / e.t()) *
           lp_norm_on_cube(piece, Q, e.p_conj(), e.q_conj());
}

BlockDecomposition one_block(const GridFunction& g, const ExponentSet& e) {
    const auto Q = smallest_cover(g);
    const double lambda = capacity_lambda(g, Q, e);
    BlockDecomposition dec;
    dec.entries.push_back({Q, lambda, (1.0 / lambda) * g});
    GridFunction residual = g;
    residual -= dec.reconstruct(g);
    dec.residual_norm = lp_norm_on_cube(residual, g.lattice()->cube(0), e.p_conj(), e.q_conj());
    return dec;
}

void check_options(const SolverOptions& opts) {
    if (!(opts.tol > 0.0) || !(opts.tol < 1.0)) throw Error(ErrorCode::domain, "solver tolerance must lie in (0, 1)");
    if (opts.max_iters < 1) throw Error(ErrorCode::domain, "solver iteration budget must be positive");
}

// Dual route: minimize H(f) = (1/r) sum_Q T_Q(f)^r - <g, f>, T_Q = |Q|^{1/t-1/p} ||f||_{L^p(Q; l^q)},
// over the (cell, component) pairs where g is nonzero.
class DualProblem {
public:
    DualProblem(const GridFunction& g, const ExponentSet& e)
        : lat_(*g.lattice()), L_(lat_.levels()), d_(g.dim()), p_(e.p()), q_(e.q()), cv_(lat_.cell_volume()) {
        for (std::size_t c = 0; c < lat_.cell_count(); ++c) {
            bool any = false;
            for (int i = 0; i < d_; ++i) {
                if (g.at(c, i) != 0.0) {
                    slots_.push_back({c, i});
                    any = true;
                }
            }
            if (any) cells_.push_back(c);
        }
        slot_begin_.assign(cells_.size() + 1, 0);
        for (std::size_t s = 0, k = 0; s < cells_.size(); ++s) {
            while (k < slots_.size() && slots_[k].cell == cells_[s]) ++k;
            slot_begin_[s + 1] = k;
        }
        coef_.resize(lat_.cube_count());
        for (std::size_t id = 0; id < lat_.cube_count(); ++id) {
            coef_[id] = cube_power(lat_.cube(id).j, lat_.n(), 1.0 / e.t() - 1.0 / e.p());
        }
        target_.resize(slots_.size());
        sums_.assign(lat_.cube_count(), 0.0);
        powered_.assign(lat_.cube_count(), 0.0);
        u_.assign(cells_.size(), 0.0);
    }

    std::size_t size() const { return slots_.size(); }

    void set_target(const GridFunction& g, double scale) {
        for (std::size_t k = 0; k < slots_.size(); ++k) target_[k] = g.at(slots_[k].cell, slots_[k].comp) / scale;
    }

    std::vector<double> initial_point(double q_conj) const {
        std::vector<double> f(slots_.size());
        for (std::size_t k = 0; k < slots_.size(); ++k) {
            f[k] = std::copysign(std::pow(std::abs(target_[k]), q_conj - 1.0), target_[k]);
        }
        return f;
    }

    /// Rescale f along its ray to the minimizer of H for exponent r.
    void ray_scale(std::vector<double>& f, double r) const {
        double pair = 0.0;
        for (std::size_t k = 0; k < f.size(); ++k) pair += cv_ * target_[k] * f[k];
        accumulate(f.data());
        double log_top = -std::numeric_limits<double>::infinity();
        std::vector<double> logs;
        for (std::size_t id = 0; id < sums_.size(); ++id) {
            if (sums_[id] > 0.0) {
                logs.push_back(std::log(coef_[id]) + std::log(sums_[id]) / p_);
                log_top = std::max(log_top, logs.back());
            }
        }
        if (!(pair > 0.0) || logs.empty()) return;
        double acc = 0.0;
        for (double lg : logs) acc += std::exp(r * (lg - log_top));
        const double log_norm_r = r * log_top + std::log(acc);  // log ||f||^r
        const double s = std::exp((std::log(pair) - log_norm_r) / (r - 1.0));
        if (std::isfinite(s) && s > 0.0) {
            for (double& v : f) v *= s;
        }
    }

    void accumulate(const double* f) const {
        std::fill(sums_.begin(), sums_.end(), 0.0);
        for (std::size_t s = 0; s < cells_.size(); ++s) {
            double top = 0.0;
            for (auto k = slot_begin_[s]; k < slot_begin_[s + 1]; ++k) top = std::max(top, std::abs(f[k]));
            double acc = 0.0;
            if (top > 0.0) {
                for (auto k = slot_begin_[s]; k < slot_begin_[s + 1]; ++k) acc += std::pow(std::abs(f[k]) / top, q_);
            }
            u_[s] = top > 0.0 ? top * std::pow(acc, 1.0 / q_) : 0.0;
            const auto anc = lat_.ancestors(cells_[s]);
            const double contrib = cv_ * std::pow(u_[s], p_);
            for (int l = 0; l < L_; ++l) sums_[anc[l]] += contrib;
        }
    }

    bool evaluate(const double* f, double* cost, double* grad, double r) const {
        accumulate(f);
        double total = 0.0;
        for (std::size_t id = 0; id < sums_.size(); ++id) {
            powered_[id] = 0.0;
            if (sums_[id] > 0.0) {
                powered_[id] = std::pow(coef_[id] * std::pow(sums_[id], 1.0 / p_), r);
                total += powered_[id] / r;
            }
        }
        for (std::size_t k = 0; k < slots_.size(); ++k) total -= cv_ * target_[k] * f[k];
        *cost = total;
        if (!std::isfinite(total)) return false;
        if (grad != nullptr) {
            for (std::size_t s = 0; s < cells_.size(); ++s) {
                const double m = cell_multiplier(s);
                for (auto k = slot_begin_[s]; k < slot_begin_[s + 1]; ++k) {
                    grad[k] = cv_ * (m * direction(s, f[k]) - target_[k]);
                }
            }
            for (std::size_t k = 0; k < slots_.size(); ++k) {
                if (!std::isfinite(grad[k])) return false;
            }
        }
        return true;
    }

    /// Upper bound (scaled units, exponent r_conj) from the splitting formed by
    /// the per-cube gradient pieces of ||f||^r / r, with the residual g - sum
    /// placed on the finest cubes. evaluate() must have run at f.
    double splitting_cost(const double* f, double r_conj, const ExponentSet& e) const {
        const double p_conj = e.p_conj();
        const double q_conj = e.q_conj();
        std::vector<double> piece_sums(lat_.cube_count(), 0.0);
        std::vector<double> finest(d_);
        for (std::size_t s = 0; s < cells_.size(); ++s) {
            const auto anc = lat_.ancestors(cells_[s]);
            const double m = cell_multiplier(s);
            std::fill(finest.begin(), finest.end(), 0.0);
            double coarse_norm = 0.0;  // |w(c)|_{q'} where w_i = u^{p-q} |f_i|^{q-1} sgn f_i
            for (auto k = slot_begin_[s]; k < slot_begin_[s + 1]; ++k) {
                const double w = direction(s, f[k]);
                coarse_norm += std::pow(std::abs(w), q_conj);
                const double residual = target_[k] - m * w;
                finest[static_cast<std::size_t>(slots_[k].comp)] =
                    (sums_[anc[L_ - 1]] > 0.0 ? powered_[anc[L_ - 1]] / sums_[anc[L_ - 1]] : 0.0) * w + residual;
            }
            coarse_norm = std::pow(coarse_norm, 1.0 / q_conj);
            for (int l = 0; l + 1 < L_; ++l) {
                const auto id = anc[l];
                if (sums_[id] > 0.0) piece_sums[id] += cv_ * std::pow(powered_[id] / sums_[id] * coarse_norm, p_conj);
            }
            piece_sums[anc[L_ - 1]] += cv_ * std::pow(value_norm_unchecked(finest, q_conj), p_conj);
        }
        std::vector<double> terms;
        for (std::size_t id = 0; id < piece_sums.size(); ++id) {
            if (piece_sums[id] > 0.0) {
                terms.push_back(std::pow(piece_sums[id], 1.0 / p_conj) / coef_[id]);
            }
        }
        return lr_aggregate(terms, r_conj);
    }

    GridFunction to_function(const double* f, const GridFunction& like) const {
        GridFunction out(like.lattice(), like.dim());
        for (std::size_t k = 0; k < slots_.size(); ++k) out.at(slots_[k].cell, slots_[k].comp) = f[k];
        return out;
    }

private:
    struct Slot {
        std::size_t cell;
        int comp;
    };

    // sum_{Q containing cell} T_Q^r / S_Q
    double cell_multiplier(std::size_t s) const {
        const auto anc = lat_.ancestors(cells_[s]);
        double m = 0.0;
        for (int l = 0; l < L_; ++l) {
            if (sums_[anc[l]] > 0.0) m += powered_[anc[l]] / sums_[anc[l]];
        }
        return m;
    }

    // u^{p-q} |f_i|^{q-1} sgn f_i, the derivative of u^p / p in f_i
    double direction(std::size_t s, double fi) const {
        if (u_[s] == 0.0 || fi == 0.0) return 0.0;
        return std::copysign(std::pow(u_[s], p_ - 1.0) * std::pow(std::abs(fi) / u_[s], q_ - 1.0), fi);
    }

    const Lattice& lat_;
    int L_;
    int d_;
    double p_;
    double q_;
    double cv_;
    std::vector<Slot> slots_;
    std::vector<std::size_t> cells_;
    std::vector<std::size_t> slot_begin_;
    std::vector<double> coef_;  // |Q|^{1/t-1/p}
    std::vector<double> target_;
    mutable std::vector<double> sums_;
    mutable std::vector<double> powered_;
    mutable std::vector<double> u_;
};

// r = inf. Restricted to f(c) = nu_c dualdir(g(c)), the dual problem is
//   max sum_c |c| h_c nu_c  subject to  phi_Q(nu) = sum_{c in Q} |c| |nu_c|^p <= |Q|^{1-p/t}
// for every cube Q meeting the support. It is solved by a log-barrier path with
// Newton centring; the multipliers 1/(t slack_Q) give the block splitting
// X_{Q,c} = mu_Q p nu_c^{p-1}, whose remainder goes to the finest cube.
struct SupSolution {
    std::vector<std::size_t> cells;
    std::vector<double> split;  // [support cell][level], scaled units
    GridFunction dual;
    double scale = 1.0;
    double upper = kInf;
    double lower = 0.0;
    int iterations = 0;
};

SupSolution solve_sup(const GridFunction& g, const ExponentSet& e, const SolverOptions& opts) {
    const auto& lat = *g.lattice();
    const int L = lat.levels();
    const double p = e.p();
    const double cv = lat.cell_volume();
    const double q_conj = e.q_conj();

    SupSolution sol;
    sol.scale = block_norm_upper(g, e);
    std::vector<double> h;
    for (std::size_t c = 0; c < lat.cell_count(); ++c) {
        const double v = value_norm_unchecked(g.cell(c), q_conj);
        if (v > 0.0) {
            sol.cells.push_back(c);
            h.push_back(v / sol.scale);
        }
    }
    const auto S = static_cast<Eigen::Index>(sol.cells.size());

    // Constraint k <-> cube touched[k]; membership[s * L + l] = constraint of level-l ancestor.
    std::vector<long> slot(lat.cube_count(), -1);
    std::vector<std::uint32_t> touched;
    std::vector<std::vector<Eigen::Index>> members;
    std::vector<std::size_t> membership(sol.cells.size() * L);
    for (Eigen::Index s = 0; s < S; ++s) {
        const auto anc = lat.ancestors(sol.cells[s]);
        for (int l = 0; l < L; ++l) {
            if (slot[anc[l]] < 0) {
                slot[anc[l]] = static_cast<long>(touched.size());
                touched.push_back(anc[l]);
                members.emplace_back();
            }
            const auto k = static_cast<std::size_t>(slot[anc[l]]);
            members[k].push_back(s);
            membership[s * L + l] = k;
        }
    }
    const std::size_t m = touched.size();
    std::vector<double> bound(m);
    for (std::size_t k = 0; k < m; ++k) bound[k] = cube_power(lat.cube(touched[k]).j, lat.n(), 1.0 - p / e.t());

    auto slacks = [&](const Eigen::VectorXd& nu, std::vector<double>& out) {
        bool feasible = true;
        for (std::size_t k = 0; k < m; ++k) {
            double phi = 0.0;
            for (auto s : members[k]) phi += cv * std::pow(std::abs(nu[s]), p);
            out[k] = bound[k] - phi;
            feasible = feasible && out[k] > 0.0;
        }
        return feasible;
    };
    Eigen::VectorXd hv(S);
    for (Eigen::Index s = 0; s < S; ++s) hv[s] = cv * h[static_cast<std::size_t>(s)];

    // Strictly feasible start: half the largest feasible constant.
    double start = kInf;
    for (std::size_t k = 0; k < m; ++k) {
        start = std::min(start, std::pow(bound[k] / (cv * static_cast<double>(members[k].size())), 1.0 / p));
    }
    Eigen::VectorXd nu = Eigen::VectorXd::Constant(S, 0.5 * start);
    std::vector<double> slack(m);
    double t = static_cast<double>(m) / std::max(hv.dot(nu), 1e-300);


    std::vector<double> dual_dir(static_cast<std::size_t>(g.dim()));
    auto certify = [&] {
        std::vector<double> split(sol.cells.size() * L, 0.0);
        for (Eigen::Index s = 0; s < S; ++s) {
            const double dphi = p * std::pow(std::abs(nu[s]), p - 1.0);
            double acc = 0.0;
            for (int l = 0; l + 1 < L; ++l) {
                const double x = dphi / (t * slack[membership[s * L + l]]);
                split[s * L + l] = x;
                acc += x;
            }
            split[s * L + L - 1] = h[static_cast<std::size_t>(s)] - acc;
        }
        std::vector<double> sums(m, 0.0);
        for (Eigen::Index s = 0; s < S; ++s) {
            for (int l = 0; l < L; ++l) sums[membership[s * L + l]] += cv * std::pow(std::abs(split[s * L + l]), e.p_conj());
        }
        double upper = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            upper += cube_power(lat.cube(touched[k]).j, lat.n(), 1.0 / p - 1.0 / e.t()) * std::pow(sums[k], 1.0 / e.p_conj());
        }
        if (upper * sol.scale < sol.upper) {
            sol.upper = upper * sol.scale;
            sol.split = std::move(split);
        }

        GridFunction f(g.lattice(), g.dim());
        for (Eigen::Index s = 0; s < S; ++s) {
            dual_direction(g.cell(sol.cells[s]), q_conj, dual_dir);
            for (int i = 0; i < g.dim(); ++i) f.at(sol.cells[s], i) = nu[s] * dual_dir[static_cast<std::size_t>(i)];
        }
        const double lower = lower_bound_from(g, f, e);
        if (lower > sol.lower) {
            sol.lower = lower;
            sol.dual = std::move(f);
        }
    };

    // Slacks are carried incrementally and barrier decreases are formed from
    // log1p/expm1 differences, so late centring steps do not drown in cancellation.
    slacks(nu, slack);
    std::vector<double> delta(m);
    auto phi_change = [&](const Eigen::VectorXd& dx, double alpha) {
        for (Eigen::Index s = 0; s < S; ++s) {
            if (!(nu[s] + alpha * dx[s] > 0.0)) return false;
        }
        for (std::size_t k = 0; k < m; ++k) {
            double acc = 0.0;
            for (auto s : members[k]) {
                acc += cv * std::pow(nu[s], p) * std::expm1(p * std::log1p(alpha * dx[s] / nu[s]));
            }
            delta[k] = acc;
            if (!(slack[k] - acc > 0.0)) return false;
        }
        return true;
    };

    Eigen::MatrixXd H(S, S);
    Eigen::VectorXd grad(S), u(S), step(S);
    const double target = 0.1 * opts.tol;
    double last_gap = kInf;
    int stalled = 0;
    for (int outer = 0; outer < 80 && sol.iterations < opts.max_iters; ++outer) {
        for (int inner = 0; inner < 200 && sol.iterations < opts.max_iters; ++inner) {
            ++sol.iterations;
            grad = -t * hv;
            H.setZero();
            for (std::size_t k = 0; k < m; ++k) {
                u.setZero();
                for (auto s : members[k]) {
                    u[s] = p * cv * std::pow(nu[s], p - 1.0);
                    H(s, s) += p * (p - 1.0) * cv * std::pow(nu[s], p - 2.0) / slack[k];
                }
                grad += u / slack[k];
                for (auto s1 : members[k]) {
                    for (auto s2 : members[k]) H(s1, s2) += u[s1] * u[s2] / (slack[k] * slack[k]);
                }
            }
            Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
            step = -ldlt.solve(grad);
            const double decrement = -grad.dot(step);
            if (!std::isfinite(decrement) || decrement < 1e-14) break;
            double alpha = 1.0;
            bool moved = false;
            for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
                if (!phi_change(step, alpha)) continue;
                double change = -t * alpha * hv.dot(step);
                for (std::size_t k = 0; k < m; ++k) change -= std::log1p(-delta[k] / slack[k]);
                if (change <= -0.25 * alpha * decrement) {
                    moved = true;
                    break;
                }
            }
            if (!moved) break;
            nu += alpha * step;
            for (std::size_t k = 0; k < m; ++k) slack[k] -= delta[k];
        }
        certify();
        const double gap = relative_gap(sol.upper, sol.lower);
        if (gap <= target) break;
        // Past about 1e-8 the centring loses precision; stop once the gap stalls.
        stalled = gap < 0.999 * last_gap ? 0 : stalled + 1;
        if (stalled >= 3) break;
        last_gap = std::min(last_gap, gap);
        t *= 8.0;
    }
    return sol;
}

}  // namespace

double block_norm_upper(const GridFunction& g, const ExponentSet& e) {
    e.require_block_regime();
    if (g.is_zero()) return 0.0;
    // |Q|^{1/p-1/t} increases with |Q|, so the smallest covering cube is best.
    return capacity_lambda(g, smallest_cover(g), e);
}

double single_cell_block_norm(const GridFunction& g, const ExponentSet& e) {
    e.require_block_regime();
    const auto& lat = *g.lattice();
    std::size_t cell = lat.cell_count();
    for (std::size_t c = 0; c < lat.cell_count(); ++c) {
        if (value_norm_unchecked(g.cell(c), 2.0) == 0.0) continue;
        if (cell != lat.cell_count()) throw Error(ErrorCode::domain, "single-cell closed form needs support on one cell");
        cell = c;
    }
    if (cell == lat.cell_count()) return 0.0;
    std::vector<double> inverse;
    for (auto id : lat.ancestors(cell)) {
        inverse.push_back(1.0 / cube_power(lat.cube(id).j, lat.n(), 1.0 / e.t_conj() - 1.0 / e.p_conj()));
    }
    return value_norm_unchecked(g.cell(cell), e.q_conj()) * std::pow(lat.cell_volume(), 1.0 / e.p_conj()) /
           lr_aggregate(inverse, e.r());
}

namespace {

void keep_cheaper(BlockNormResult& result, BlockDecomposition candidate, double r_conj) {
    const double cost = candidate.cost(r_conj);
    if (cost < result.value) {
        result.value = cost;
        result.decomposition = std::move(candidate);
    }
}

}  // namespace

BlockNormResult block_norm(const GridFunction& g, const ExponentSet& e, const SolverOptions& opts) {
    e.require_block_regime();
    check_options(opts);
    BlockNormResult result;
    if (g.is_zero()) return result;

    if (e.r_infinite()) {
        auto sol = solve_sup(g, e, opts);
        result.iterations = sol.iterations;
        if (relative_gap(sol.upper, sol.lower) > opts.tol) {
            throw SolverError("block norm barrier stopped with relative gap " +
                                  std::to_string(relative_gap(sol.upper, sol.lower)) + " above tolerance",
                              sol.upper, sol.lower);
        }
        result.decomposition = decomposition_from(sol.cells, sol.split, g, e, sol.scale);
        result.value = result.decomposition.cost(1.0);
        keep_cheaper(result, one_block(g, e), 1.0);
        result.lower_bound = std::min(sol.lower, result.value);
        return result;
    }

    const double scale = block_norm_upper(g, e);
    const double r_conj = e.r_conj();
    PrimalProblem P(g, e, scale);
    std::vector<double> x = P.initial_point(e.r());
    std::vector<double> best_x = x;
    double best_ub = kInf;
    double best_lb = 0.0;
    int used = 0;

    auto assess = [&] {
        const double ub = P.true_cost(x.data(), r_conj) * scale;
        best_lb = std::max(best_lb, lower_bound_from(g, P.implied_dual(x.data(), g, e.q_conj(), r_conj), e));
        if (ub < best_ub) {
            best_ub = ub;
            best_x = x;
        }
        return relative_gap(best_ub, best_lb) <= opts.tol;
    };
    auto eval = [&P, r_conj](const double* xx, double* cost, double* grad) {
        return P.evaluate(xx, cost, grad, r_conj);
    };

    bool done = assess() || P.free_count() == 0;
    // Restart L-BFGS only while restarts still improve the primal value.
    for (double previous = kInf; !done && used < opts.max_iters && best_ub < previous * (1.0 - 1e-14);) {
        previous = best_ub;
        used += minimize(x, eval, std::min(opts.max_iters - used, 4000), assess);
        done = assess();
    }
    result.iterations = used;
    if (!done) {
        throw SolverError("block norm optimizer stopped with relative gap " +
                              std::to_string(relative_gap(best_ub, best_lb)) + " above tolerance",
                          best_ub, best_lb);
    }
    P.expand(best_x.data());
    result.decomposition = decomposition_from(P.cells(), P.splits(), g, e, scale);
    result.value = result.decomposition.cost(r_conj);
    keep_cheaper(result, one_block(g, e), r_conj);
    result.lower_bound = std::min(best_lb, result.value);
    return result;
}

DualNormResult dual_norm(const GridFunction& g, const ExponentSet& e, const SolverOptions& opts) {
    e.require_block_regime();
    check_options(opts);
    DualNormResult result;
    result.certificate.f_star = GridFunction(g.lattice(), g.dim());
    if (g.is_zero()) {
        result.converged = true;
        return result;
    }

    GridFunction best_f;
    if (e.r_infinite()) {
        auto sol = solve_sup(g, e, opts);
        result.iterations = sol.iterations;
        result.upper_bound = sol.upper;
        result.converged = relative_gap(sol.upper, sol.lower) <= opts.tol;
        best_f = std::move(sol.dual);
    } else {
        DualProblem D(g, e);
        const double scale = block_norm_upper(g, e);
        const double r = e.r();
        D.set_target(g, scale);
        std::vector<double> f = D.initial_point(e.q_conj());
        D.ray_scale(f, r);
        double best_lb = 0.0;
        double best_ub = kInf;
        auto assess = [&] {
            double cost = 0.0;
            D.evaluate(f.data(), &cost, nullptr, r);
            best_ub = std::min(best_ub, D.splitting_cost(f.data(), e.r_conj(), e) * scale);
            auto candidate = D.to_function(f.data(), g);
            const double lb = lower_bound_from(g, candidate, e);
            if (lb > best_lb) {
                best_lb = lb;
                best_f = std::move(candidate);
            }
            return relative_gap(best_ub, best_lb) <= opts.tol;
        };
        auto eval = [&D, r](const double* ff, double* cost, double* grad) { return D.evaluate(ff, cost, grad, r); };
        bool done = assess();
        int used = 0;
        for (double previous = 0.0; !done && used < opts.max_iters && best_lb > previous * (1.0 + 1e-14);) {
            previous = best_lb;
            used += minimize(f, eval, std::min(opts.max_iters - used, 4000), assess);
            done = assess();
        }
        result.iterations = used;
        result.upper_bound = best_ub;
        result.converged = done;
    }

    if (best_f.lattice() == nullptr) return result;
    const double norm = bm_norm(best_f, e);
    if (norm > 0.0) best_f *= 1.0 / norm;
    result.certificate.value = pairing(g, best_f);
    result.certificate.f_star = std::move(best_f);
    result.value = std::max(0.0, result.certificate.value);
    return result;
}

FiniteDecomposition finite_decomposition(const GridFunction& g, const ExponentSet& e, double tol,
                                         const SolverOptions& opts) {
    e.require_block_regime();
    if (!(tol > 0.0)) throw Error(ErrorCode::domain, "pruning tolerance must be positive");
    FiniteDecomposition out;
    if (g.is_zero()) return out;

    const auto& lat = *g.lattice();
    const double r_conj = e.r_conj();
    const auto optimum = block_norm(g, e, opts);
    out.optimum = optimum.value;
    const double budget = (1.0 + tol) * optimum.value;

    auto finish = [&](BlockDecomposition dec) {
        GridFunction residual = g;
        residual -= dec.reconstruct(g);
        dec.residual_norm = lp_norm_on_cube(residual, lat.cube(0), e.p_conj(), e.q_conj());
        out.cost = dec.cost(r_conj);
        out.decomposition = std::move(dec);
        return out;
    };

    // One block on the smallest cube covering the support.
    if (auto single = one_block(g, e); single.cost(r_conj) <= budget) return finish(std::move(single));

    double top = 0.0;
    for (const auto& entry : optimum.decomposition.entries) top = std::max(top, entry.lambda);
    BlockDecomposition kept;
    GridFunction tail(g.lattice(), g.dim());
    bool pruned = false;
    for (const auto& entry : optimum.decomposition.entries) {
        if (entry.lambda < tol * top) {
            tail.axpy(entry.lambda, entry.block);
            pruned = true;
        } else {
            kept.entries.push_back(entry);
        }
    }
    if (pruned && !tail.is_zero()) {
        const auto C = smallest_cover(tail);
        auto it = std::find_if(kept.entries.begin(), kept.entries.end(), [&](const auto& x) { return x.cube == C; });
        GridFunction piece = tail;
        if (it != kept.entries.end()) {
            piece.axpy(it->lambda, it->block);
            kept.entries.erase(it);
        }
        const double lambda = capacity_lambda(piece, C, e);
        if (lambda > 0.0) kept.entries.push_back({C, lambda, (1.0 / lambda) * piece});
        std::sort(kept.entries.begin(), kept.entries.end(), [](const auto& a, const auto& b) { return a.cube < b.cube; });
    }
    if (kept.cost(r_conj) <= budget) return finish(std::move(kept));

    out.fell_back = true;
    return finish(optimum.decomposition);
}

}  // namespace bmkit
