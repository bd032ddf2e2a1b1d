#pragma once

#include "bmkit/decomposition.hpp"
#include "bmkit/exponents.hpp"
#include "bmkit/grid_function.hpp"

namespace bmkit {

struct SolverOptions {
    double tol = 1e-6;       // target relative gap between the certified bounds
    int max_iters = 20000;   // total L-BFGS iterations across restarts/stages
};

struct BlockNormResult {
    double value = 0.0;        // cost of `decomposition`, an upper bound
    double lower_bound = 0.0;  // certified by the dual candidate implied by the optimizer
    BlockDecomposition decomposition;
    int iterations = 0;
};

/// ||g||_{H_{p'}^{t',r'}(l^{q'})} as the infimum over per-cube splittings
/// g = sum_Q g_Q of (sum_Q (|Q|^{1/t'-1/p'} ||g_Q||_{L^{p'}(l^{q'})})^{r'})^{1/r'}.
/// Throws SolverError (carrying the best upper bound) when the certified
/// relative gap stays above opts.tol after opts.max_iters iterations.
BlockNormResult block_norm(const GridFunction& g, const ExponentSet& e, const SolverOptions& opts = {});

struct DualCertificate {
    GridFunction f_star;  // bm_norm(f_star) <= 1 (up to rounding)
    double value = 0.0;   // pairing(g, f_star)
};

struct DualNormResult {
    double value = 0.0;        // a lower bound for the block norm
    double upper_bound = 0.0;  // cost of the splitting read off the dual optimizer
    DualCertificate certificate;
    bool converged = false;    // false: gap above tol, value is still a valid lower bound
    int iterations = 0;
};

/// sup { pairing(g, f) : bm_norm(f) <= 1 }, computed from the minimizer of
/// ||f||_BM^r / r - pairing(g, f) and normalized radially.
DualNormResult dual_norm(const GridFunction& g, const ExponentSet& e, const SolverOptions& opts = {});

/// min over dyadic Q containing supp g of ||g||_{L^{p'}(l^{q'})} |Q|^{1/p-1/t}.
double block_norm_upper(const GridFunction& g, const ExponentSet& e);

/// Closed form for g supported on one finest cell with value v:
/// |v|_{q'} |cell|^{1/p'} (sum_{Q containing cell} |Q|^{-r(1/t'-1/p')})^{-1/r}.
double single_cell_block_norm(const GridFunction& g, const ExponentSet& e);

struct FiniteDecomposition {
    BlockDecomposition decomposition;
    double cost = 0.0;
    double optimum = 0.0;    // block_norm value it was derived from
    bool fell_back = false;  // pruning broke the (1 + tol) budget; unpruned returned
};

/// Few-term admissible expansion with cost <= (1 + tol) * block_norm(g).
/// Tries the one-block expansion on the smallest covering cube first, then
/// prunes optimizer entries with lambda < tol * max lambda and absorbs the
/// pruned tail into a single block on the smallest cube covering it.
FiniteDecomposition finite_decomposition(const GridFunction& g, const ExponentSet& e, double tol = 1e-3,
                                         const SolverOptions& opts = {});

}  // namespace bmkit
