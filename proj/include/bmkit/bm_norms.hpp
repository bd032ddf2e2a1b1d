#pragma once

#include <span>
#include <vector>

#include "bmkit/decomposition.hpp"
#include "bmkit/exponents.hpp"
#include "bmkit/grid_function.hpp"

namespace bmkit {

struct CubeTerm {
    CubeIndex cube;
    double term = 0.0;  // |Q|^{1/t-1/p} ||f||_{L^p(Q; l^q)}
};

using CubeTermTable = std::vector<CubeTerm>;

/// l^r norm of nonnegative values (max when r = inf), computed with
/// max-scaling so large r does not overflow.
double lr_aggregate(std::span<const double> values, double r);

/// sum_{cells in Q} |f(cell)|_{l^q}^p |cell| for every cube, in enumeration
/// order; each cube sums its cells in ascending cell index.
std::vector<double> cube_power_sums(const GridFunction& f, double p, double q);

CubeTermTable cube_terms(const GridFunction& f, const ExponentSet& e);

/// ||f||_{M_p^{t,r}(l^q)} truncated to the lattice family.
double bm_norm(const GridFunction& f, const ExponentSet& e);

/// Scale-v slice of the BM norm: (sum_m term(Q_{v,m})^r)^{1/r}.
double per_scale_bm(const GridFunction& f, const ExponentSet& e, int v);

/// Norm of f in the slice space (E_{p'}^{t',r'})_j(l^{q'}).
double slice_norm(const GridFunction& f, const ExponentSet& e, int j);

/// Canonical scale-j expansion f = sum_k lambda_k b_k with
/// ||b_k||_{L^{p'}(l^{q'})} = |Q_k|^{1/p'-1/t'} exactly; the l^{r'} norm of
/// lambda equals slice_norm(f, e, j) when f is supported at scale j cubes.
BlockDecomposition slice_decomposition(const GridFunction& f, const ExponentSet& e, int j);

/// Sampled ball-average functional: dyadic radii 2^{-j}, j in [j_min, J],
/// weighted by ln 2 (dt/t), and ball centres on a grid of spacing
/// cell_side / center_density covering the window plus one window width on
/// each side. Ball L^p norms use exact interval overlap in 1D and
/// cell-centre membership in 2D. Requires r < inf.
double continuous_char_estimate(const GridFunction& f, const ExponentSet& e, int center_density = 2);

}  // namespace bmkit
