#pragma once

#include <vector>

#include "bmkit/exponents.hpp"
#include "bmkit/grid_function.hpp"

namespace bmkit {

/// One term lambda * b of a block expansion; b is supported on `cube`.
struct BlockEntry {
    CubeIndex cube;
    double lambda = 0.0;
    GridFunction block;
};

struct BlockDecomposition {
    std::vector<BlockEntry> entries;
    double residual_norm = 0.0;  // ||f - sum lambda b||_{L^{p'}(l^{q'})}

    /// (sum lambda^{r'})^{1/r'}
    double cost(double r_conj) const;
    GridFunction reconstruct(const GridFunction& like) const;
};

/// Largest capacity violation max_Q ||b_Q||_{L^{p'}(l^{q'})} / |Q|^{1/t-1/p};
/// a valid decomposition has this <= 1 (up to rounding). Also checks supports.
double max_capacity_ratio(const BlockDecomposition& dec, const ExponentSet& e);
bool supports_ok(const BlockDecomposition& dec);

}  // namespace bmkit
