#include "bmkit/decomposition.hpp"

#include <algorithm>
#include <cmath>

#include "bmkit/bm_norms.hpp"

namespace bmkit {

double BlockDecomposition::cost(double r_conj) const {
    std::vector<double> lambdas;
    lambdas.reserve(entries.size());
    for (const auto& e : entries) lambdas.push_back(std::abs(e.lambda));
    return lr_aggregate(lambdas, r_conj);
}

GridFunction BlockDecomposition::reconstruct(const GridFunction& like) const {
    GridFunction sum(like.lattice(), like.dim());
    for (const auto& e : entries) sum.axpy(e.lambda, e.block);
    return sum;
}

double max_capacity_ratio(const BlockDecomposition& dec, const ExponentSet& e) {
    double worst = 0.0;
    for (const auto& entry : dec.entries) {
        const int n = entry.block.config().n;
        const double norm = lp_norm_on_cube(entry.block, entry.cube, e.p_conj(), e.q_conj());
        const double capacity = cube_power(entry.cube.j, n, 1.0 / e.t() - 1.0 / e.p());
        worst = std::max(worst, norm / capacity);
    }
    return worst;
}

bool supports_ok(const BlockDecomposition& dec) {
    for (const auto& entry : dec.entries) {
        const auto& lat = *entry.block.lattice();
        const auto id = lat.cube_id(entry.cube);
        std::vector<char> inside(lat.cell_count(), 0);
        for (auto c : lat.cube_cells(id)) inside[c] = 1;
        for (std::size_t c = 0; c < lat.cell_count(); ++c) {
            if (inside[c]) continue;
            for (double v : entry.block.cell(c)) {
                if (v != 0.0) return false;
            }
        }
    }
    return true;
}

}  // namespace bmkit
