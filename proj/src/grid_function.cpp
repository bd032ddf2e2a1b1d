#include "bmkit/grid_function.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "bmkit/error.hpp"

namespace bmkit {

GridFunction::GridFunction(LatticePtr lattice, int d) : GridFunction(lattice, d, {}) {}

GridFunction::GridFunction(LatticePtr lattice, int d, std::vector<double> values)
    : lattice_(std::move(lattice)), d_(d), values_(std::move(values)) {
    if (!lattice_) throw Error(ErrorCode::domain, "grid function needs a lattice");
    if (d_ < 1) throw Error(ErrorCode::domain, "vector dimension d must be >= 1");
    const std::size_t expected = lattice_->cell_count() * static_cast<std::size_t>(d_);
    if (values_.empty()) values_.assign(expected, 0.0);
    if (values_.size() != expected) {
        throw Error(ErrorCode::shape, "grid function expects " + std::to_string(expected) + " values, got " +
                                          std::to_string(values_.size()));
    }
    for (double v : values_) {
        if (!std::isfinite(v)) throw Error(ErrorCode::domain, "grid function values must be finite");
    }
}

bool GridFunction::same_shape(const GridFunction& other) const {
    return lattice_ && other.lattice_ && d_ == other.d_ && config() == other.config();
}

bool GridFunction::is_zero() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

namespace {
void require_same(const GridFunction& a, const GridFunction& b) {
    if (!a.same_shape(b)) throw Error(ErrorCode::shape, "grid functions differ in lattice or vector dimension");
}
}  // namespace

GridFunction& GridFunction::operator+=(const GridFunction& other) {
    return axpy(1.0, other);
}

GridFunction& GridFunction::operator-=(const GridFunction& other) {
    return axpy(-1.0, other);
}

GridFunction& GridFunction::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

GridFunction& GridFunction::axpy(double s, const GridFunction& other) {
    require_same(*this, other);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += s * other.values_[k];
    return *this;
}

GridFunction GridFunction::restricted_to(const CubeIndex& cube) const {
    GridFunction out(lattice_, d_);
    for (auto c : lattice_->cube_cells(lattice_->cube_id(cube))) {
        std::copy_n(cell(c).begin(), d_, out.cell(c).begin());
    }
    return out;
}

GridFunction operator+(GridFunction a, const GridFunction& b) {
    return a += b;
}

GridFunction operator-(GridFunction a, const GridFunction& b) {
    return a -= b;
}

GridFunction operator*(double s, GridFunction a) {
    return a *= s;
}

double value_norm_unchecked(std::span<const double> v, double s) {
    double scale = 0.0;
    for (double x : v) scale = std::max(scale, std::abs(x));
    if (scale == 0.0) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += std::pow(std::abs(x) / scale, s);
    return scale * std::pow(acc, 1.0 / s);
}

double value_norm(std::span<const double> v, double s) {
    if (!(s > 1.0) || !std::isfinite(s)) {
        throw Error(ErrorCode::domain, "value norm exponent must lie in (1, inf)");
    }
    for (double x : v) {
        if (!std::isfinite(x)) throw Error(ErrorCode::domain, "value norm of a non-finite vector");
    }
    return value_norm_unchecked(v, s);
}

double lp_norm_on_cube(const GridFunction& f, const CubeIndex& cube, double p, double q) {
    if (!(p >= 1.0) || !std::isfinite(p)) throw Error(ErrorCode::domain, "L^p exponent must be a finite real >= 1");
    if (!(q > 1.0)) throw Error(ErrorCode::domain, "l^q exponent must exceed 1");
    const auto& lat = *f.lattice();
    const auto id = lat.cube_id(cube);
    double acc = 0.0;
    for (auto c : lat.cube_cells(id)) acc += std::pow(value_norm_unchecked(f.cell(c), q), p);
    return std::pow(acc * lat.cell_volume(), 1.0 / p);
}

double pairing(const GridFunction& g, const GridFunction& f) {
    require_same(g, f);
    double acc = 0.0;
    const auto gv = g.values();
    const auto fv = f.values();
    for (std::size_t k = 0; k < gv.size(); ++k) acc += gv[k] * fv[k];
    return acc * g.lattice()->cell_volume();
}

GridFunction random_function(std::uint64_t seed, LatticePtr lattice, int d, double sparsity) {
    if (!(sparsity >= 0.0 && sparsity <= 1.0)) throw Error(ErrorCode::domain, "sparsity must lie in [0, 1]");
    GridFunction f(lattice, d);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : f.values()) v = normal(rng);
    const std::size_t cells = f.cell_count();
    const auto zeroed = static_cast<std::size_t>(std::llround(sparsity * static_cast<double>(cells)));
    if (zeroed > 0) {
        std::vector<std::size_t> order(cells);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t k = 0; k < zeroed; ++k) std::ranges::fill(f.cell(order[k]), 0.0);
    }
    return f;
}

GridFunction random_function(std::uint64_t seed, const LatticeConfig& config, int d, double sparsity) {
    return random_function(seed, Lattice::make(config), d, sparsity);
}

GridFunction prolongate(const GridFunction& f, int extra) {
    if (extra < 0) throw Error(ErrorCode::domain, "prolongation depth must be nonnegative");
    auto cfg = f.config();
    cfg.J += extra;
    auto fine = Lattice::make(cfg);
    GridFunction out(fine, f.dim());
    for (std::size_t c = 0; c < out.cell_count(); ++c) {
        auto xy = fine->cell_coords(c);
        xy[0] >>= extra;
        if (cfg.n == 2) xy[1] >>= extra;
        const auto src = f.lattice()->cell_at(xy);
        std::ranges::copy(f.cell(src), out.cell(c).begin());
    }
    return out;
}

GridFunction window_indicator(LatticePtr lattice) {
    GridFunction f(std::move(lattice), 1);
    std::ranges::fill(f.values(), 1.0);
    return f;
}

}  // namespace bmkit
