#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bmkit/lattice.hpp"

namespace bmkit {

/// Vector-valued function, constant on each finest cell of a lattice,
/// with values in R^d (the truncation of l^q or l^{q'}).
/// Values are stored cell-major: values()[cell * d + i].
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(LatticePtr lattice, int d);
    GridFunction(LatticePtr lattice, int d, std::vector<double> values);

    const LatticePtr& lattice() const { return lattice_; }
    const LatticeConfig& config() const { return lattice_->config(); }
    int dim() const { return d_; }
    std::size_t cell_count() const { return lattice_->cell_count(); }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    std::span<const double> cell(std::size_t c) const { return {values_.data() + c * d_, static_cast<std::size_t>(d_)}; }
    std::span<double> cell(std::size_t c) { return {values_.data() + c * d_, static_cast<std::size_t>(d_)}; }
    double& at(std::size_t c, int i) { return values_[c * d_ + i]; }
    double at(std::size_t c, int i) const { return values_[c * d_ + i]; }

    bool same_shape(const GridFunction& other) const;
    bool is_zero() const;

    GridFunction& operator+=(const GridFunction& other);
    GridFunction& operator-=(const GridFunction& other);
    GridFunction& operator*=(double s);
    /// *this += s * other
    GridFunction& axpy(double s, const GridFunction& other);

    /// Restriction to the cube (zero elsewhere).
    GridFunction restricted_to(const CubeIndex& cube) const;

private:
    LatticePtr lattice_;
    int d_ = 0;
    std::vector<double> values_;
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(double s, GridFunction a);

/// (sum_i |v_i|^s)^{1/s}; s must lie in (1, inf).
double value_norm(std::span<const double> v, double s);

/// Unchecked variant used in inner loops (s >= 1, finite entries assumed).
double value_norm_unchecked(std::span<const double> v, double s);

/// (sum_{cells in Q} |f(cell)|_{l^q}^p |cell|)^{1/p}, exact for cellwise-constant f.
double lp_norm_on_cube(const GridFunction& f, const CubeIndex& cube, double p, double q);

/// sum_cells sum_i g_i f_i |cell|.
double pairing(const GridFunction& g, const GridFunction& f);

/// Deterministic test corpus member: entries i.i.d. standard normal
/// (std::normal_distribution over std::mt19937_64 seeded with `seed`),
/// then round(sparsity * cells) cells, chosen by a seeded shuffle, are zeroed.
GridFunction random_function(std::uint64_t seed, const LatticeConfig& config, int d, double sparsity);
GridFunction random_function(std::uint64_t seed, LatticePtr lattice, int d, double sparsity);

/// Same function represented on the lattice refined by `extra` levels.
GridFunction prolongate(const GridFunction& f, int extra);

/// Indicator of the whole window, d = 1.
GridFunction window_indicator(LatticePtr lattice);

}  // namespace bmkit
