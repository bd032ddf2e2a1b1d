#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "bmkit/grid_function.hpp"

namespace bmkit {

/// Scalar (d = 1) convolution kernel with its L^1 norm cached.
class KernelSpec {
public:
    explicit KernelSpec(GridFunction kernel);

    const GridFunction& kernel() const { return kernel_; }
    double l1_norm() const { return l1_norm_; }

    /// Dirac mass 1/|cell| on one cell: convolution with it is translation by that cell.
    static KernelSpec dirac(LatticePtr lattice, std::size_t cell);

private:
    GridFunction kernel_;
    double l1_norm_ = 0.0;
};

/// Conditional expectation onto scale-k cubes.
GridFunction average_Ek(const GridFunction& f, int k);

/// Periodic shift (tau_y f)(x) = f(x - y) by whole cells; needs a periodic lattice.
GridFunction translate(const GridFunction& f, std::array<std::int64_t, 2> cells);

/// Same shift given in window coordinates; y must be a whole number of cells per axis.
GridFunction translate(const GridFunction& f, std::array<double, 2> y);

/// Cyclic convolution (f * k)(x) = sum_c k(c) f(x - c) |c|.
GridFunction convolve(const GridFunction& f, const KernelSpec& kernel);

enum class MaximalVariant { scalar_X, componentwise };

/// Dyadic maximal operator over the lattice family.
/// scalar_X: (max_{Q ∋ x} avg_Q |f|_{l^q}^eta)^{1/eta}, returned with d = 1.
/// componentwise: the same applied to each |f_i| separately.
/// eta defaults to 1.
GridFunction maximal(const GridFunction& f, MaximalVariant variant, double q, std::optional<double> eta = std::nullopt);

}  // namespace bmkit
