#include "bmkit/operators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bmkit/error.hpp"

namespace bmkit {

KernelSpec::KernelSpec(GridFunction kernel) : kernel_(std::move(kernel)) {
    if (kernel_.lattice() == nullptr || kernel_.dim() != 1) throw Error(ErrorCode::shape, "kernels are scalar (d = 1)");
    for (double v : kernel_.values()) l1_norm_ += std::abs(v);
    l1_norm_ *= kernel_.lattice()->cell_volume();
}

KernelSpec KernelSpec::dirac(LatticePtr lattice, std::size_t cell) {
    GridFunction k(lattice, 1);
    k.at(cell, 0) = 1.0 / lattice->cell_volume();
    return KernelSpec(std::move(k));
}

GridFunction average_Ek(const GridFunction& f, int k) {
    const auto& lat = *f.lattice();
    const auto& cfg = lat.config();
    if (k < cfg.j_min || k > cfg.J) {
        throw Error(ErrorCode::domain, "E_k scale " + std::to_string(k) + " is outside the lattice");
    }
    if (k == cfg.J) return f;
    GridFunction out(f.lattice(), f.dim());
    std::vector<double> mean(static_cast<std::size_t>(f.dim()));
    for (auto id = lat.scale_begin(k); id < lat.scale_end(k); ++id) {
        const auto cells = lat.cube_cells(id);
        std::fill(mean.begin(), mean.end(), 0.0);
        for (auto c : cells) {
            for (int i = 0; i < f.dim(); ++i) mean[i] += f.at(c, i);
        }
        for (double& m : mean) m /= static_cast<double>(cells.size());
        for (auto c : cells) {
            for (int i = 0; i < f.dim(); ++i) out.at(c, i) = mean[i];
        }
    }
    return out;
}

namespace {

void require_periodic(const GridFunction& f) {
    if (!f.config().periodic) throw Error(ErrorCode::domain, "translation and convolution need a periodic lattice");
}

std::int64_t wrap(std::int64_t a, std::int64_t N) { return ((a % N) + N) % N; }

}  // namespace

GridFunction translate(const GridFunction& f, std::array<std::int64_t, 2> shift) {
    require_periodic(f);
    const auto& lat = *f.lattice();
    const auto N = lat.config().cells_per_axis();
    GridFunction out(f.lattice(), f.dim());
    for (std::size_t c = 0; c < lat.cell_count(); ++c) {
        auto x = lat.cell_coords(c);
        for (int a = 0; a < lat.n(); ++a) x[a] = wrap(x[a] + shift[a], N);
        const auto dst = lat.cell_at(x);
        for (int i = 0; i < f.dim(); ++i) out.at(dst, i) = f.at(c, i);
    }
    return out;
}

GridFunction translate(const GridFunction& f, std::array<double, 2> y) {
    const double side = f.config().cell_side();
    std::array<std::int64_t, 2> shift{0, 0};
    for (int a = 0; a < f.lattice()->n(); ++a) {
        const double cells = y[a] / side;
        const double rounded = std::round(cells);
        if (!std::isfinite(cells) || std::abs(cells - rounded) > 1e-9 * std::max(1.0, std::abs(cells))) {
            throw Error(ErrorCode::domain, "shift is not a whole number of cells");
        }
        shift[a] = static_cast<std::int64_t>(rounded);
    }
    return translate(f, shift);
}

GridFunction convolve(const GridFunction& f, const KernelSpec& kernel) {
    require_periodic(f);
    const auto& k = kernel.kernel();
    if (!(k.config() == f.config())) throw Error(ErrorCode::shape, "kernel and function live on different lattices");
    const auto& lat = *f.lattice();
    const auto N = lat.config().cells_per_axis();
    const double cv = lat.cell_volume();
    GridFunction out(f.lattice(), f.dim());
    for (std::size_t src = 0; src < lat.cell_count(); ++src) {
        const double w = k.at(src, 0) * cv;
        if (w == 0.0) continue;
        const auto y = lat.cell_coords(src);
        for (std::size_t c = 0; c < lat.cell_count(); ++c) {
            auto x = lat.cell_coords(c);
            for (int a = 0; a < lat.n(); ++a) x[a] = wrap(x[a] + y[a], N);
            const auto dst = lat.cell_at(x);
            for (int i = 0; i < f.dim(); ++i) out.at(dst, i) += w * f.at(c, i);
        }
    }
    return out;
}

GridFunction maximal(const GridFunction& f, MaximalVariant variant, double q, std::optional<double> eta) {
    const double power = eta.value_or(1.0);
    if (!(power > 0.0) || !std::isfinite(power)) throw Error(ErrorCode::domain, "maximal power eta must be positive");
    const auto& lat = *f.lattice();
    const int channels = variant == MaximalVariant::scalar_X ? 1 : f.dim();

    // Powered cell values, one channel per output component.
    std::vector<double> cell_pow(lat.cell_count() * channels);
    for (std::size_t c = 0; c < lat.cell_count(); ++c) {
        if (variant == MaximalVariant::scalar_X) {
            cell_pow[c] = std::pow(value_norm(f.cell(c), q), power);
        } else {
            for (int i = 0; i < channels; ++i) cell_pow[c * channels + i] = std::pow(std::abs(f.at(c, i)), power);
        }
    }
    std::vector<double> avg(lat.cube_count() * channels, 0.0);
    for (std::size_t id = 0; id < lat.cube_count(); ++id) {
        const auto cells = lat.cube_cells(id);
        for (auto c : cells) {
            for (int i = 0; i < channels; ++i) avg[id * channels + i] += cell_pow[c * channels + i];
        }
        for (int i = 0; i < channels; ++i) avg[id * channels + i] /= static_cast<double>(cells.size());
    }
    GridFunction out(f.lattice(), channels);
    for (std::size_t c = 0; c < lat.cell_count(); ++c) {
        for (int i = 0; i < channels; ++i) {
            double top = 0.0;
            for (auto id : lat.ancestors(c)) top = std::max(top, avg[id * channels + i]);
            out.at(c, i) = std::pow(top, 1.0 / power);
        }
    }
    return out;
}

}  // namespace bmkit
