#include "bmkit/bm_norms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "bmkit/error.hpp"

namespace bmkit {

double lr_aggregate(std::span<const double> values, double r) {
    double top = 0.0;
    for (double v : values) top = std::max(top, std::abs(v));
    if (r == kInf || top == 0.0) return top;
    double acc = 0.0;
    for (double v : values) acc += std::pow(std::abs(v) / top, r);
    return top * std::pow(acc, 1.0 / r);
}

std::vector<double> cube_power_sums(const GridFunction& f, double p, double q) {
    const auto& lat = *f.lattice();
    std::vector<double> cell_pow(lat.cell_count());
    for (std::size_t c = 0; c < lat.cell_count(); ++c) {
        cell_pow[c] = std::pow(value_norm_unchecked(f.cell(c), q), p) * lat.cell_volume();
    }
    std::vector<double> sums(lat.cube_count(), 0.0);
    for (std::size_t id = 0; id < lat.cube_count(); ++id) {
        double acc = 0.0;
        for (auto c : lat.cube_cells(id)) acc += cell_pow[c];
        sums[id] = acc;
    }
    return sums;
}

namespace {

void require_scale(const GridFunction& f, int j) {
    const auto& cfg = f.config();
    if (j < cfg.j_min || j > cfg.J) {
        throw Error(ErrorCode::domain, "scale " + std::to_string(j) + " is outside [" + std::to_string(cfg.j_min) +
                                           ", " + std::to_string(cfg.J) + "]");
    }
}

std::vector<double> term_values(const GridFunction& f, const ExponentSet& e) {
    const auto& lat = *f.lattice();
    auto sums = cube_power_sums(f, e.p(), e.q());
    for (std::size_t id = 0; id < lat.cube_count(); ++id) {
        const auto& Q = lat.cube(id);
        sums[id] = cube_power(Q.j, lat.n(), 1.0 / e.t() - 1.0 / e.p()) * std::pow(sums[id], 1.0 / e.p());
    }
    return sums;
}

}  // namespace

CubeTermTable cube_terms(const GridFunction& f, const ExponentSet& e) {
    const auto values = term_values(f, e);
    CubeTermTable table;
    table.reserve(values.size());
    for (std::size_t id = 0; id < values.size(); ++id) table.push_back({f.lattice()->cube(id), values[id]});
    return table;
}

double bm_norm(const GridFunction& f, const ExponentSet& e) {
    return lr_aggregate(term_values(f, e), e.r());
}

double per_scale_bm(const GridFunction& f, const ExponentSet& e, int v) {
    require_scale(f, v);
    const auto values = term_values(f, e);
    const auto& lat = *f.lattice();
    return lr_aggregate(std::span(values).subspan(lat.scale_begin(v), lat.scale_end(v) - lat.scale_begin(v)), e.r());
}

double slice_norm(const GridFunction& f, const ExponentSet& e, int j) {
    require_scale(f, j);
    if (e.p() <= 1.0) throw Error(ErrorCode::regime, "slice norms need p > 1");
    const auto& lat = *f.lattice();
    const double alpha = 1.0 / e.t_conj() - 1.0 / e.p_conj();
    std::vector<double> terms;
    for (std::size_t id = lat.scale_begin(j); id < lat.scale_end(j); ++id) {
        terms.push_back(cube_power(j, lat.n(), alpha) * lp_norm_on_cube(f, lat.cube(id), e.p_conj(), e.q_conj()));
    }
    return lr_aggregate(terms, e.r_conj());
}

BlockDecomposition slice_decomposition(const GridFunction& f, const ExponentSet& e, int j) {
    require_scale(f, j);
    if (e.p() <= 1.0) throw Error(ErrorCode::regime, "slice norms need p > 1");
    const auto& lat = *f.lattice();
    const int n = lat.n();
    BlockDecomposition dec;
    for (std::size_t id = lat.scale_begin(j); id < lat.scale_end(j); ++id) {
        const auto& Q = lat.cube(id);
        const double local = lp_norm_on_cube(f, Q, e.p_conj(), e.q_conj());
        BlockEntry entry{Q, 0.0, GridFunction(f.lattice(), f.dim())};
        if (local > 0.0) {
            entry.lambda = cube_power(j, n, 1.0 / e.t_conj() - 1.0 / e.p_conj()) * local;
            for (auto c : lat.cube_cells(id)) {
                for (int i = 0; i < f.dim(); ++i) entry.block.at(c, i) = f.at(c, i) / entry.lambda;
            }
        } else {
            // Zero piece: lambda = 0 with the normalized profile |Q|^{-1/t'} chi_Q e_1.
            const double height = cube_power(j, n, -1.0 / e.t_conj());
            for (auto c : lat.cube_cells(id)) entry.block.at(c, 0) = height;
        }
        dec.entries.push_back(std::move(entry));
    }
    GridFunction residual = f;
    residual -= dec.reconstruct(f);
    dec.residual_norm = lp_norm_on_cube(residual, lat.cube(0), e.p_conj(), e.q_conj());
    return dec;
}

double continuous_char_estimate(const GridFunction& f, const ExponentSet& e, int center_density) {
    if (e.r_infinite()) throw Error(ErrorCode::domain, "the sampled ball functional needs r < inf");
    if (center_density < 1) throw Error(ErrorCode::domain, "centre density must be >= 1");
    const auto& lat = *f.lattice();
    const auto& cfg = lat.config();
    const int n = cfg.n;
    const double p = e.p();
    const double r = e.r();
    const double cell = cfg.cell_side();
    const double window = cfg.window_side();
    const double h = cell / center_density;
    const auto N = cfg.cells_per_axis();

    std::vector<double> cell_pow(lat.cell_count());
    for (std::size_t c = 0; c < lat.cell_count(); ++c) cell_pow[c] = std::pow(value_norm_unchecked(f.cell(c), e.q()), p);

    // Centres y = -window + k h, k = 0 .. 3 window / h - 1.
    const auto count = static_cast<std::int64_t>(3 * N * center_density);
    const double alpha = 1.0 / e.t() - 1.0 / p - 1.0 / r;
    const double unit_ball = (n == 1) ? 2.0 : std::numbers::pi;
    const double dy = std::pow(h, n);

    std::vector<double> samples;
    for (int j = cfg.j_min; j <= cfg.J; ++j) {
        const double s = std::ldexp(1.0, -j);
        const double ball = unit_ball * std::pow(s, n);
        const double weight = std::pow(ball, alpha);
        if (n == 1) {
            for (std::int64_t k = 0; k < count; ++k) {
                const double y = -window + static_cast<double>(k) * h;
                const double lo = y - s;
                const double hi = y + s;
                const auto first = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(lo / cell)));
                const auto last = std::min<std::int64_t>(N - 1, static_cast<std::int64_t>(std::floor(hi / cell)));
                double acc = 0.0;
                for (std::int64_t c = first; c <= last; ++c) {
                    const double a = static_cast<double>(c) * cell;
                    const double overlap = std::min(hi, a + cell) - std::max(lo, a);
                    if (overlap > 0.0) acc += overlap * cell_pow[static_cast<std::size_t>(c)];
                }
                if (acc > 0.0) samples.push_back(weight * std::pow(acc, 1.0 / p));
            }
        } else {
            const double cv = lat.cell_volume();
            for (std::int64_t ka = 0; ka < count; ++ka) {
                const double ya = -window + static_cast<double>(ka) * h;
                for (std::int64_t kb = 0; kb < count; ++kb) {
                    const double yb = -window + static_cast<double>(kb) * h;
                    const auto a0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor((ya - s) / cell)));
                    const auto a1 = std::min<std::int64_t>(N - 1, static_cast<std::int64_t>(std::floor((ya + s) / cell)));
                    const auto b0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor((yb - s) / cell)));
                    const auto b1 = std::min<std::int64_t>(N - 1, static_cast<std::int64_t>(std::floor((yb + s) / cell)));
                    double acc = 0.0;
                    for (auto a = a0; a <= a1; ++a) {
                        const double xa = (static_cast<double>(a) + 0.5) * cell - ya;
                        for (auto b = b0; b <= b1; ++b) {
                            const double xb = (static_cast<double>(b) + 0.5) * cell - yb;
                            if (xa * xa + xb * xb < s * s) acc += cv * cell_pow[lat.cell_at({a, b})];
                        }
                    }
                    if (acc > 0.0) samples.push_back(weight * std::pow(acc, 1.0 / p));
                }
            }
        }
    }
    // Each sample carries measure dy * ln 2 (dy over centres, dt/t over one dyadic octave).
    return lr_aggregate(samples, r) * std::pow(dy * std::numbers::ln2, 1.0 / r);
}

}  // namespace bmkit
