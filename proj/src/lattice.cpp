#include "bmkit/lattice.hpp"

#include <cmath>
#include <string>

#include "bmkit/error.hpp"

namespace bmkit {

namespace {

// Keeps the incidence tables of one lattice under ~2^26 entries.
constexpr int kMaxCellBits = 24;

std::size_t row_major(const std::array<std::int64_t, 2>& m, int n, std::int64_t side) {
    return n == 1 ? static_cast<std::size_t>(m[0]) : static_cast<std::size_t>(m[0] * side + m[1]);
}

}  // namespace

double cube_power(int j, int n, double alpha) {
    return std::exp2(-static_cast<double>(j) * n * alpha);
}

double cube_volume(int j, int n) {
    return std::ldexp(1.0, -j * n);
}

void LatticeConfig::validate() const {
    if (n != 1 && n != 2) {
        throw Error(ErrorCode::domain, "lattice dimension n must be 1 or 2, got " + std::to_string(n));
    }
    if (j_min > J) {
        throw Error(ErrorCode::domain, "lattice requires j_min <= J (got j_min=" + std::to_string(j_min) +
                                           ", J=" + std::to_string(J) + ")");
    }
    if ((J - j_min) * n > kMaxCellBits) {
        throw Error(ErrorCode::domain, "lattice too large: (J - j_min) * n must not exceed " +
                                           std::to_string(kMaxCellBits));
    }
    if (std::abs(J) * n > 900 || std::abs(j_min) * n > 900) {
        throw Error(ErrorCode::domain, "scale out of range: |j n| must not exceed 900");
    }
}

std::size_t LatticeConfig::cell_count() const {
    return std::size_t{1} << ((J - j_min) * n);
}

double LatticeConfig::cell_side() const {
    return std::ldexp(1.0, -J);
}

double LatticeConfig::window_side() const {
    return std::ldexp(1.0, -j_min);
}

bool in_family(const CubeIndex& cube, const LatticeConfig& config) {
    if (cube.j < config.j_min || cube.j > config.J) return false;
    const std::int64_t side = std::int64_t{1} << (cube.j - config.j_min);
    for (int i = 0; i < 2; ++i) {
        if (i < config.n) {
            if (cube.m[i] < 0 || cube.m[i] >= side) return false;
        } else if (cube.m[i] != 0) {
            return false;
        }
    }
    return true;
}

std::vector<CubeIndex> enumerate_cubes(const LatticeConfig& config) {
    config.validate();
    std::vector<CubeIndex> out;
    for (int j = config.j_min; j <= config.J; ++j) {
        const std::int64_t side = std::int64_t{1} << (j - config.j_min);
        if (config.n == 1) {
            for (std::int64_t a = 0; a < side; ++a) out.push_back({j, {a, 0}});
        } else {
            for (std::int64_t a = 0; a < side; ++a)
                for (std::int64_t b = 0; b < side; ++b) out.push_back({j, {a, b}});
        }
    }
    return out;
}

std::vector<std::size_t> cells_of(const CubeIndex& cube, const LatticeConfig& config) {
    config.validate();
    if (!in_family(cube, config)) {
        throw Error(ErrorCode::domain, "cube (j=" + std::to_string(cube.j) + ") is outside the lattice family");
    }
    const std::int64_t span = std::int64_t{1} << (config.J - cube.j);
    const std::int64_t side = config.cells_per_axis();
    std::vector<std::size_t> out;
    if (config.n == 1) {
        for (std::int64_t a = 0; a < span; ++a) out.push_back(static_cast<std::size_t>(cube.m[0] * span + a));
    } else {
        for (std::int64_t a = 0; a < span; ++a)
            for (std::int64_t b = 0; b < span; ++b)
                out.push_back(row_major({cube.m[0] * span + a, cube.m[1] * span + b}, 2, side));
    }
    return out;
}

std::vector<CubeIndex> ancestors_of_cell(std::size_t cell, const LatticeConfig& config) {
    config.validate();
    if (cell >= config.cell_count()) {
        throw Error(ErrorCode::domain, "cell index " + std::to_string(cell) + " is outside the lattice");
    }
    const std::int64_t side = config.cells_per_axis();
    std::array<std::int64_t, 2> coords{0, 0};
    if (config.n == 1) {
        coords[0] = static_cast<std::int64_t>(cell);
    } else {
        coords[0] = static_cast<std::int64_t>(cell) / side;
        coords[1] = static_cast<std::int64_t>(cell) % side;
    }
    std::vector<CubeIndex> out;
    for (int j = config.j_min; j <= config.J; ++j) {
        const int shift = config.J - j;
        out.push_back({j, {coords[0] >> shift, coords[1] >> shift}});
    }
    return out;
}

std::shared_ptr<const Lattice> Lattice::make(const LatticeConfig& config) {
    config.validate();
    return std::shared_ptr<const Lattice>(new Lattice(config));
}

Lattice::Lattice(const LatticeConfig& config)
    : config_(config), cell_count_(config.cell_count()), cell_volume_(config.cell_volume()) {
    cubes_ = enumerate_cubes(config);
    const int L = config.levels();
    scale_offset_.assign(L + 1, 0);
    for (int l = 0; l < L; ++l) {
        scale_offset_[l + 1] = scale_offset_[l] + (std::size_t{1} << (l * config.n));
    }

    ancestors_.resize(cell_count_ * L);
    std::vector<std::size_t> counts(cubes_.size(), 0);
    for (std::size_t c = 0; c < cell_count_; ++c) {
        const auto coords = cell_coords(c);
        for (int l = 0; l < L; ++l) {
            const int shift = L - 1 - l;
            const std::int64_t side = std::int64_t{1} << l;
            const std::array<std::int64_t, 2> m{coords[0] >> shift, coords[1] >> shift};
            const std::size_t id = scale_offset_[l] + row_major(m, config.n, side);
            ancestors_[c * L + l] = static_cast<std::uint32_t>(id);
            ++counts[id];
        }
    }
    cube_cell_offset_.assign(cubes_.size() + 1, 0);
    for (std::size_t q = 0; q < cubes_.size(); ++q) cube_cell_offset_[q + 1] = cube_cell_offset_[q] + counts[q];
    cube_cells_.resize(cube_cell_offset_.back());
    std::vector<std::size_t> fill(cube_cell_offset_.begin(), cube_cell_offset_.end() - 1);
    // Cells are visited in ascending order, so each cube's list is sorted.
    for (std::size_t c = 0; c < cell_count_; ++c) {
        for (int l = 0; l < L; ++l) {
            const auto id = ancestors_[c * L + l];
            cube_cells_[fill[id]++] = static_cast<std::uint32_t>(c);
        }
    }
}

std::size_t Lattice::cube_id(const CubeIndex& cube) const {
    if (!in_family(cube, config_)) {
        throw Error(ErrorCode::domain, "cube (j=" + std::to_string(cube.j) + ") is outside the lattice family");
    }
    const std::int64_t side = std::int64_t{1} << (cube.j - config_.j_min);
    return scale_begin(cube.j) + row_major(cube.m, config_.n, side);
}

std::array<std::int64_t, 2> Lattice::cell_coords(std::size_t cell) const {
    const std::int64_t side = config_.cells_per_axis();
    if (config_.n == 1) return {static_cast<std::int64_t>(cell), 0};
    return {static_cast<std::int64_t>(cell) / side, static_cast<std::int64_t>(cell) % side};
}

std::size_t Lattice::cell_at(const std::array<std::int64_t, 2>& coords) const {
    return row_major(coords, config_.n, config_.cells_per_axis());
}

}  // namespace bmkit
