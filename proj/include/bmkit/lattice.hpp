#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace bmkit {

/// Dyadic cube Q_{j,m} = prod_i [2^{-j} m_i, 2^{-j}(m_i + 1)).
/// Only the first n entries of m are meaningful; the rest stay zero.
struct CubeIndex {
    int j = 0;
    std::array<std::int64_t, 2> m{0, 0};

    auto operator<=>(const CubeIndex&) const = default;
};

/// |Q|^alpha for a scale-j cube in dimension n, computed as 2^{-j n alpha}.
double cube_power(int j, int n, double alpha);

/// Lebesgue measure 2^{-jn}; exact for |jn| <= 1022.
double cube_volume(int j, int n);

/// Finite truncation of the dyadic lattice: scales [j_min, J] over the
/// window [0, 2^{-j_min})^n.
struct LatticeConfig {
    int n = 1;
    int J = 3;
    int j_min = 0;
    bool periodic = true;

    void validate() const;
    int levels() const { return J - j_min + 1; }
    std::int64_t cells_per_axis() const { return std::int64_t{1} << (J - j_min); }
    std::size_t cell_count() const;
    double cell_volume() const { return cube_volume(J, n); }
    double cell_side() const;
    double window_side() const;

    bool operator==(const LatticeConfig&) const = default;
};

/// All cubes (j, m), j in [j_min, J], inside the window; lexicographic in (j, m).
std::vector<CubeIndex> enumerate_cubes(const LatticeConfig& config);

/// Finest-cell indices (row-major, ascending) making up the cube.
std::vector<std::size_t> cells_of(const CubeIndex& cube, const LatticeConfig& config);

/// The J - j_min + 1 nested cubes containing the cell, coarsest first.
std::vector<CubeIndex> ancestors_of_cell(std::size_t cell, const LatticeConfig& config);

bool in_family(const CubeIndex& cube, const LatticeConfig& config);

/// Precomputed incidence structure shared by every function living on one
/// lattice. Immutable after construction.
class Lattice {
public:
    static std::shared_ptr<const Lattice> make(const LatticeConfig& config);

    const LatticeConfig& config() const { return config_; }
    int n() const { return config_.n; }
    int levels() const { return config_.levels(); }
    std::size_t cell_count() const { return cell_count_; }
    std::size_t cube_count() const { return cubes_.size(); }
    double cell_volume() const { return cell_volume_; }

    std::span<const CubeIndex> cubes() const { return cubes_; }
    const CubeIndex& cube(std::size_t id) const { return cubes_[id]; }

    /// Ids of the cubes at scale j, contiguous in enumeration order.
    std::size_t scale_begin(int j) const { return scale_offset_[j - config_.j_min]; }
    std::size_t scale_end(int j) const { return scale_offset_[j - config_.j_min + 1]; }

    std::size_t cube_id(const CubeIndex& cube) const;

    /// Cube ids containing the cell, coarsest first (levels() entries).
    std::span<const std::uint32_t> ancestors(std::size_t cell) const {
        return {ancestors_.data() + cell * levels(), static_cast<std::size_t>(levels())};
    }

    std::span<const std::uint32_t> cube_cells(std::size_t id) const {
        return {cube_cells_.data() + cube_cell_offset_[id], cube_cell_offset_[id + 1] - cube_cell_offset_[id]};
    }

    /// Level-J integer coordinates of a cell.
    std::array<std::int64_t, 2> cell_coords(std::size_t cell) const;
    std::size_t cell_at(const std::array<std::int64_t, 2>& coords) const;

private:
    explicit Lattice(const LatticeConfig& config);

    LatticeConfig config_;
    std::size_t cell_count_ = 0;
    double cell_volume_ = 0.0;
    std::vector<CubeIndex> cubes_;
    std::vector<std::size_t> scale_offset_;
    std::vector<std::uint32_t> ancestors_;
    std::vector<std::size_t> cube_cell_offset_;
    std::vector<std::uint32_t> cube_cells_;
};

using LatticePtr = std::shared_ptr<const Lattice>;

}  // namespace bmkit
