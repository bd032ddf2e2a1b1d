#include <doctest.h>

#include <cmath>

#include "bmkit/block_norms.hpp"
#include "bmkit/bm_norms.hpp"
#include "bmkit/error.hpp"
#include "oracles.hpp"

using namespace bmkit;

namespace {

GridFunction spike(LatticePtr lat, std::size_t cell, std::vector<double> v) {
    GridFunction g(lat, static_cast<int>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) g.at(cell, static_cast<int>(i)) = v[i];
    return g;
}

void check_decomposition(const BlockNormResult& res, const GridFunction& g, const ExponentSet& e) {
    CHECK(supports_ok(res.decomposition));
    CHECK(max_capacity_ratio(res.decomposition, e) <= 1 + 1e-9);
    CHECK(res.decomposition.residual_norm <= 1e-10 * (1 + lp_norm_on_cube(g, {g.config().j_min, {0, 0}}, 2, 2)));
    CHECK(res.decomposition.cost(e.r_conj()) == doctest::Approx(res.value).epsilon(1e-12));
}

}  // namespace

TEST_CASE("zero input") {
    auto lat = Lattice::make({1, 3, 0, true});
    const auto e = ExponentSet::make(1.5, 2, 3, 2);
    GridFunction zero(lat, 2);
    const auto res = block_norm(zero, e);
    CHECK(res.value == 0.0);
    CHECK(res.decomposition.entries.empty());
    CHECK(dual_norm(zero, e).value == 0.0);
    CHECK(block_norm_upper(zero, e) == 0.0);
    CHECK(finite_decomposition(zero, e).decomposition.entries.empty());
}

TEST_CASE("regime is enforced") {
    auto lat = Lattice::make({1, 2, 0, true});
    auto g = random_function(1, lat, 1, 0.0);
    CHECK_THROWS_AS(block_norm(g, ExponentSet::make(1.5, 2, 2, 2)), Error);
    CHECK_THROWS_AS(dual_norm(g, ExponentSet::make(2, 2, 3, 2)), Error);
}

TEST_CASE("single-cell closed form agrees with brute-force splitting search") {
    for (double r : {2.5, 3.0, 6.0, kInf}) {
        for (int levels : {2, 3, 4}) {
            const auto e = ExponentSet::make(1.5, 2.2, r, 1.8);
            auto lat = Lattice::make({1, levels - 1, 0, true});
            const std::size_t cell = lat->cell_count() - 1;
            const std::vector<double> v{0.3, -1.2, 0.7};
            auto g = spike(lat, cell, v);
            std::vector<double> caps;
            for (auto id : lat->ancestors(cell)) {
                caps.push_back(cube_power(lat->cube(id).j, 1, 1.0 / e.t_conj() - 1.0 / e.p_conj()));
            }
            const double base = value_norm(v, e.q_conj()) * std::pow(lat->cell_volume(), 1.0 / e.p_conj());
            const double brute = oracle::single_cell_splitting(caps, base, e.r_conj());
            CHECK(single_cell_block_norm(g, e) == doctest::Approx(brute).epsilon(1e-8));
        }
    }
}

TEST_CASE("single-cell inputs: optimizer and dual agree with closed form") {
    for (std::uint64_t s = 0; s < 12; ++s) {
        const double r = s % 4 == 3 ? kInf : 2.5 + static_cast<double>(s % 4);
        const auto e = ExponentSet::make(1.5, 2, r, 1.5 + 0.25 * static_cast<double>(s % 3));
        const int n = 1 + static_cast<int>(s % 2);
        auto lat = Lattice::make({n, n == 1 ? 3 : 2, 0, true});
        auto noise = random_function(s, lat, 3, 0.0);
        auto g = spike(lat, s % lat->cell_count(), {noise.at(0, 0), noise.at(0, 1), noise.at(0, 2)});
        const double closed = single_cell_block_norm(g, e);
        const auto primal = block_norm(g, e);
        CHECK(primal.value == doctest::Approx(closed).epsilon(1e-6));
        check_decomposition(primal, g, e);
        const auto dual = dual_norm(g, e);
        CHECK(dual.converged);
        CHECK(dual.value <= closed * (1 + 1e-9));
        CHECK(dual.value == doctest::Approx(closed).epsilon(1e-4));
        CHECK(bm_norm(dual.certificate.f_star, e) <= 1 + 1e-9);
    }
}

TEST_CASE("two-cell lattice agrees with direct search") {
    auto lat = Lattice::make({1, 1, 0, true});
    for (std::uint64_t s = 0; s < 8; ++s) {
        const auto e = ExponentSet::make(1.5 + 0.1 * static_cast<double>(s % 3), 2.5, 3.0 + static_cast<double>(s % 2), 2);
        auto g = random_function(s, lat, 1, 0.0);
        const double cap0 = 1.0;
        const double cap1 = cube_power(1, 1, 1.0 / e.t_conj() - 1.0 / e.p_conj());
        const double brute = oracle::two_cell_block_norm(g.at(0, 0), g.at(1, 0), e.p_conj(), e.r_conj(), cap0, cap1);
        CHECK(block_norm(g, e).value == doctest::Approx(brute).epsilon(1e-7));
    }
}

TEST_CASE("sandwich on random 8-cell instances") {
    auto lat = Lattice::make({1, 3, 0, true});
    for (std::uint64_t s = 0; s < 30; ++s) {
        const double r = s % 5 == 4 ? kInf : 2.5 + static_cast<double>(s % 4);
        const auto e = ExponentSet::make(1.25 + 0.25 * static_cast<double>(s % 3), 2.0, r, 1.5 + 0.5 * static_cast<double>(s % 2));
        auto g = random_function(s, lat, 1 + static_cast<int>(s % 4), s % 3 == 1 ? 0.6 : 0.0);
        const auto primal = block_norm(g, e);
        const auto dual = dual_norm(g, e);
        CAPTURE(s);
        check_decomposition(primal, g, e);
        CHECK(primal.lower_bound <= primal.value);
        CHECK(dual.value <= primal.value * (1 + 1e-12));
        CHECK(dual.converged);
        CHECK((primal.value - dual.value) / primal.value <= 1e-4);
        CHECK(primal.value <= block_norm_upper(g, e) * (1 + 1e-12));
        CHECK(bm_norm(dual.certificate.f_star, e) <= 1 + 1e-9);
    }
}

TEST_CASE("blocks have norm at most one") {
    auto lat = Lattice::make({2, 2, 0, true});
    const auto e = ExponentSet::make(1.5, 2, 4, 2);
    for (std::size_t id : {std::size_t{0}, std::size_t{2}, std::size_t{9}}) {
        const auto& Q = lat->cube(id);
        auto raw = random_function(id, lat, 2, 0.0).restricted_to(Q);
        const double cap = cube_power(Q.j, 2, 1.0 / e.t() - 1.0 / e.p());
        auto b = (cap / lp_norm_on_cube(raw, Q, e.p_conj(), e.q_conj())) * raw;
        CHECK(block_norm_upper(b, e) <= 1 + 1e-12);
        CHECK(block_norm(b, e).value <= 1 + 1e-9);
        // One block is returned as-is once the tolerance admits its cost.
        const double loose = block_norm_upper(b, e) / block_norm(b, e).value - 1.0 + 1e-9;
        const auto fd = finite_decomposition(b, e, loose);
        CHECK(fd.decomposition.entries.size() == 1);
        CHECK(fd.decomposition.entries[0].lambda == doctest::Approx(block_norm_upper(b, e)).epsilon(1e-14));
        const auto tight = finite_decomposition(b, e, 1e-3);
        CHECK(tight.cost <= (1 + 1e-3) * tight.optimum);
    }
}

TEST_CASE("finite decomposition") {
    auto lat = Lattice::make({1, 4, 0, true});
    const auto e = ExponentSet::make(1.5, 2, 3, 2);
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto g = random_function(s, lat, 2, s % 2 ? 0.5 : 0.0);
        const auto fd = finite_decomposition(g, e, 1e-3);
        CHECK(fd.cost <= (1 + 1e-3) * fd.optimum * (1 + 1e-12));
        CHECK(fd.decomposition.residual_norm <= 1e-10 * lp_norm_on_cube(g, {0, {0, 0}}, e.p_conj(), e.q_conj()));
        CHECK(max_capacity_ratio(fd.decomposition, e) <= 1 + 1e-9);
        CHECK(supports_ok(fd.decomposition));
    }
}
