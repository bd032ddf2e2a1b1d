#include <doctest.h>

#include <cmath>

#include "bmkit/block_norms.hpp"
#include "bmkit/bm_norms.hpp"
#include "bmkit/error.hpp"
#include "bmkit/operators.hpp"

using namespace bmkit;

namespace {

bool equal(const GridFunction& a, const GridFunction& b, double tol = 0.0) {
    if (!a.same_shape(b)) return false;
    for (std::size_t k = 0; k < a.values().size(); ++k) {
        if (std::abs(a.values()[k] - b.values()[k]) > tol) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("averaging") {
    auto lat = Lattice::make({1, 1, 0, true});
    GridFunction f(lat, 1, {1.0, 0.0});
    auto avg = average_Ek(f, 0);
    CHECK(avg.at(0, 0) == 0.5);
    CHECK(avg.at(1, 0) == 0.5);
    CHECK(equal(average_Ek(f, 1), f));
    CHECK_THROWS_AS(average_Ek(f, 2), Error);

    auto lat2 = Lattice::make({2, 3, 0, true});
    auto g = random_function(4, lat2, 3, 0.2);
    for (int k = 0; k <= 3; ++k) {
        CHECK(equal(average_Ek(average_Ek(g, k), k), average_Ek(g, k), 1e-14));
        auto c = 2.5 * window_indicator(lat2);
        CHECK(equal(average_Ek(c, k), c, 1e-15));
    }
}

TEST_CASE("translation") {
    auto lat = Lattice::make({2, 2, 0, true});
    auto f = random_function(1, lat, 2, 0.0);
    CHECK(equal(translate(f, std::array<std::int64_t, 2>{0, 0}), f));
    CHECK(equal(translate(f, std::array<std::int64_t, 2>{4, -8}), f));
    CHECK(equal(translate(f, std::array<double, 2>{1.0, 0.25}), translate(f, std::array<std::int64_t, 2>{4, 1})));
    CHECK_THROWS_AS(translate(f, std::array<double, 2>{0.1, 0.0}), Error);
    auto shifted = translate(f, std::array<std::int64_t, 2>{1, 3});
    CHECK(shifted.at(lat->cell_at({1, 3}), 0) == f.at(0, 0));
    CHECK(shifted.at(lat->cell_at({0, 2}), 1) == f.at(lat->cell_at({3, 3}), 1));
    const auto e = ExponentSet::make(1.5, 2, 3, 2);
    CHECK(lp_norm_on_cube(shifted, lat->cube(0), e.p_conj(), e.q_conj()) ==
          doctest::Approx(lp_norm_on_cube(f, lat->cube(0), e.p_conj(), e.q_conj())).epsilon(1e-14));

    auto open = Lattice::make({1, 2, 0, false});
    CHECK_THROWS_AS(translate(random_function(1, open, 1, 0.0), std::array<std::int64_t, 2>{1, 0}), Error);
}

TEST_CASE("convolution") {
    auto lat = Lattice::make({1, 4, 0, true});
    auto f = random_function(2, lat, 3, 0.0);
    for (std::size_t cell : {std::size_t{0}, std::size_t{5}}) {
        CHECK(equal(convolve(f, KernelSpec::dirac(lat, cell)),
                    translate(f, std::array<std::int64_t, 2>{static_cast<std::int64_t>(cell), 0}), 1e-12));
    }
    CHECK(KernelSpec::dirac(lat, 3).l1_norm() == doctest::Approx(1.0));
    CHECK(convolve(GridFunction(lat, 3), KernelSpec(random_function(3, lat, 1, 0.0))).is_zero());
    CHECK_THROWS_AS(KernelSpec{f}, Error);
    CHECK_THROWS_AS(convolve(f, KernelSpec(random_function(3, Lattice::make({1, 3, 0, true}), 1, 0.0))), Error);

    // Linearity in the kernel, and commutativity for scalars.
    auto k1 = random_function(5, lat, 1, 0.0);
    auto k2 = random_function(6, lat, 1, 0.0);
    auto lhs = convolve(f, KernelSpec(k1 + k2));
    auto rhs = convolve(f, KernelSpec(k1)) + convolve(f, KernelSpec(k2));
    CHECK(equal(lhs, rhs, 1e-12));
    CHECK(equal(convolve(k1, KernelSpec(k2)), convolve(k2, KernelSpec(k1)), 1e-12));
}

TEST_CASE("maximal") {
    auto lat = Lattice::make({1, 1, 0, true});
    GridFunction f(lat, 1, {1.0, 0.0});
    auto m = maximal(f, MaximalVariant::componentwise, 2.0);
    CHECK(m.at(0, 0) == 1.0);
    CHECK(m.at(1, 0) == 0.5);
    CHECK_THROWS_AS(maximal(f, MaximalVariant::componentwise, 2.0, 0.0), Error);

    auto lat2 = Lattice::make({2, 3, 0, true});
    auto c = 3.0 * window_indicator(lat2);
    CHECK(equal(maximal(c, MaximalVariant::scalar_X, 2.0), c, 1e-14));

    auto g = random_function(7, lat2, 3, 0.3);
    auto m_low = maximal(g, MaximalVariant::componentwise, 2.0, 0.7);
    auto m_high = maximal(g, MaximalVariant::componentwise, 2.0, 1.4);
    auto m_one = maximal(g, MaximalVariant::componentwise, 2.0, 1.0);
    auto mx = maximal(g, MaximalVariant::scalar_X, 2.0);
    CHECK(mx.dim() == 1);
    for (std::size_t cell = 0; cell < g.cell_count(); ++cell) {
        for (int i = 0; i < 3; ++i) {
            CHECK(m_low.at(cell, i) <= m_high.at(cell, i) * (1 + 1e-12));
            CHECK(m_one.at(cell, i) >= std::abs(g.at(cell, i)) * (1 - 1e-12));
        }
        CHECK(mx.at(cell, 0) >= value_norm(g.cell(cell), 2.0) * (1 - 1e-12));
    }
}

TEST_CASE("E_k bound constant and convergence to f") {
    auto lat = Lattice::make({1, 6, 0, true});
    const auto e = ExponentSet::make(1.5, 2, 3, 2);
    double series = 1.0;
    for (int i = 1; i < 200; ++i) series += std::pow(2.0, e.r() * i * (1.0 / e.r() - 1.0 / e.t()));
    const double C = std::pow(series, 1.0 / e.r());
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto f = random_function(s, lat, 2, 0.3);
        for (int k = 0; k <= 6; ++k) CHECK(bm_norm(average_Ek(f, k), e) <= C * bm_norm(f, e));
        CHECK(bm_norm(f - average_Ek(f, 6), e) == 0.0);
    }
}
