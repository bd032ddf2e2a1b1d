#include <doctest.h>

#include <cmath>
#include <set>

#include "bmkit/bm_norms.hpp"
#include "bmkit/block_norms.hpp"
#include "bmkit/error.hpp"
#include "bmkit/io.hpp"
#include "bmkit/operators.hpp"
#include "bmkit/verifier.hpp"
#include "oracles.hpp"

using namespace bmkit;

namespace {

VerifyConfig small_config(double scale) {
    VerifyConfig c;
    c.corpus_scale = scale;
    return c;
}

const CheckResult& result_named(const VerificationReport& r, const std::string& name) {
    for (const auto& c : r.checks) {
        if (c.spec.name == name) return c;
    }
    FAIL("check missing: " << name);
    return r.checks.front();
}

/// pairing(M_eta delta, f) / (||f||_BM ||delta||_H upper), with delta on the
/// leftmost cell and f(x) = x^{-1/t} sampled at right cell ends.
double maximal_witness(int J, const ExponentSet& e, double eta) {
    auto lat = Lattice::make({1, J, 0, false});
    GridFunction delta(lat, 1);
    delta.at(0, 0) = 1.0;
    const auto m = maximal(delta, MaximalVariant::componentwise, e.q(), eta);
    GridFunction f(lat, 1);
    const double h = lat->config().cell_side();
    for (std::size_t c = 0; c < lat->cell_count(); ++c) f.at(c, 0) = std::pow(static_cast<double>(c + 1) * h, -1.0 / e.t());
    return pairing(m, f) / (bm_norm(f, e) * block_norm_upper(delta, e));
}

}  // namespace

TEST_CASE("E_k constant matches its defining series") {
    for (int n : {1, 2}) {
        for (auto [t, r] : std::vector<std::pair<double, double>>{{2, 3}, {3, 4}, {2.5, 5}, {3, 6}}) {
            double sum = 1.0;
            for (int i = 1; i < 4000; ++i) sum += std::exp2(n * r * i * (1.0 / r - 1.0 / t));
            CHECK(ek_constant(n, r, t) == doctest::Approx(std::pow(sum, 1.0 / r)).epsilon(1e-12));
        }
        CHECK(ek_constant(n, kInf, 2.0) == 1.0);
    }
}

TEST_CASE("bm_norm(f - E_k f) can increase in k") {
    const std::vector<double> v{2, 0, 0, 0, 1, 1, 1, 0};
    auto lat = Lattice::make({1, 3, 0, true});
    const GridFunction f(lat, 1, v);
    const auto e = ExponentSet::make(2, 3, 4, 2);
    auto tail = [&](int k) {
        const auto diff = f - average_Ek(f, k);
        std::vector<double> vals(diff.values().begin(), diff.values().end());
        const double lib = bm_norm(diff, e);
        CHECK(lib == doctest::Approx(oracle::bm_norm(vals, 1, 1, 3, 0, 2, 3, 4, 2)).epsilon(1e-12));
        return lib;
    };
    const double ratio = tail(1) / tail(0);
    CHECK(ratio == doctest::Approx(1.0209).epsilon(1e-3));
    // Quasi-monotone bound that does hold.
    CHECK(ratio <= 1.0 + ek_constant(1, 4, 3));
    CHECK(tail(3) == 0.0);
}

TEST_CASE("maximal operator on the block space: witness grows at eta = t'") {
    const auto e = ExponentSet::make(1.5, 2, 4, 1.5);
    REQUIRE(e.t_conj() == doctest::Approx(2.0));
    double prev = 0.0;
    for (int J = 2; J <= 12; ++J) {
        const double w = maximal_witness(J, e, 2.0);
        CHECK(w > prev);
        prev = w;
    }
    CHECK(prev > 1.5 * maximal_witness(2, e, 2.0));
    CHECK(maximal_witness(4, e, 2.0) == doctest::Approx(1.4142).epsilon(1e-4));

    // Below t' the same witness saturates and turns over.
    double peak = 0.0;
    int peak_J = 0;
    for (int J = 2; J <= 12; ++J) {
        const double w = maximal_witness(J, e, 1.5);
        if (w > peak) {
            peak = w;
            peak_J = J;
        }
    }
    CHECK(peak_J < 12);
    CHECK(maximal_witness(12, e, 1.5) < peak);
}

TEST_CASE("reduced suite passes") {
    // The maximal checks estimate operator norms as a sup over their corpus, and a
    // tenth of it is too small for a stable estimate, so they run at full scale.
    auto c = small_config(0.1);
    for (const auto& s : check_specs()) {
        if (s.name.rfind("maximal", 0) != 0) c.checks.push_back(s.name);
    }
    auto report = run_suite(c);
    c = small_config(1.0);
    c.checks = {"maximal_bm", "maximal_block"};
    auto maximal_report = run_suite(c);
    for (auto& r : maximal_report.checks) report.checks.push_back(std::move(r));
    CHECK(report.checks.size() == check_specs().size());
    for (const auto& c : report.checks) {
        INFO(c.spec.name << " worst " << c.worst_ratio << " bound " << c.bound << " at " << c.worst_fingerprint);
        CHECK(c.status == CheckStatus::pass);
        CHECK(c.passed + c.failed + c.inconclusive == static_cast<int>(c.instances.size()));
    }
    CHECK(report.overall() == CheckStatus::pass);
}

TEST_CASE("reports are deterministic and thread-count independent") {
    auto c = small_config(0.1);
    c.checks = {"duality", "translation", "ek_convergence", "maximal_block"};
    c.threads = 1;
    const auto a = report_json(run_suite(c));
    const auto b = report_json(run_suite(c));
    CHECK(a == b);
    c.threads = 3;
    CHECK(report_json(run_suite(c)) == a);
    c.seed += 1;
    CHECK(report_json(run_suite(c)) != a);
}

TEST_CASE("corpus scale 0 keeps crafted instances only") {
    const auto report = run_suite(small_config(0.0));
    bool any = false;
    for (const auto& c : report.checks) {
        for (const auto& rec : c.instances) {
            CHECK(rec.index < 0);
            any = true;
        }
    }
    CHECK(any);
    CHECK(result_named(report, "triviality").instances.size() == 8);
    CHECK(report.overall() == CheckStatus::pass);
}

TEST_CASE("failure replay reproduces the measured ratio") {
    auto c = small_config(0.2);
    c.checks = {"translation", "convolution", "pairing", "ek_bound"};
    c.tamper_translation_constant = true;
    const auto report = run_suite(c);
    const auto& tr = result_named(report, "translation");
    CHECK(tr.status == CheckStatus::fail);
    CHECK(report.overall() == CheckStatus::fail);
    int replayed = 0;
    for (const auto& check : report.checks) {
        for (std::size_t i = 0; i < check.instances.size(); i += 3) {
            const auto& rec = check.instances[i];
            const auto again = replay_instance(rec.fingerprint);
            CHECK(std::abs(again.ratio - rec.ratio) <= 1e-12 * std::max(1.0, std::abs(rec.ratio)));
            CHECK(again.status == rec.status);
            ++replayed;
        }
    }
    CHECK(replayed > 10);
    const auto worst = replay_instance(tr.worst_fingerprint);
    CHECK(worst.ratio == tr.worst_ratio);
    CHECK(worst.status == CheckStatus::fail);
}

TEST_CASE("check selection and errors") {
    auto c = small_config(0.1);
    c.checks = {"single_cell"};
    const auto report = run_suite(c);
    REQUIRE(report.checks.size() == 1);
    CHECK(report.checks[0].spec.name == "single_cell");
    c.checks = {"no_such_check"};
    CHECK_THROWS_AS(run_suite(c), Error);
    c.checks = {};
    c.distribution = "uniform";
    CHECK_THROWS_AS(run_suite(c), Error);
    CHECK_THROWS_AS(replay_instance("duality#x@seed=1"), Error);
    std::set<std::string> names;
    for (const auto& s : check_specs()) names.insert(s.name);
    CHECK(names.size() == 14);
}

TEST_CASE("triviality rows") {
    SUBCASE("r > t: contributions decay by 2^{n(1/r-1/t)}") {
        for (int n : {1, 2}) {
            const auto rows = triviality_rows(n, 1.5, 2, 3, 12, false);
            REQUIRE(rows.size() == 13);
            for (std::size_t i = 1; i < rows.size(); ++i) {
                CHECK(rows[i].contribution_ratio == doctest::Approx(std::exp2(n * (1.0 / 3 - 1.0 / 2))).epsilon(1e-12));
                CHECK(rows[i].increment > 0.0);
            }
        }
    }
    SUBCASE("r = t: constant contributions, partial norms ~ J^{1/r}") {
        const auto rows = triviality_rows(1, 1.5, 2, 2, 12, false);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            CHECK(rows[i].contribution == doctest::Approx(rows[0].contribution).epsilon(1e-12));
            CHECK(rows[i].partial_norm > rows[i - 1].partial_norm);
        }
        CHECK(rows.back().partial_norm == doctest::Approx(std::sqrt(13.0) * rows[0].contribution).epsilon(1e-12));
    }
    SUBCASE("coarse side decays by 2^{n(1/t-1/p)}") {
        const auto rows = triviality_rows(1, 1.5, 2, 3, 12, true);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            CHECK(rows[i].level == -static_cast<int>(i));
            CHECK(rows[i].contribution_ratio == doctest::Approx(std::exp2(1.0 / 2 - 1.0 / 1.5)).epsilon(1e-12));
        }
        for (std::size_t i = 2; i < rows.size(); ++i) CHECK(rows[i].increment < rows[i - 1].increment);
        CHECK(rows.back().increment < 0.01);
    }
}

TEST_CASE("refinement rows cover the grid") {
    const auto rows = refinement_rows(1, 3, 2, 7);
    CHECK(rows.size() == 6 * 6);
    for (const auto& row : rows) {
        CHECK(row.ratio_J >= 1.0 - 1e-9);
        CHECK(row.ratio_J1 > 0.0);
    }
    CHECK_THROWS_AS(refinement_rows(1, 3, 0, 7), Error);
}

TEST_CASE("run configuration JSON") {
    const auto c = run_config_from_json(R"({"lattice":{"n":2,"J":2,"j_min":-1,"periodic":false},
        "exponents":{"p":1.5,"t":2,"r":"inf","q":3,"eta":1.2,"d":3},
        "solver":{"tol":1e-5,"max_iters":500,"seed":9},
        "corpus":{"scale":0.5,"size":4,"distribution":"sparse","sparsity":0.5},
        "experiment":{"levels":6},"output":{"dir":"x"}})");
    CHECK(c.lattice == LatticeConfig{2, 2, -1, false});
    CHECK(c.r == kInf);
    CHECK(c.eta.value() == 1.2);
    CHECK(c.d == 3);
    CHECK(c.seed == 9);
    CHECK(c.distribution == "sparse");
    CHECK(c.out_dir == "x");
    CHECK_NOTHROW(c.validate(true));
    const auto again = run_config_from_json(to_json(c));
    CHECK(to_json(again) == to_json(c));

    CHECK_THROWS_AS(run_config_from_json(R"({"lattice":{"size":3}})"), Error);
    CHECK_THROWS_AS(run_config_from_json("{"), Error);
    try {
        run_config_from_json(R"({"exponents":{"p":2,"t":3,"r":3}})").validate(false);
        FAIL("trivial regime accepted");
    } catch (const Error& err) {
        CHECK(err.code() == ErrorCode::regime);
        CHECK(std::string(err.what()).find(kDichotomy) != std::string::npos);
    }
    auto p1 = run_config_from_json(R"({"exponents":{"p":1,"t":2,"r":3}})");
    CHECK_NOTHROW(p1.validate(false));
    CHECK_THROWS_AS(p1.validate(true), Error);
}

TEST_CASE("serialization round trips") {
    auto lat = Lattice::make({2, 2, 0, true});
    const auto g = random_function(5, lat, 2, 0.3);
    const auto back = grid_function_from_json(to_json(g));
    CHECK(back.config() == g.config());
    CHECK(std::equal(back.values().begin(), back.values().end(), g.values().begin()));

    const auto e = ExponentSet::make(1.5, 2, 3, 2);
    const auto res = block_norm(g, e);
    const auto dec = decomposition_from_json(to_json(res.decomposition), lat, 2);
    REQUIRE(dec.entries.size() == res.decomposition.entries.size());
    CHECK(dec.cost(e.r_conj()) == res.decomposition.cost(e.r_conj()));
    const auto rebuilt = dec.reconstruct(g);
    const auto orig = res.decomposition.reconstruct(g);
    CHECK(std::equal(rebuilt.values().begin(), rebuilt.values().end(), orig.values().begin()));

    CHECK_THROWS_AS(grid_function_from_json(R"({"n":1,"J":1,"j_min":0,"d":1,"values":[[1]]})"), Error);
    CHECK_THROWS_AS(grid_function_from_json(R"({"n":1,"J":1,"j_min":0,"d":1,"values":[[1],["a"]]})"), Error);
    CHECK_THROWS_AS(decomposition_from_json(R"([{"j":5,"m":[0,0],"lambda":1,"block_values":[]}])", lat, 2), Error);
    CHECK(to_csv(cube_terms(g, e)).rfind("j,m0,m1,term\n", 0) == 0);
}
