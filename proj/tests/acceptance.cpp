// Acceptance criteria 1-10: one PASS/FAIL line each. Tolerances and time
// budgets are fixed here. --expect-fail LIST names criteria known to fail;
// the exit status is 0 iff the failing set equals that list exactly.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bmkit/block_norms.hpp"
#include "bmkit/bm_norms.hpp"
#include "bmkit/io.hpp"
#include "bmkit/operators.hpp"
#include "bmkit/verifier.hpp"
#include "oracles.hpp"

using namespace bmkit;

namespace {

// Pinned tolerances.
constexpr double kDualityGap = 1e-4;
constexpr double kSingleCellRel = 1e-6;
constexpr double kClosedFormVsBrute = 1e-8;
constexpr double kPairingSlack = 1e-6;
constexpr double kTranslationSlack = 1e-4;
constexpr double kConvolutionSlack = 1e-4;
constexpr double kRefinementDrift = 0.10;
constexpr double kTrivialityRatio = 1e-3;
constexpr double kRateTFloor = 0.9;

// Time budgets in seconds (summed per-instance time, i.e. single-core work).
constexpr double kBudget[11] = {0, 30, 5, 10, 30, 30, 10, 60, 5, 30, 0};

// Random-corpus sizes required by the criteria.
constexpr int kNeed[11] = {0, 100, 50, 100, 50, 50, 0, 0, 0, 50, 0};

struct Line {
    int id;
    std::string title;
    bool pass = true;
    std::string detail;
    double seconds = 0.0;
};

double since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double x, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << x;
    return os.str();
}

const CheckResult& get(const VerificationReport& r, const std::string& name) {
    for (const auto& c : r.checks) {
        if (c.spec.name == name) return c;
    }
    throw std::runtime_error("report lacks check " + name);
}

int random_instances(const CheckResult& c) {
    return static_cast<int>(std::count_if(c.instances.begin(), c.instances.end(), [](const auto& i) { return i.index >= 0; }));
}

/// Common shape of a suite-backed criterion: status pass, enough instances, within budget.
void suite_gate(Line& line, const CheckResult& c, int need) {
    if (c.status != CheckStatus::pass) {
        line.pass = false;
        line.detail += c.spec.name + " " + to_string(c.status) + " (fail=" + std::to_string(c.failed) +
                       ", inconclusive=" + std::to_string(c.inconclusive) + ", worst " + c.worst_fingerprint + "); ";
    }
    if (random_instances(c) < need) {
        line.pass = false;
        line.detail += c.spec.name + " has only " + std::to_string(random_instances(c)) + " random instances; ";
    }
    line.seconds += c.seconds;
}

void budget(Line& line) {
    if (kBudget[line.id] > 0 && line.seconds > kBudget[line.id]) {
        line.pass = false;
        line.detail = "over the " + num(kBudget[line.id]) + " s budget; " + line.detail;
    }
}

Line criterion1(const VerificationReport& r) {
    Line line{1, "duality equality"};
    const auto& c = get(r, "duality");
    suite_gate(line, c, kNeed[1]);
    double worst_gap = 0.0, worst_excess = 0.0;
    for (const auto& i : c.instances) {
        worst_gap = std::max(worst_gap, 1.0 - i.ratio);
        worst_excess = std::max(worst_excess, i.ratio - 1.0);
    }
    if (worst_gap > kDualityGap || worst_excess > 1e-12) line.pass = false;
    line.detail += std::to_string(c.instances.size()) + " instances (8 cells, d<=4), worst gap " + num(worst_gap, 3) +
                   " <= " + num(kDualityGap) + ", dual above block by at most " + num(worst_excess, 3) + ", " +
                   std::to_string(c.inconclusive) + " not converged";
    return line;
}

Line criterion2(const VerificationReport& r) {
    Line line{2, "single-cell closed form"};
    // The closed form is validated against brute-force splitting search first.
    const auto t0 = std::chrono::steady_clock::now();
    double worst_brute = 0.0;
    int cases = 0;
    for (double r_ : {2.5, 3.0, 6.0, kInf}) {
        for (int levels : {2, 3, 4}) {
            for (int n : {1, 2}) {
                if (n == 2 && levels > 3) continue;
                const auto e = ExponentSet::make(1.5, 2.2, r_, 1.8);
                auto lat = Lattice::make({n, levels - 1, 0, true});
                const std::size_t cell = lat->cell_count() - 1;
                const std::vector<double> v{0.3, -1.2, 0.7};
                GridFunction g(lat, 3);
                for (int i = 0; i < 3; ++i) g.at(cell, i) = v[static_cast<std::size_t>(i)];
                std::vector<double> caps;
                for (auto id : lat->ancestors(cell)) {
                    caps.push_back(cube_power(lat->cube(id).j, n, 1.0 / e.t_conj() - 1.0 / e.p_conj()));
                }
                const double base = value_norm(v, e.q_conj()) * std::pow(lat->cell_volume(), 1.0 / e.p_conj());
                const double brute = oracle::single_cell_splitting(caps, base, e.r_conj());
                worst_brute = std::max(worst_brute, std::abs(single_cell_block_norm(g, e) / brute - 1.0));
                ++cases;
            }
        }
    }
    line.seconds += since(t0);
    if (worst_brute > kClosedFormVsBrute) line.pass = false;
    const auto& c = get(r, "single_cell");
    suite_gate(line, c, kNeed[2]);
    double worst = 0.0;
    for (const auto& i : c.instances) worst = std::max(worst, std::abs(i.ratio - 1.0));
    line.detail += "closed form vs brute force on " + std::to_string(cases) + " chains: " + num(worst_brute, 3) +
                   "; optimizer vs closed form on " + std::to_string(c.instances.size()) + " instances: " +
                   num(worst, 3) + " <= " + num(kSingleCellRel);
    return line;
}

Line criterion3(const VerificationReport& r) {
    Line line{3, "Holder pairing"};
    const auto& c = get(r, "pairing");
    suite_gate(line, c, kNeed[3]);
    double worst = 0.0;
    for (const auto& i : c.instances) {
        if (i.index >= 0) worst = std::max(worst, i.ratio);
    }
    if (worst > 1.0 + kPairingSlack) line.pass = false;
    line.detail += std::to_string(random_instances(c)) + " random pairs, max |<g,f>|/(||g||_H ||f||_BM) = " +
                   num(worst, 6) + " <= 1+" + num(kPairingSlack) + "; dual certificates attain >= 0.999";
    return line;
}

Line criterion4(const VerificationReport& r, const VerifyConfig& base) {
    Line line{4, "translation constant 2^{n/r'}"};
    const auto& c = get(r, "translation");
    suite_gate(line, c, kNeed[4]);
    double worst = 0.0, shifts = 0.0;
    for (const auto& i : c.instances) {
        worst = std::max(worst, i.ratio / (i.bound * (1.0 + kTranslationSlack)));
        if (i.index >= 0) shifts += i.notes.count("shifts") ? i.notes.at("shifts") : 0.0;
    }
    if (worst > 1.0) line.pass = false;
    // Negative control: with the constant replaced by 1 the check must fail.
    auto tampered = base;
    tampered.checks = {"translation"};
    tampered.corpus_scale = 0.2;
    tampered.tamper_translation_constant = true;
    const auto control = run_suite(tampered);
    const bool control_fails = control.overall() == CheckStatus::fail;
    if (!control_fails) line.pass = false;
    line.detail += std::to_string(random_instances(c)) + " functions x all " + num(shifts / std::max(1, random_instances(c))) +
                   " shifts on 16 periodic cells, worst ratio/bound " + num(worst, 6) + " <= 1; tampered constant " +
                   (control_fails ? "fails as it should" : "DID NOT fail");
    return line;
}

Line criterion5(const VerificationReport& r) {
    Line line{5, "convolution bound"};
    const auto& c = get(r, "convolution");
    suite_gate(line, c, kNeed[5]);
    double worst = 0.0;
    for (const auto& i : c.instances) {
        if (i.index >= 0) worst = std::max(worst, i.ratio / (i.bound * (1.0 + kConvolutionSlack)));
    }
    if (worst > 1.0) line.pass = false;
    line.detail += std::to_string(random_instances(c)) + " (f, k) pairs, worst ratio/bound " + num(worst, 6) +
                   " <= 1; Dirac kernel reproduces translation to 1e-12";
    return line;
}

Line criterion6(const VerificationReport& r) {
    Line line{6, "E_k bound and convergence"};
    const auto& bound = get(r, "ek_bound");
    const auto& conv = get(r, "ek_convergence");
    suite_gate(line, bound, 60);
    suite_gate(line, conv, 60);
    // Literal clause: ||f - E_k f|| non-increasing in k on the corpus.
    const double steps = conv.stats.count("steps") ? conv.stats.at("steps") : 0.0;
    const double ups = conv.stats.count("strict_increases") ? conv.stats.at("strict_increases") : 0.0;
    const double worst_up = conv.stats.count("worst_increase_max") ? conv.stats.at("worst_increase_max") : 0.0;
    double worst_bound = 0.0;
    for (const auto& i : bound.instances) worst_bound = std::max(worst_bound, i.ratio / i.bound);
    if (ups > 0.0) {
        line.pass = false;
        line.detail += "non-increase FAILS in " + num(ups) + "/" + num(steps) + " steps (worst +" +
                       num(100.0 * worst_up, 4) + "%), e.g. f=(2,0,0,0,1,1,1,0), (p,t,r,q)=(2,3,4,2): step ratio 1.0209; ";
    }
    line.detail += "bound holds with worst ratio/C " + num(worst_bound, 6) + " on " +
                   std::to_string(bound.instances.size()) + " functions; exact 0 at k=J and the (1+C) quasi-monotone bound hold";
    return line;
}

Line criterion7(const VerificationReport& r) {
    Line line{7, "maximal refinement stability"};
    const auto& bm = get(r, "maximal_bm");
    const auto& blk = get(r, "maximal_block");
    line.seconds = bm.seconds + blk.seconds;
    // Literal: every measured quantity, including eta outside the bounded range.
    double worst = 0.0;
    std::vector<std::string> offenders;
    for (const auto* c : {&bm, &blk}) {
        for (const auto& i : c->instances) {
            std::vector<double> drifts;
            if (i.notes.count("unjudged_cases") == 0) drifts.push_back(i.ratio - 1.0);
            for (const auto& [k, v] : i.notes) {
                if (k.find("_unbounded_drift_max") != std::string::npos) drifts.push_back(v);
            }
            for (double d : drifts) {
                worst = std::max(worst, std::abs(d));
                if (std::abs(d) > kRefinementDrift) offenders.push_back(i.label.substr(0, i.label.find(" corpus")) + " drift " + num(100 * d, 3) + "%");
            }
        }
    }
    const bool bounded_ok = bm.status == CheckStatus::pass && blk.status == CheckStatus::pass;
    if (!offenders.empty() || !bounded_ok) line.pass = false;
    line.detail += "J=5->6 worst drift " + num(100 * worst, 3) + "% (limit " + num(100 * kRefinementDrift) + "%); ";
    line.detail += std::string("quantities inside the bounded range (slice eta<r', block eta<t') ") +
                   (bounded_ok ? "pass" : "FAIL") + "; ";
    if (!offenders.empty()) {
        line.detail += std::to_string(offenders.size()) + " offenders" +
                       (bounded_ok ? ", all with eta >= r' (slice) or t' (block), where M_eta is unbounded" : "") + ": ";
        for (std::size_t k = 0; k < offenders.size(); ++k) line.detail += (k ? "; " : "") + offenders[k];
    }
    return line;
}

Line criterion8(const VerificationReport& r) {
    Line line{8, "triviality dichotomy"};
    const auto t0 = std::chrono::steady_clock::now();
    double worst_ratio = 0.0, worst_floor = kInf;
    int cases = 0;
    for (int n : {1, 2}) {
        const int levels = n == 1 ? 12 : 8;  // 4^12 cells in 2D is beyond desk scale
        for (auto [p, t, r_] : std::vector<std::array<double, 3>>{{1.5, 2, 3}, {2, 3, 4}, {1.25, 2, 5}}) {
            const auto rows = triviality_rows(n, p, t, r_, levels, false);
            const double target = std::exp2(n * (1.0 / r_ - 1.0 / t));
            worst_ratio = std::max(worst_ratio, std::abs(rows.back().contribution_ratio - target));
            ++cases;
        }
        for (auto [p, t] : std::vector<std::array<double, 2>>{{1.5, 2}, {2, 3}}) {
            const auto rows = triviality_rows(n, p, t, t, levels, false);
            for (const auto& row : rows) worst_floor = std::min(worst_floor, row.contribution / rows.front().contribution);
            ++cases;
        }
    }
    line.seconds += since(t0);
    if (worst_ratio > kTrivialityRatio || worst_floor < kRateTFloor) line.pass = false;
    suite_gate(line, get(r, "triviality"), 0);
    line.detail += std::to_string(cases) + " exponent sets, J<=12 (n=1), J<=8 (n=2): r>t ratio error " + num(worst_ratio, 3) + " <= " +
                   num(kTrivialityRatio) + "; r=t contribution floor " + num(worst_floor, 6) + " >= " + num(kRateTFloor);
    return line;
}

Line criterion9(const VerificationReport& r) {
    Line line{9, "lattice monotonicity and Fatou"};
    const auto& lat = get(r, "lattice");
    const auto& fat = get(r, "fatou");
    suite_gate(line, lat, kNeed[9]);
    suite_gate(line, fat, 1);
    double worst_lat = 0.0, worst_fat = 0.0;
    for (const auto& i : lat.instances) worst_lat = std::max(worst_lat, i.ratio);
    for (const auto& i : fat.instances) worst_fat = std::max(worst_fat, i.ratio);
    line.detail += std::to_string(random_instances(lat)) + " dominated pairs, max ||f||/||g|| " + num(worst_lat, 8) +
                   "; " + std::to_string(random_instances(fat)) + " truncation sequences, max ratio " +
                   num(worst_fat, 8) + " (solver tol " + num(r.config.solver.tol) + ")";
    return line;
}

Line criterion10(const std::string& first, const VerifyConfig& config) {
    Line line{10, "determinism"};
    const auto t0 = std::chrono::steady_clock::now();
    const auto second = report_json(run_suite(config));
    line.seconds = since(t0);
    line.pass = first == second;
    line.detail = std::string("two full runs with seed ") + std::to_string(config.seed) + ": reports " +
                  (line.pass ? "byte-identical" : "DIFFER") + " (" + std::to_string(first.size()) + " bytes)";
    return line;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string expect_fail;
    std::string report_path;
    app.add_option("--expect-fail", expect_fail, "comma-separated criteria expected to fail");
    app.add_option("--report", report_path, "also write the suite report JSON here");
    CLI11_PARSE(app, argc, argv);

    std::set<int> expected;
    {
        std::stringstream ss(expect_fail);
        for (std::string item; std::getline(ss, item, ',');) {
            if (!item.empty()) expected.insert(std::stoi(item));
        }
    }

    VerifyConfig config;  // default seed, full corpus
    const auto t0 = std::chrono::steady_clock::now();
    const auto report = run_suite(config);
    const auto first = report_json(report);
    if (!report_path.empty()) write_file_atomic(report_path, first);
    std::cout << "suite: " << report.checks.size() << " checks in " << num(since(t0), 3) << " s wall\n";

    std::vector<Line> lines = {criterion1(report), criterion2(report), criterion3(report), criterion4(report, config),
                               criterion5(report), criterion6(report), criterion7(report), criterion8(report),
                               criterion9(report), criterion10(first, config)};
    std::set<int> failed;
    for (auto& line : lines) {
        budget(line);
        if (!line.pass) failed.insert(line.id);
        char head[96];
        std::snprintf(head, sizeof head, "[%s] %2d %-32s (%6.2f s) ", line.pass ? "PASS" : "FAIL", line.id,
                      line.title.c_str(), line.seconds);
        std::cout << head << line.detail;
        if (!line.pass && expected.count(line.id)) std::cout << " [expected]";
        std::cout << '\n';
    }
    std::cout << "passed " << 10 - failed.size() << "/10";
    if (!expected.empty()) {
        std::cout << "; expected failures:";
        for (int id : expected) std::cout << ' ' << id;
    }
    std::cout << '\n';
    if (failed != expected) {
        std::cout << "failing set differs from the expected set\n";
        return 1;
    }
    return 0;
}
