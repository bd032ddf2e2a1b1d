// Command-line front end. Every number printed here comes from the C API.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bmkit/bmkit.h"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitInconclusive = 2;
constexpr int kExitUsage = 64;

struct ApiFailure {
    bmkit_status status;
    std::string message;
};

void check(bmkit_status s) {
    if (s != BMKIT_OK) throw ApiFailure{s, bmkit_last_error()};
}

struct ConfigDeleter {
    void operator()(bmkit_config* c) const { bmkit_config_free(c); }
};
struct FunctionDeleter {
    void operator()(bmkit_function* f) const { bmkit_function_free(f); }
};
struct ReportDeleter {
    void operator()(bmkit_report* r) const { bmkit_report_free(r); }
};
using ConfigPtr = std::unique_ptr<bmkit_config, ConfigDeleter>;
using FunctionPtr = std::unique_ptr<bmkit_function, FunctionDeleter>;
using ReportPtr = std::unique_ptr<bmkit_report, ReportDeleter>;

/// Owns a string returned by the C API.
std::string take(char* s) {
    std::string out = s ? s : "";
    bmkit_string_free(s);
    return out;
}

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

ConfigPtr load_config(const Common& c) {
    bmkit_config* raw = nullptr;
    if (c.config_path.empty()) check(bmkit_config_default(&raw));
    else check(bmkit_config_load(c.config_path.c_str(), &raw));
    ConfigPtr cfg(raw);
    if (c.seed) check(bmkit_config_set_seed(cfg.get(), *c.seed));
    if (!c.out_dir.empty()) check(bmkit_config_set_out_dir(cfg.get(), c.out_dir.c_str()));
    return cfg;
}

std::string out_path(const bmkit_config* cfg, const std::string& name) {
    char* dir = nullptr;
    check(bmkit_config_out_dir(cfg, &dir));
    std::string d = take(dir);
    if (d.empty()) d = ".";
    return d + "/" + name;
}

void write(const std::string& path, const std::string& content) {
    check(bmkit_write_file_atomic(path.c_str(), content.c_str()));
}

FunctionPtr load_function(const std::string& path) {
    bmkit_function* raw = nullptr;
    check(bmkit_function_load(path.c_str(), &raw));
    return FunctionPtr(raw);
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

int cmd_norm(const Common& common, const std::string& input, const std::string& which, const std::vector<int>& scales) {
    auto cfg = load_config(common);
    auto f = load_function(input);
    std::string json;
    if (which == "bm") {
        double v = 0;
        check(bmkit_bm_norm(cfg.get(), f.get(), &v));
        std::cout << "bm_norm " << fmt(v) << '\n';
        json = "{\"which\":\"bm\",\"value\":" + fmt(v) + "}";
    } else if (which == "cont_char") {
        double v = 0;
        check(bmkit_cont_char(cfg.get(), f.get(), &v));
        std::cout << "cont_char " << fmt(v) << '\n';
        json = "{\"which\":\"cont_char\",\"value\":" + fmt(v) + "}";
    } else if (which == "block") {
        double v = 0, lower = 0;
        char* dec = nullptr;
        check(bmkit_block_norm(cfg.get(), f.get(), &v, &lower, &dec));
        const auto path = out_path(cfg.get(), "block_decomposition.json");
        write(path, take(dec));
        std::cout << "block_norm " << fmt(v) << "\nlower_bound " << fmt(lower) << "\ndecomposition " << path << '\n';
        json = "{\"which\":\"block\",\"value\":" + fmt(v) + ",\"lower_bound\":" + fmt(lower) + "}";
    } else if (which == "dual") {
        double v = 0, upper = 0;
        int converged = 0;
        char* cert = nullptr;
        check(bmkit_dual_norm(cfg.get(), f.get(), &v, &upper, &converged, &cert));
        const auto path = out_path(cfg.get(), "dual_certificate.json");
        write(path, take(cert));
        std::cout << "dual_norm " << fmt(v) << "\nupper_bound " << fmt(upper) << "\nconverged "
                  << (converged ? "yes" : "no") << "\ncertificate " << path << '\n';
        json = "{\"which\":\"dual\",\"value\":" + fmt(v) + ",\"upper_bound\":" + fmt(upper) +
               ",\"converged\":" + (converged ? "true" : "false") + "}";
    } else if (which == "slice") {
        if (scales.empty()) throw CLI::ValidationError("--scale", "which=slice needs at least one --scale J");
        json = "{\"which\":\"slice\",\"values\":{";
        for (std::size_t i = 0; i < scales.size(); ++i) {
            double v = 0;
            check(bmkit_slice_norm(cfg.get(), f.get(), scales[i], &v));
            std::cout << "slice_norm[" << scales[i] << "] " << fmt(v) << '\n';
            json += (i ? ",\"" : "\"") + std::to_string(scales[i]) + "\":" + fmt(v);
        }
        json += "}}";
    }
    write(out_path(cfg.get(), "norm_" + which + ".json"), json + "\n");
    return kExitPass;
}

int cmd_decompose(const Common& common, const std::string& input, double tol) {
    auto cfg = load_config(common);
    auto f = load_function(input);
    double cost = 0, optimum = 0;
    char* dec = nullptr;
    check(bmkit_finite_decomposition(cfg.get(), f.get(), tol, &cost, &optimum, &dec));
    const auto path = out_path(cfg.get(), "decomposition.json");
    write(path, take(dec));
    std::cout << "cost " << fmt(cost) << "\noptimum " << fmt(optimum) << "\ndecomposition " << path << '\n';
    return kExitPass;
}

int cmd_verify(const Common& common, const std::string& checks, std::optional<double> corpus_scale, bool tamper) {
    auto cfg = load_config(common);
    if (corpus_scale) check(bmkit_config_set_corpus_scale(cfg.get(), *corpus_scale));
    bmkit_report* raw = nullptr;
    check(bmkit_verify(cfg.get(), checks.c_str(), tamper ? 1 : 0, &raw));
    ReportPtr report(raw);
    char* s = nullptr;
    check(bmkit_report_json(report.get(), &s));
    write(out_path(cfg.get(), "report.json"), take(s));
    check(bmkit_report_csv(report.get(), &s));
    write(out_path(cfg.get(), "report.csv"), take(s));
    check(bmkit_report_timing_json(report.get(), &s));
    write(out_path(cfg.get(), "timing.json"), take(s));
    check(bmkit_report_summary(report.get(), &s));
    std::cout << take(s);
    bmkit_outcome outcome = BMKIT_FAIL;
    check(bmkit_report_outcome(report.get(), &outcome));
    switch (outcome) {
        case BMKIT_PASS: return kExitPass;
        case BMKIT_INCONCLUSIVE: return kExitInconclusive;
        default: return kExitFail;
    }
}

int cmd_replay(const std::string& fingerprint) {
    double ratio = 0, bound = 0;
    bmkit_outcome outcome = BMKIT_FAIL;
    check(bmkit_replay(fingerprint.c_str(), &ratio, &bound, &outcome));
    const char* names[] = {"pass", "fail", "inconclusive"};
    std::cout << "ratio " << fmt(ratio) << "\nbound " << fmt(bound) << "\nstatus " << names[outcome] << '\n';
    return outcome == BMKIT_PASS ? kExitPass : outcome == BMKIT_INCONCLUSIVE ? kExitInconclusive : kExitFail;
}

int cmd_experiment(const Common& common, const std::string& kind) {
    auto cfg = load_config(common);
    char* csv = nullptr;
    check(bmkit_experiment_csv(cfg.get(), kind.c_str(), &csv));
    const auto table = take(csv);
    write(out_path(cfg.get(), kind + ".csv"), table);
    std::cout << table;
    return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bourgain-Morrey and block-space norms on finite dyadic lattices"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(bmkit_version()));

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", common.seed, "override solver.seed");
        sub->add_option("--out", common.out_dir, "output directory (overrides output.dir)");
    };

    std::string input, which = "bm", checks, kind, fingerprint;
    std::vector<int> scales;
    double tol = 1e-3;
    std::optional<double> corpus_scale;
    bool tamper = false;

    auto* norm = app.add_subcommand("norm", "compute one norm of a grid function");
    add_common(norm);
    norm->add_option("--input", input, "grid function JSON")->required()->check(CLI::ExistingFile);
    norm->add_option("--which", which, "bm, block, dual, slice or cont_char")
        ->check(CLI::IsMember({"bm", "block", "dual", "slice", "cont_char"}));
    norm->add_option("--scale", scales, "slice scale J (repeatable)")->allow_extra_args(false);

    auto* decompose = app.add_subcommand("decompose", "export a few-term block decomposition");
    add_common(decompose);
    decompose->add_option("--input", input, "grid function JSON")->required()->check(CLI::ExistingFile);
    decompose->add_option("--tol", tol, "relative cost budget over the optimum")->check(CLI::PositiveNumber);

    auto* verify = app.add_subcommand("verify", "run the property verification suite");
    add_common(verify);
    verify->add_option("--checks", checks, "comma-separated check names (default: all)");
    verify->add_option("--corpus-scale", corpus_scale, "multiplier on random corpus sizes")
        ->check(CLI::NonNegativeNumber);
    verify->add_flag("--debug-tamper-translation", tamper, "negative control: replace 2^{n/r'} by 1")
        ->group("Debug");

    auto* replay = app.add_subcommand("replay", "recompute one instance from its fingerprint");
    replay->add_option("fingerprint", fingerprint, "fingerprint from a report")->required();

    auto* experiment = app.add_subcommand("experiment", "emit an experiment table as CSV");
    add_common(experiment);
    experiment->add_option("kind", kind, "triviality or refinement_stability")
        ->required()
        ->check(CLI::IsMember({"triviality", "refinement_stability"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*norm) return cmd_norm(common, input, which, scales);
        if (*decompose) return cmd_decompose(common, input, tol);
        if (*verify) return cmd_verify(common, checks, corpus_scale, tamper);
        if (*replay) return cmd_replay(fingerprint);
        if (*experiment) return cmd_experiment(common, kind);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ApiFailure& e) {
        std::cerr << "error: " << e.message << '\n';
        return kExitFail;
    }
    return kExitUsage;
}
