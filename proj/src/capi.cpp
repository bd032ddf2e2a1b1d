#include "bmkit/bmkit.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <iomanip>
#include <new>
#include <sstream>
#include <string>

#include "bmkit/bm_norms.hpp"
#include "bmkit/block_norms.hpp"
#include "bmkit/error.hpp"
#include "bmkit/io.hpp"
#include "bmkit/verifier.hpp"

struct bmkit_config {
    bmkit::RunConfig cfg;
};

struct bmkit_function {
    bmkit::GridFunction f;
};

struct bmkit_report {
    bmkit::VerificationReport report;
};

namespace {

thread_local std::string last_error;

bmkit_status fail(bmkit_status code, const std::string& what) {
    last_error = what;
    return code;
}

struct NullArgument {
    std::string what;
};

/// Runs `body` and maps exceptions onto status codes.
template <class F>
bmkit_status guard(F&& body) {
    try {
        last_error.clear();
        body();
        return BMKIT_OK;
    } catch (const NullArgument& err) {
        return fail(BMKIT_E_INVALID_ARGUMENT, err.what);
    } catch (const bmkit::Error& err) {
        return fail(static_cast<bmkit_status>(static_cast<int>(err.code())), err.what());
    } catch (const std::bad_alloc&) {
        return fail(BMKIT_E_INTERNAL, "out of memory");
    } catch (const std::exception& err) {
        return fail(BMKIT_E_INTERNAL, err.what());
    } catch (...) {
        return fail(BMKIT_E_INTERNAL, "unknown error");
    }
}

template <class... P>
void require(const char* what, P*... ptrs) {
    if (((ptrs == nullptr) || ...)) throw NullArgument{std::string("null argument to ") + what};
}

char* dup(const std::string& s) {
    auto* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

bmkit_outcome outcome_of(bmkit::CheckStatus s) {
    switch (s) {
        case bmkit::CheckStatus::pass: return BMKIT_PASS;
        case bmkit::CheckStatus::fail: return BMKIT_FAIL;
        case bmkit::CheckStatus::inconclusive: return BMKIT_INCONCLUSIVE;
    }
    return BMKIT_FAIL;
}

/// The input must sit on the configured lattice with the configured dimension.
void require_match(const bmkit::RunConfig& cfg, const bmkit::GridFunction& f) {
    const auto& lc = f.config();
    const auto& want = cfg.lattice;
    if (lc.n != want.n || lc.J != want.J || lc.j_min != want.j_min) {
        std::ostringstream os;
        os << "input lattice (n=" << lc.n << ", J=" << lc.J << ", j_min=" << lc.j_min
           << ") does not match the configured lattice (n=" << want.n << ", J=" << want.J
           << ", j_min=" << want.j_min << ")";
        throw bmkit::Error(bmkit::ErrorCode::shape, os.str());
    }
    if (f.dim() != cfg.d) {
        throw bmkit::Error(bmkit::ErrorCode::shape, "input has d=" + std::to_string(f.dim()) +
                                                        " but the configuration has d=" + std::to_string(cfg.d));
    }
}

std::string summary(const bmkit::VerificationReport& report) {
    std::ostringstream os;
    os << std::setprecision(6);
    for (const auto& r : report.checks) {
        os << std::left << std::setw(22) << r.spec.name << ' ' << std::setw(12) << bmkit::to_string(r.status)
           << " pass=" << r.passed << " fail=" << r.failed << " inconclusive=" << r.inconclusive
           << " worst=" << r.worst_ratio << " bound=" << r.bound << " (" << std::fixed << std::setprecision(2)
           << r.seconds << " s)" << std::defaultfloat << std::setprecision(6) << '\n';
        if (r.status == bmkit::CheckStatus::fail) os << "  replay: " << r.worst_fingerprint << '\n';
    }
    os << "overall " << bmkit::to_string(report.overall()) << " in " << std::fixed << std::setprecision(2)
       << report.seconds << " s\n";
    return os.str();
}

std::string triviality_csv(const bmkit::RunConfig& c) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "side,level,partial_norm,increment,increment_ratio,contribution,contribution_ratio\n";
    for (bool coarse : {false, true}) {
        const auto rows = bmkit::triviality_rows(c.lattice.n, c.p, c.t, c.r, c.levels, coarse);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& row = rows[i];
            const double inc_ratio = i >= 2 && rows[i - 1].increment != 0.0 ? row.increment / rows[i - 1].increment : 0.0;
            os << (coarse ? "coarse" : "fine") << ',' << row.level << ',' << row.partial_norm << ',' << row.increment
               << ',' << inc_ratio << ',' << row.contribution << ',' << row.contribution_ratio << '\n';
        }
    }
    return os.str();
}

std::string refinement_csv(const bmkit::RunConfig& c) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "quantity,p,t,r,q,eta,J,ratio_J,ratio_J1,drift,bounded_range\n";
    for (const auto& row : bmkit::refinement_rows(c.lattice.n, c.lattice.J, c.corpus_size, c.seed, c.solver)) {
        const auto e = bmkit::ExponentSet::make(row.p, row.t, row.r, row.q);
        bool bounded = true;
        if (row.quantity == "slice") bounded = row.eta < e.r_conj();
        if (row.quantity == "block") bounded = row.eta < e.t_conj();
        os << row.quantity << ',' << row.p << ',' << row.t << ',' << row.r << ',' << row.q << ',' << row.eta << ','
           << c.lattice.J << ',' << row.ratio_J << ',' << row.ratio_J1 << ',' << row.drift() << ','
           << (bounded ? 1 : 0) << '\n';
    }
    return os.str();
}

}  // namespace

extern "C" {

const char* bmkit_last_error(void) { return last_error.c_str(); }

const char* bmkit_version(void) { return "1.0.0"; }

void bmkit_string_free(char* s) { std::free(s); }

bmkit_status bmkit_config_default(bmkit_config** out) {
    return guard([&] {
        require("bmkit_config_default", out);
        *out = new bmkit_config{};
    });
}

bmkit_status bmkit_config_from_json(const char* json, bmkit_config** out) {
    return guard([&] {
        require("bmkit_config_from_json", json, out);
        *out = new bmkit_config{bmkit::run_config_from_json(json)};
    });
}

bmkit_status bmkit_config_load(const char* path, bmkit_config** out) {
    return guard([&] {
        require("bmkit_config_load", path, out);
        *out = new bmkit_config{bmkit::run_config_from_json(bmkit::read_file(path))};
    });
}

void bmkit_config_free(bmkit_config* cfg) { delete cfg; }

bmkit_status bmkit_config_to_json(const bmkit_config* cfg, char** out) {
    return guard([&] {
        require("bmkit_config_to_json", cfg, out);
        *out = dup(bmkit::to_json(cfg->cfg));
    });
}

bmkit_status bmkit_config_set_seed(bmkit_config* cfg, uint64_t seed) {
    return guard([&] {
        require("bmkit_config_set_seed", cfg);
        cfg->cfg.seed = seed;
    });
}

bmkit_status bmkit_config_set_out_dir(bmkit_config* cfg, const char* dir) {
    return guard([&] {
        require("bmkit_config_set_out_dir", cfg, dir);
        cfg->cfg.out_dir = dir;
    });
}

bmkit_status bmkit_config_set_corpus_scale(bmkit_config* cfg, double scale) {
    return guard([&] {
        require("bmkit_config_set_corpus_scale", cfg);
        if (!(scale >= 0.0)) throw bmkit::Error(bmkit::ErrorCode::domain, "corpus scale must be >= 0");
        cfg->cfg.corpus_scale = scale;
    });
}

bmkit_status bmkit_config_out_dir(const bmkit_config* cfg, char** out) {
    return guard([&] {
        require("bmkit_config_out_dir", cfg, out);
        *out = dup(cfg->cfg.out_dir);
    });
}

bmkit_status bmkit_config_validate(const bmkit_config* cfg, int block_side) {
    return guard([&] {
        require("bmkit_config_validate", cfg);
        cfg->cfg.validate(block_side != 0);
    });
}

bmkit_status bmkit_function_from_json(const char* json, bmkit_function** out) {
    return guard([&] {
        require("bmkit_function_from_json", json, out);
        *out = new bmkit_function{bmkit::grid_function_from_json(json)};
    });
}

bmkit_status bmkit_function_load(const char* path, bmkit_function** out) {
    return guard([&] {
        require("bmkit_function_load", path, out);
        *out = new bmkit_function{bmkit::grid_function_from_json(bmkit::read_file(path))};
    });
}

void bmkit_function_free(bmkit_function* f) { delete f; }

bmkit_status bmkit_function_to_json(const bmkit_function* f, char** out) {
    return guard([&] {
        require("bmkit_function_to_json", f, out);
        *out = dup(bmkit::to_json(f->f));
    });
}

bmkit_status bmkit_bm_norm(const bmkit_config* cfg, const bmkit_function* f, double* value) {
    return guard([&] {
        require("bmkit_bm_norm", cfg, f, value);
        cfg->cfg.validate(false);
        require_match(cfg->cfg, f->f);
        *value = bmkit::bm_norm(f->f, cfg->cfg.exponents());
    });
}

bmkit_status bmkit_block_norm(const bmkit_config* cfg, const bmkit_function* f, double* value, double* lower,
                              char** decomposition_json) {
    return guard([&] {
        require("bmkit_block_norm", cfg, f, value);
        cfg->cfg.validate(true);
        require_match(cfg->cfg, f->f);
        const auto res = bmkit::block_norm(f->f, cfg->cfg.exponents(), cfg->cfg.solver);
        *value = res.value;
        if (lower) *lower = res.lower_bound;
        if (decomposition_json) *decomposition_json = dup(bmkit::to_json(res.decomposition));
    });
}

bmkit_status bmkit_dual_norm(const bmkit_config* cfg, const bmkit_function* f, double* value, double* upper,
                             int* converged, char** certificate_json) {
    return guard([&] {
        require("bmkit_dual_norm", cfg, f, value);
        cfg->cfg.validate(true);
        require_match(cfg->cfg, f->f);
        const auto res = bmkit::dual_norm(f->f, cfg->cfg.exponents(), cfg->cfg.solver);
        *value = res.value;
        if (upper) *upper = res.upper_bound;
        if (converged) *converged = res.converged ? 1 : 0;
        if (certificate_json) *certificate_json = dup(bmkit::to_json(res.certificate));
    });
}

bmkit_status bmkit_slice_norm(const bmkit_config* cfg, const bmkit_function* f, int scale, double* value) {
    return guard([&] {
        require("bmkit_slice_norm", cfg, f, value);
        cfg->cfg.validate(true);
        require_match(cfg->cfg, f->f);
        *value = bmkit::slice_norm(f->f, cfg->cfg.exponents(), scale);
    });
}

bmkit_status bmkit_cont_char(const bmkit_config* cfg, const bmkit_function* f, double* value) {
    return guard([&] {
        require("bmkit_cont_char", cfg, f, value);
        cfg->cfg.validate(false);
        require_match(cfg->cfg, f->f);
        *value = bmkit::continuous_char_estimate(f->f, cfg->cfg.exponents());
    });
}

bmkit_status bmkit_cube_terms_csv(const bmkit_config* cfg, const bmkit_function* f, char** out) {
    return guard([&] {
        require("bmkit_cube_terms_csv", cfg, f, out);
        cfg->cfg.validate(false);
        require_match(cfg->cfg, f->f);
        *out = dup(bmkit::to_csv(bmkit::cube_terms(f->f, cfg->cfg.exponents())));
    });
}

bmkit_status bmkit_finite_decomposition(const bmkit_config* cfg, const bmkit_function* f, double tol, double* cost,
                                        double* optimum, char** decomposition_json) {
    return guard([&] {
        require("bmkit_finite_decomposition", cfg, f, cost);
        cfg->cfg.validate(true);
        require_match(cfg->cfg, f->f);
        const auto res = bmkit::finite_decomposition(f->f, cfg->cfg.exponents(), tol, cfg->cfg.solver);
        *cost = res.cost;
        if (optimum) *optimum = res.optimum;
        if (decomposition_json) *decomposition_json = dup(bmkit::to_json(res.decomposition));
    });
}

bmkit_status bmkit_verify(const bmkit_config* cfg, const char* checks, int tamper, bmkit_report** out) {
    return guard([&] {
        require("bmkit_verify", cfg, out);
        cfg->cfg.validate_ranges();
        auto vc = cfg->cfg.verify_config();
        vc.tamper_translation_constant = tamper != 0;
        if (checks && *checks) {
            std::stringstream ss(checks);
            std::string name;
            while (std::getline(ss, name, ',')) {
                if (!name.empty()) vc.checks.push_back(name);
            }
        }
        *out = new bmkit_report{bmkit::run_suite(vc)};
    });
}

void bmkit_report_free(bmkit_report* report) { delete report; }

bmkit_status bmkit_report_outcome(const bmkit_report* report, bmkit_outcome* out) {
    return guard([&] {
        require("bmkit_report_outcome", report, out);
        *out = outcome_of(report->report.overall());
    });
}

bmkit_status bmkit_report_json(const bmkit_report* report, char** out) {
    return guard([&] {
        require("bmkit_report_json", report, out);
        *out = dup(bmkit::report_json(report->report));
    });
}

bmkit_status bmkit_report_timing_json(const bmkit_report* report, char** out) {
    return guard([&] {
        require("bmkit_report_timing_json", report, out);
        *out = dup(bmkit::report_timing_json(report->report));
    });
}

bmkit_status bmkit_report_csv(const bmkit_report* report, char** out) {
    return guard([&] {
        require("bmkit_report_csv", report, out);
        *out = dup(bmkit::report_csv(report->report));
    });
}

bmkit_status bmkit_report_summary(const bmkit_report* report, char** out) {
    return guard([&] {
        require("bmkit_report_summary", report, out);
        *out = dup(summary(report->report));
    });
}

bmkit_status bmkit_replay(const char* fingerprint, double* ratio, double* bound, bmkit_outcome* outcome) {
    return guard([&] {
        require("bmkit_replay", fingerprint, ratio);
        const auto rec = bmkit::replay_instance(fingerprint);
        *ratio = rec.ratio;
        if (bound) *bound = rec.bound;
        if (outcome) *outcome = outcome_of(rec.status);
    });
}

bmkit_status bmkit_check_names(char** out) {
    return guard([&] {
        require("bmkit_check_names", out);
        std::string names;
        for (const auto& spec : bmkit::check_specs()) {
            if (!names.empty()) names += ',';
            names += spec.name;
        }
        *out = dup(names);
    });
}

bmkit_status bmkit_experiment_csv(const bmkit_config* cfg, const char* kind, char** out) {
    return guard([&] {
        require("bmkit_experiment_csv", cfg, kind, out);
        const std::string k = kind;
        if (k == "triviality") {
            // Trivial regimes are the point of this experiment, so only ranges are checked.
            cfg->cfg.validate_ranges();
            *out = dup(triviality_csv(cfg->cfg));
        } else if (k == "refinement_stability") {
            cfg->cfg.validate_ranges();
            *out = dup(refinement_csv(cfg->cfg));
        } else {
            throw bmkit::Error(bmkit::ErrorCode::domain,
                               "unknown experiment '" + k + "' (expected triviality or refinement_stability)");
        }
    });
}

bmkit_status bmkit_write_file_atomic(const char* path, const char* content) {
    return guard([&] {
        require("bmkit_write_file_atomic", path, content);
        bmkit::write_file_atomic(path, content);
    });
}

}  // extern "C"
