#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bmkit/block_norms.hpp"
#include "bmkit/bm_norms.hpp"
#include "bmkit/verifier.hpp"

namespace bmkit {

/// {"n", "J", "j_min", "d", "values": [[...] per cell, row-major]}, plus
/// "periodic" (default true). Doubles are written with round-trip precision.
std::string to_json(const GridFunction& f);
GridFunction grid_function_from_json(const std::string& text);

/// List of {"j", "m": [m_0(, m_1)], "lambda", "block_values": [[...] per cell of Q, ascending]}.
std::string to_json(const BlockDecomposition& dec);
BlockDecomposition decomposition_from_json(const std::string& text, const LatticePtr& lattice, int d);

/// {"value", "f_star": GridFunction}
std::string to_json(const DualCertificate& cert);

/// Header j,m0,m1,term.
std::string to_csv(const CubeTermTable& table);

/// Deterministic report: no timings, so two runs with one seed are byte-identical.
std::string report_json(const VerificationReport& report);
/// Per-check and total wall-clock seconds.
std::string report_timing_json(const VerificationReport& report);
/// Header check,instance,ratio,bound,status,fingerprint.
std::string report_csv(const VerificationReport& report);

/// All inputs of one run. Flags on the command line override fields.
struct RunConfig {
    LatticeConfig lattice{1, 3, 0, true};
    double p = 2, t = 3, r = 4, q = 2;
    std::optional<double> eta;
    int d = 1;
    SolverOptions solver{};
    std::uint64_t seed = 20240601;
    double corpus_scale = 1.0;  // verification corpus multiplier
    int corpus_size = 30;       // refinement experiment corpus per exponent point
    std::string distribution = "mixture";
    double sparsity = 0.75;
    int levels = 12;            // triviality experiment depth
    std::string out_dir = ".";

    ExponentSet exponents() const;
    /// Lattice, exponent ranges, dimension and solver settings.
    void validate_ranges() const;
    /// validate_ranges plus the nontriviality dichotomy; `block_side` also needs p > 1.
    void validate(bool block_side) const;
    VerifyConfig verify_config() const;
};

/// Missing keys keep their defaults; unknown keys are rejected; r may be "inf".
RunConfig run_config_from_json(const std::string& text);
std::string to_json(const RunConfig& config);

std::string read_file(const std::string& path);
/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace bmkit
