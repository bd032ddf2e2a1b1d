#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bmkit/block_norms.hpp"

namespace bmkit {

enum class CheckStatus { pass, fail, inconclusive };
const char* to_string(CheckStatus s);

/// How a measured ratio is judged.
/// le:       ratio <= bound * (1 + tolerance)
/// ge:       ratio >= bound
/// eq:       |ratio - bound| <= tolerance
/// drift:    |ratio - 1| <= tolerance (refinement stability)
enum class Relation { le, ge, eq, drift };
const char* to_string(Relation r);

struct CheckSpec {
    std::string name;
    std::string anchor;    // statement of the result being certified
    Relation relation = Relation::le;
    double tolerance = 0.0;
    std::string lattices;  // human-readable lattice sizes
    std::string exponents; // human-readable exponent grid
    int base_instances = 0; // random-corpus instances at corpus_scale = 1
};

/// All checks of the suite, in run order.
const std::vector<CheckSpec>& check_specs();

struct InstanceRecord {
    int index = 0;          // crafted instances use negative indices
    double ratio = 0.0;
    double bound = 0.0;
    double margin = 0.0;      // distance to failure in units of the allowance; > 1 fails
    CheckStatus status = CheckStatus::pass;
    std::string fingerprint;  // replay key, see replay_instance
    std::string label;        // lattice, exponents and corpus kind
    /// Check-specific counters: keys ending in "_max" merge by max, others by sum.
    std::map<std::string, double> notes;
};

struct CheckResult {
    CheckSpec spec;
    CheckStatus status = CheckStatus::pass;
    int passed = 0, failed = 0, inconclusive = 0;
    double worst_ratio = 0.0;  // the instance furthest from (or beyond) its bound
    double bound = 0.0;        // bound used at the worst instance
    std::string worst_fingerprint;
    std::map<std::string, double> stats;  // check-specific summary numbers
    std::vector<InstanceRecord> instances;
    double seconds = 0.0;
};

struct VerifyConfig {
    std::uint64_t seed = 20240601;
    double corpus_scale = 1.0;  // multiplies every random-corpus size; 0 keeps crafted instances only
    std::vector<std::string> checks;  // empty: all
    SolverOptions solver{};
    std::string distribution = "mixture";  // mixture, dense, sparse or single_block
    double sparsity = 0.75;                // fraction of zeroed cells in sparse members
    int threads = 0;  // 0: BMKIT_THREADS, else hardware concurrency
    bool tamper_translation_constant = false;  // negative control: 2^{n/r'} replaced by 1
};

struct VerificationReport {
    static constexpr int kSchemaVersion = 1;
    VerifyConfig config;
    std::vector<CheckResult> checks;
    double seconds = 0.0;
    CheckStatus overall() const;
};

/// Runs the selected checks. Every instance is derived from
/// (config.seed, check name, index), so results do not depend on the thread count.
VerificationReport run_suite(const VerifyConfig& config);

/// Recomputes one instance from its fingerprint
/// "check#index@seed=S;scale=X;tol=T;iters=N;dist=D;sparsity=F[;tamper]".
InstanceRecord replay_instance(const std::string& fingerprint);

/// Worker count: BMKIT_THREADS if set (>= 1), else hardware concurrency.
int default_thread_count();

/// C = (1 + sum_{i>=1} 2^{n r i (1/r - 1/t)})^{1/r}; 1 for r = inf.
double ek_constant(int n, double r, double t);

/// Triviality experiment rows. Fine side: f = indicator of the window [0,1)^n
/// with j_min = 0 and J = 0..levels. Coarse side: the same f on the window
/// [0, 2^k)^n with J = 0 and j_min = -k, k = 0..levels.
struct TrivialityRow {
    int level = 0;            // J (fine) or j_min (coarse)
    double partial_norm = 0.0;
    double contribution = 0.0;  // per-scale l^r slice at the new level
    double contribution_ratio = 0.0;  // contribution / previous contribution (0 on the first row)
    double increment = 0.0;     // partial_norm - previous partial norm
};
std::vector<TrivialityRow> triviality_rows(int n, double p, double t, double r, int levels, bool coarse_side);

/// Refinement study: operator-norm ratio estimates at J and J+1.
struct RefinementRow {
    std::string quantity;  // per_scale_bm, per_scale_bm_scalar, slice, block
    double p = 0, t = 0, r = 0, q = 0, eta = 1;
    double ratio_J = 0.0, ratio_J1 = 0.0;
    double drift() const { return ratio_J1 / ratio_J - 1.0; }
};
std::vector<RefinementRow> refinement_rows(int n, int J, int corpus_size, std::uint64_t seed,
                                           const SolverOptions& solver = {});

}  // namespace bmkit
