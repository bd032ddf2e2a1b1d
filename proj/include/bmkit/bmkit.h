#ifndef BMKIT_H
#define BMKIT_H

/* C interface to the bmkit core. Every function returns a bmkit_status;
 * on failure bmkit_last_error() holds a diagnostic for the calling thread.
 * Strings returned through char** are owned by the caller and released
 * with bmkit_string_free. */

#include <stdint.h>

#if defined(_WIN32)
#define BMKIT_API __declspec(dllexport)
#else
#define BMKIT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
    BMKIT_OK = 0,
    BMKIT_E_DOMAIN = 1,         /* argument outside the operation's domain */
    BMKIT_E_SHAPE = 2,          /* lattice or dimension mismatch */
    BMKIT_E_PARSE = 3,          /* malformed JSON or CSV input */
    BMKIT_E_REGIME = 4,         /* exponents outside the nontrivial regime */
    BMKIT_E_NO_CONVERGENCE = 5, /* optimizer gap did not close */
    BMKIT_E_IO = 6,
    BMKIT_E_INVALID_ARGUMENT = 7, /* null handle or unknown name */
    BMKIT_E_INTERNAL = 8
} bmkit_status;

/* Verification outcome, ordered by severity. */
typedef enum { BMKIT_PASS = 0, BMKIT_FAIL = 1, BMKIT_INCONCLUSIVE = 2 } bmkit_outcome;

typedef struct bmkit_config bmkit_config;
typedef struct bmkit_function bmkit_function;
typedef struct bmkit_report bmkit_report;

BMKIT_API const char* bmkit_last_error(void);
BMKIT_API const char* bmkit_version(void);
BMKIT_API void bmkit_string_free(char* s);

/* Run configuration: lattice, exponents, solver, corpus, experiment, output. */
BMKIT_API bmkit_status bmkit_config_default(bmkit_config** out);
BMKIT_API bmkit_status bmkit_config_from_json(const char* json, bmkit_config** out);
BMKIT_API bmkit_status bmkit_config_load(const char* path, bmkit_config** out);
BMKIT_API void bmkit_config_free(bmkit_config* cfg);
BMKIT_API bmkit_status bmkit_config_to_json(const bmkit_config* cfg, char** out);
BMKIT_API bmkit_status bmkit_config_set_seed(bmkit_config* cfg, uint64_t seed);
BMKIT_API bmkit_status bmkit_config_set_out_dir(bmkit_config* cfg, const char* dir);
BMKIT_API bmkit_status bmkit_config_set_corpus_scale(bmkit_config* cfg, double scale);
BMKIT_API bmkit_status bmkit_config_out_dir(const bmkit_config* cfg, char** out);
/* Range checks plus the nontriviality dichotomy; block_side != 0 also needs p > 1. */
BMKIT_API bmkit_status bmkit_config_validate(const bmkit_config* cfg, int block_side);

/* Grid functions in the JSON exchange format. */
BMKIT_API bmkit_status bmkit_function_from_json(const char* json, bmkit_function** out);
BMKIT_API bmkit_status bmkit_function_load(const char* path, bmkit_function** out);
BMKIT_API void bmkit_function_free(bmkit_function* f);
BMKIT_API bmkit_status bmkit_function_to_json(const bmkit_function* f, char** out);

/* Norms. The function must live on the configured lattice with the configured d. */
BMKIT_API bmkit_status bmkit_bm_norm(const bmkit_config* cfg, const bmkit_function* f, double* value);
/* Certified upper bound `value` with decomposition JSON; `lower` is the solver's dual bound. */
BMKIT_API bmkit_status bmkit_block_norm(const bmkit_config* cfg, const bmkit_function* f, double* value,
                                        double* lower, char** decomposition_json);
/* Certified lower bound `value` with certificate JSON; `converged` is 0 if the gap stayed above tol. */
BMKIT_API bmkit_status bmkit_dual_norm(const bmkit_config* cfg, const bmkit_function* f, double* value,
                                       double* upper, int* converged, char** certificate_json);
BMKIT_API bmkit_status bmkit_slice_norm(const bmkit_config* cfg, const bmkit_function* f, int scale,
                                        double* value);
BMKIT_API bmkit_status bmkit_cont_char(const bmkit_config* cfg, const bmkit_function* f, double* value);
/* CSV j,m0,m1,term of every cube term of the BM norm. */
BMKIT_API bmkit_status bmkit_cube_terms_csv(const bmkit_config* cfg, const bmkit_function* f, char** out);
/* Few-term block expansion with cost <= (1 + tol) * optimum. */
BMKIT_API bmkit_status bmkit_finite_decomposition(const bmkit_config* cfg, const bmkit_function* f, double tol,
                                                  double* cost, double* optimum, char** decomposition_json);

/* Verification suite. `checks` is a comma-separated list of check names, or NULL/empty for all.
 * tamper != 0 replaces the translation constant by 1 (negative control). */
BMKIT_API bmkit_status bmkit_verify(const bmkit_config* cfg, const char* checks, int tamper, bmkit_report** out);
BMKIT_API void bmkit_report_free(bmkit_report* report);
BMKIT_API bmkit_status bmkit_report_outcome(const bmkit_report* report, bmkit_outcome* out);
BMKIT_API bmkit_status bmkit_report_json(const bmkit_report* report, char** out);
BMKIT_API bmkit_status bmkit_report_timing_json(const bmkit_report* report, char** out);
BMKIT_API bmkit_status bmkit_report_csv(const bmkit_report* report, char** out);
/* One human-readable line per check. */
BMKIT_API bmkit_status bmkit_report_summary(const bmkit_report* report, char** out);
/* Recomputes one instance from its fingerprint. */
BMKIT_API bmkit_status bmkit_replay(const char* fingerprint, double* ratio, double* bound, bmkit_outcome* outcome);
/* Comma-separated names of all checks, in run order. */
BMKIT_API bmkit_status bmkit_check_names(char** out);

/* Experiment tables as CSV. kind: "triviality" or "refinement_stability". */
BMKIT_API bmkit_status bmkit_experiment_csv(const bmkit_config* cfg, const char* kind, char** out);

/* Writes through a temporary sibling file and a rename. */
BMKIT_API bmkit_status bmkit_write_file_atomic(const char* path, const char* content);

#ifdef __cplusplus
}
#endif

#endif
