#ifndef LOADALLOC_H
#define LOADALLOC_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define LA_API __attribute__((visibility("default")))
#else
#define LA_API
#endif

typedef enum la_status {
  LA_OK = 0,
  LA_ERR_VALIDATION = 1, /* input or configuration rejected */
  LA_ERR_RUNTIME = 2,    /* computation or I/O failed */
  LA_ERR_ARGUMENT = 3    /* null handle, bad buffer size */
} la_status;

typedef struct la_scenario la_scenario;
typedef struct la_allocator la_allocator;

LA_API const char* la_version(void);

/* Message for the last failing call on this thread; empty after a success. */
LA_API const char* la_last_error(void);

/* Strings returned through char** out parameters are released with this. */
LA_API void la_free_string(char* s);

/* Scenarios. `manifest_json` may be NULL for the default synthetic config. */
LA_API la_status la_scenario_generate(const char* manifest_json, la_scenario** out);
LA_API la_status la_scenario_load(const char* dir, la_scenario** out);
LA_API la_status la_scenario_save(const la_scenario* scenario, const char* dir, int gzip);
LA_API la_status la_scenario_counts(const la_scenario* scenario, size_t* n_regions, size_t* n_agents,
                                    size_t* n_substations);
/* Observed demand per substation, in scenario order. */
LA_API la_status la_scenario_substation_demand(const la_scenario* scenario, double* out, size_t n);
LA_API void la_scenario_free(la_scenario* scenario);

/* Trains on every region with the "train" section of `manifest_json` (NULL: defaults). */
LA_API la_status la_train(const la_scenario* scenario, const char* manifest_json, la_allocator** out);
LA_API la_status la_allocator_from_json(const char* json, la_allocator** out);
LA_API la_status la_allocator_to_json(const la_allocator* allocator, char** out);
LA_API void la_allocator_free(la_allocator* allocator);

/* Substation predictions of a named method (e.g. "GPMpostNP"). Learned
   methods need an allocator; noise methods return their first repeat. */
LA_API la_status la_run_method(const la_scenario* scenario, const char* method, const la_allocator* allocator,
                               uint64_t noise_seed, double* out, size_t n);

/* Two-sided paired signed-rank p-value of x - y. */
LA_API la_status la_wilcoxon(const double* x, const double* y, size_t n, double* p_value);
/* Holm-adjusted p-values in input order; `out` may alias `p`. */
LA_API la_status la_holm(const double* p, size_t n, double* out);

/* Runs generate, train, evaluate, sweep, powerflow or report for a manifest.
   Relative paths resolve against `base_dir` (may be NULL). `out_text`
   receives the human-readable summary and may be NULL. */
LA_API la_status la_run_command(const char* command, const char* manifest_json, const char* base_dir,
                                char** out_text);

/* Canonical manifest after defaults and validation. */
LA_API la_status la_manifest_normalize(const char* manifest_json, const char* base_dir, char** out);

#ifdef __cplusplus
}
#endif

#endif
