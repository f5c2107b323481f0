#ifndef VOQL_VOQL_H
#define VOQL_VOQL_H

/* C interface to the library. Every call returns a voql_status; on failure
 * voql_last_error() describes the most recent error on the calling thread.
 * Strings returned through char** are owned by the caller and released with
 * voql_string_free. */

#include <stdint.h>

#if defined(_WIN32)
#define VOQL_API __declspec(dllexport)
#else
#define VOQL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum voql_status {
  VOQL_OK = 0,
  VOQL_ERR_INVALID_ARGUMENT = 1,
  VOQL_ERR_IO = 2,
  VOQL_ERR_PARSE = 3,
  VOQL_ERR_INVARIANT = 4,
  VOQL_ERR_INTERNAL = 5
} voql_status;

typedef struct voql_env voql_env;
typedef struct voql_experiment voql_experiment;

VOQL_API const char* voql_version(void);
VOQL_API const char* voql_last_error(void);
VOQL_API void voql_string_free(char* s);

/* Instances. */
VOQL_API voql_status voql_env_generate_linear(int d, int horizon, int num_states,
                                               int num_actions, uint64_t seed, voql_env** out);
/* grid <= 0 draws unrestricted transition probabilities. */
VOQL_API voql_status voql_env_generate_tabular(int horizon, int num_states, int num_actions,
                                                uint64_t seed, double grid, voql_env** out);
VOQL_API voql_status voql_env_load(const char* path, voql_env** out);
VOQL_API voql_status voql_env_save(const voql_env* env, const char* path);
VOQL_API voql_status voql_env_to_json(const voql_env* env, char** json_out);
/* d is 0 when the instance has no linear features. Any output may be NULL. */
VOQL_API voql_status voql_env_dims(const voql_env* env, int* horizon, int* num_states,
                                   int* num_actions, int* d);
VOQL_API voql_status voql_env_optimal_value(const voql_env* env, double* value);
VOQL_API void voql_env_free(voql_env* env);

/* Experiments. overrides_json is NULL or a JSON object merged over the config
 * (its keys win), which is how command-line flags shadow config keys. */
VOQL_API voql_status voql_experiment_from_file(const char* config_path, const char* overrides_json,
                                               voql_experiment** out);
VOQL_API voql_status voql_experiment_from_json(const char* config_json, const char* overrides_json,
                                               voql_experiment** out);
/* Resolved configuration as JSON. */
VOQL_API voql_status voql_experiment_config(const voql_experiment* exp, char** json_out);
/* Runs every seed and writes artifacts when the config has an output
 * directory. *breach (may be NULL) is set to 1 when an audit budget failed. */
VOQL_API voql_status voql_experiment_run(voql_experiment* exp, int* breach);
/* Summary JSON of the last run. */
VOQL_API voql_status voql_experiment_summary(const voql_experiment* exp, char** json_out);
/* Per-episode CSV of one seed from the last run. */
VOQL_API voql_status voql_experiment_csv(const voql_experiment* exp, uint64_t seed, char** csv_out);
VOQL_API void voql_experiment_free(voql_experiment* exp);

/* Re-audits the run logs of an output directory and writes verify_report.json. */
VOQL_API voql_status voql_verify_run(const char* run_dir, char** report_json, int* breach);

#ifdef __cplusplus
}
#endif

#endif /* VOQL_VOQL_H */
