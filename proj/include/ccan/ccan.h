/* C interface to the CCAN library. All functions are thread-safe with respect
 * to distinct handles; a config or model handle must not be mutated from two
 * threads at once. Errors return a non-zero status and leave a message that
 * ccan_last_error() reports on the calling thread. */
#ifndef CCAN_CCAN_H
#define CCAN_CCAN_H

#include <stddef.h>
#include <stdint.h>

#if defined(__GNUC__)
#define CCAN_API __attribute__((visibility("default")))
#else
#define CCAN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ccan_status {
  CCAN_OK = 0,
  CCAN_ERR_DIMENSION = 1,
  CCAN_ERR_NUMERIC = 2,
  CCAN_ERR_USAGE = 3,
  CCAN_ERR_CONFIG = 4,
  CCAN_ERR_DATA = 5,
  CCAN_ERR_FORMAT = 6,
  CCAN_ERR_IO = 7,
  CCAN_ERR_METRIC = 8,
  CCAN_ERR_BUFFER_TOO_SMALL = 9,
  CCAN_ERR_INTERNAL = 100
} ccan_status;

typedef struct ccan_config ccan_config;
typedef struct ccan_model ccan_model;

CCAN_API const char* ccan_version(void);
CCAN_API const char* ccan_status_string(ccan_status status);
/* Message of the last failure on this thread; empty after a success. */
CCAN_API const char* ccan_last_error(void);

/* Configuration: defaults (run.seed from CCAN_SEED), then files, then set(). */
CCAN_API ccan_status ccan_config_create(ccan_config** out);
CCAN_API void ccan_config_destroy(ccan_config* config);
CCAN_API ccan_status ccan_config_load_file(ccan_config* config, const char* path);
CCAN_API ccan_status ccan_config_set(ccan_config* config, const char* key, const char* value);
/* Copies the NUL-terminated value into buf. *needed (optional) receives the
 * required size; CCAN_ERR_BUFFER_TOO_SMALL when capacity is insufficient. */
CCAN_API ccan_status ccan_config_get(const ccan_config* config, const char* key, char* buf, size_t capacity, size_t* needed);
/* Reloadable `key = value` listing of the whole configuration. */
CCAN_API ccan_status ccan_config_dump(const ccan_config* config, char* buf, size_t capacity, size_t* needed);

/* Names of the commands accepted by ccan_run, space separated. */
CCAN_API const char* ccan_command_list(void);
/* Runs one command (preprocess, synth, split, train, eval, sweep, explain,
 * bench, embed). Progress lines go to standard output. */
CCAN_API ccan_status ccan_run(const ccan_config* config, const char* command);

/* Trained models. */
CCAN_API ccan_status ccan_model_load(const char* checkpoint_path, ccan_model** out);
CCAN_API void ccan_model_destroy(ccan_model* model);
/* Number of probabilities predict writes: 1 for binary models, K otherwise. */
CCAN_API size_t ccan_model_output_dim(const ccan_model* model);
/* Eval-mode averaged probabilities for a CCFB bag file. */
CCAN_API ccan_status ccan_model_predict_file(const ccan_model* model, const char* bag_path, double* probs, size_t capacity,
                                    size_t* count);

/* Utilities. */
CCAN_API ccan_status ccan_auc_binary(const double* scores, const int* labels, size_t n, double* out);
CCAN_API ccan_status ccan_count_macs(const ccan_config* config, size_t tokens, uint64_t* out);

#ifdef __cplusplus
}
#endif

#endif
