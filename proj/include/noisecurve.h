#ifndef NOISECURVE_H
#define NOISECURVE_H

/* C interface to the noisecurve core. Every entry point returns a status
 * code; failing calls leave a thread-local message behind nc_last_error().
 * Objects cross the boundary as opaque handles owned by the library. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define NC_API __declspec(dllexport)
#else
#define NC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Numerically identical to the core error codes. */
typedef enum nc_status {
  NC_OK = 0,
  NC_ERR_INVALID_ARGUMENT = 1,
  NC_ERR_SHAPE_MISMATCH = 2,
  NC_ERR_CONFIG = 3,
  NC_ERR_IO = 4,
  NC_ERR_FORMAT_MAGIC = 5,
  NC_ERR_FORMAT_HEADER = 6,
  NC_ERR_FORMAT_TRUNCATED = 7,
  NC_ERR_DEGENERATE_BOUNDARY = 8,
  NC_ERR_NUMERIC = 9,
  NC_ERR_VERIFY_FAILED = 10,
  NC_ERR_INTERNAL = 11,
} nc_status;

/* Short name of a status code, e.g. "config". Never NULL. */
NC_API const char* nc_status_name(nc_status s);

/* Message of the most recent failing call on this thread; "" after a
 * success. Valid until the next call on the same thread. */
NC_API const char* nc_last_error(void);

/* Seed override from the NOISECURVE_SEED environment variable. Sets
 * *present_out to 1 and *seed_out when the variable is set; a set but
 * unparseable value is a config error. */
NC_API nc_status nc_env_seed(uint64_t* seed_out, int* present_out);

/* ---- flat key=value configuration ---- */

typedef struct nc_config nc_config;

NC_API nc_status nc_config_create(nc_config** out);
NC_API nc_status nc_config_load(const char* path, nc_config** out);
NC_API nc_status nc_config_parse(const char* text, nc_config** out);
NC_API nc_status nc_config_set(nc_config* cfg, const char* key,
                               const char* value);
NC_API void nc_config_free(nc_config* cfg);

/* ---- datasets ---- */

typedef struct nc_dataset nc_dataset;

/* Builds a dataset from the "data." keys of cfg: data.kind selects
 * blobs / rings / textures, the remaining keys carry that generator's
 * parameters plus data.seed. */
NC_API nc_status nc_dataset_generate(const nc_config* cfg, nc_dataset** out);
NC_API nc_status nc_dataset_load(const char* path, nc_dataset** out);
NC_API nc_status nc_dataset_save(const nc_dataset* d, const char* path);
NC_API nc_status nc_dataset_export_csv(const nc_dataset* d, const char* path);
NC_API nc_status nc_dataset_split(const nc_dataset* d, double ratio,
                                  uint64_t seed, nc_dataset** train_out,
                                  nc_dataset** test_out);
NC_API nc_status nc_dataset_info(const nc_dataset* d, size_t* count_out,
                                 size_t* sample_size_out, size_t* classes_out);
NC_API void nc_dataset_free(nc_dataset* d);

/* ---- workflows ----
 *
 * Each run consumes its config prefixes ("train.", "loss.", "noise.",
 * "eval.", "curvature.", "transform.") and rejects unknown keys, then
 * writes its artifacts into run_dir (created if missing). */

/* Trains a model; writes checkpoint.json, metrics.csv and report.json. */
NC_API nc_status nc_train_run(const nc_dataset* train_set,
                              const nc_config* cfg, const char* run_dir);

/* Scores a checkpoint on a test set under the configured perturbations;
 * writes report.json (records, aggregates, cluster geometry). */
NC_API nc_status nc_eval_run(const char* checkpoint_path,
                             const nc_dataset* test_set, const nc_config* cfg,
                             const char* run_dir);

/* Per-sample curvature / stability sweep; writes curvature.csv and
 * report.json (quantile curve, stability groups, correlation). */
NC_API nc_status nc_curvature_run(const char* checkpoint_path,
                                  const nc_dataset* test_set,
                                  const nc_config* cfg, const char* run_dir);

/* Applies the positive rescaling transform.nu to a checkpoint; writes
 * the transformed checkpoint.json and an invariance report.json. */
NC_API nc_status nc_transform_run(const char* checkpoint_path,
                                  const nc_dataset* data, const nc_config* cfg,
                                  const char* run_dir);

/* Runs verification suites: a comma list of suite names, or "all".
 * verbose != 0 prints one line per check to stdout. When report_path is
 * non-NULL the full JSON report is written there. Failing checks yield
 * NC_ERR_VERIFY_FAILED; *failures_out (optional) receives the count. */
NC_API nc_status nc_verify_run(const char* suites, uint64_t seed, int verbose,
                               const char* report_path, size_t* failures_out);

#ifdef __cplusplus
}
#endif

#endif /* NOISECURVE_H */
