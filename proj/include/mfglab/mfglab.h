#ifndef MFGLAB_H
#define MFGLAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define MFGLAB_API __declspec(dllexport)
#else
#define MFGLAB_API __attribute__((visibility("default")))
#endif

typedef enum mfglab_status {
  MFGLAB_OK = 0,
  MFGLAB_ERROR = 1,
  MFGLAB_CHECK_FAILED = 2,
  MFGLAB_USAGE = 64
} mfglab_status;

typedef struct mfglab_run mfglab_run;

typedef struct mfglab_run_options {
  const char* out_dir;    /* overrides the config's "output" entry */
  int write_artifacts;    /* 0: keep artifacts in memory only */
  int has_seed;
  uint64_t seed;
  int threads; /* <= 0 means 1 */
} mfglab_run_options;

/* Artifact directory when write_artifacts is set: out_dir, else the config's
   "output" entry, else results/<kind>. */

/* Run an experiment. On MFGLAB_OK or MFGLAB_CHECK_FAILED *out receives a handle
   that must be released with mfglab_run_free. Otherwise *out is NULL and
   mfglab_last_error() describes the failure. */
MFGLAB_API mfglab_status mfglab_run_file(const char* config_path, const mfglab_run_options* options,
                                         mfglab_run** out);
MFGLAB_API mfglab_status mfglab_run_json(const char* config_json, const mfglab_run_options* options,
                                         mfglab_run** out);
MFGLAB_API void mfglab_run_free(mfglab_run* run);

MFGLAB_API mfglab_status mfglab_run_status(const mfglab_run* run);
MFGLAB_API size_t mfglab_run_check_count(const mfglab_run* run);
/* Returns 0 on success, -1 if index is out of range. name stays valid for the handle's lifetime. */
MFGLAB_API int mfglab_run_check(const mfglab_run* run, size_t index, const char** name, int* passed,
                                double* value, double* threshold);
MFGLAB_API size_t mfglab_run_artifact_count(const mfglab_run* run);
MFGLAB_API const char* mfglab_run_artifact_name(const mfglab_run* run, size_t index);
/* Contents of an artifact by name, NULL if absent. */
MFGLAB_API const char* mfglab_run_artifact(const mfglab_run* run, const char* name, size_t* length);
MFGLAB_API const char* mfglab_run_manifest(const mfglab_run* run);
/* Directory the artifacts were written to, "" if none. */
MFGLAB_API const char* mfglab_run_output_dir(const mfglab_run* run);

/* Thread-local message for the most recent failing call. */
MFGLAB_API const char* mfglab_last_error(void);
MFGLAB_API const char* mfglab_catalog(void);
MFGLAB_API const char* mfglab_version(void);

/* Hopf-Lax value of the one-dimensional counterexample at (t, q). minimizers may be
   NULL; *count receives the number of minimizers (at most capacity are written). */
MFGLAB_API mfglab_status mfglab_counterexample(double t, double q, double* value, double* minimizers,
                                               size_t capacity, size_t* count);

/* Quadratic Wasserstein distance between two m-point empirical measures in R^d,
   points stored row-major (m x d). perm may be NULL or hold m entries. */
MFGLAB_API mfglab_status mfglab_w2(const double* mu, const double* nu, int m, int d, double* distance,
                                   int* perm);

#ifdef __cplusplus
}
#endif

#endif
