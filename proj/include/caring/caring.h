#ifndef CARING_CARING_H
#define CARING_CARING_H

/*
 * C interface to the calibration toolkit.
 *
 * Every fallible call returns a caring_status. On failure a one-line
 * diagnostic is available from caring_last_error() until the next call on
 * the same thread. Objects are opaque handles released with their _free
 * function; passing NULL to a _free function is a no-op.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(CARING_BUILDING_LIBRARY)
#    define CARING_API __declspec(dllexport)
#  else
#    define CARING_API __declspec(dllimport)
#  endif
#else
#  define CARING_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum caring_status {
  CARING_OK = 0,
  CARING_ERR_INVALID_ARGUMENT = 1, /* bad arguments or configuration */
  CARING_ERR_DATA = 2,             /* missing/malformed/inconsistent files */
  CARING_ERR_NUMERIC = 3,          /* non-finite loss or parameters while fitting */
  CARING_ERR_INTERNAL = 4
} caring_status;

typedef struct caring_dataset caring_dataset;
typedef struct caring_model caring_model;
typedef struct caring_trace caring_trace;
typedef struct caring_report caring_report;

typedef enum caring_model_kind {
  CARING_MODEL_IDENTITY = 0,
  CARING_MODEL_TEMPERATURE = 1,
  CARING_MODEL_CARING = 2
} caring_model_kind;

typedef struct caring_synth_config {
  uint64_t seed;
  size_t n_val;
  size_t n_test;
  size_t classes;
  size_t clusters;
  const double* sharpness; /* `clusters` entries */
  const double* margin;    /* `clusters` entries */
  size_t feature_dim;
  double feature_noise;
} caring_synth_config;

typedef struct caring_fit_config {
  double lr;
  size_t epochs;
  double weight_decay;
  size_t hidden;
  uint64_t seed;
  size_t batch_size; /* 0 = full batch */
} caring_fit_config;

CARING_API const char* caring_version(void);
CARING_API const char* caring_last_error(void);

/* Datasets */
CARING_API caring_status caring_dataset_load(const char* manifest_path, caring_dataset** out);
CARING_API void caring_dataset_free(caring_dataset* ds);
/* d is 0 when the dataset carries no features. Any output pointer may be NULL. */
CARING_API caring_status caring_dataset_shape(const caring_dataset* ds, size_t* n, size_t* m, size_t* d);
CARING_API caring_status caring_dataset_validate_pair(const caring_dataset* val, const caring_dataset* test);

/* Synthetic data: writes out_dir/val and out_dir/test. */
CARING_API void caring_synth_config_default(caring_synth_config* cfg);
CARING_API caring_status caring_synth_write(const caring_synth_config* cfg, const char* out_dir);

/* Fitting */
CARING_API void caring_fit_config_temperature_default(caring_fit_config* cfg);
CARING_API void caring_fit_config_caring_default(caring_fit_config* cfg);
/* `trace` may be NULL. */
CARING_API caring_status caring_fit_temperature(const caring_dataset* val, const caring_fit_config* cfg,
                                                caring_model** model, caring_trace** trace);
CARING_API caring_status caring_fit_caring(const caring_dataset* val, const caring_fit_config* cfg,
                                           caring_model** model, caring_trace** trace);

CARING_API size_t caring_trace_epochs(const caring_trace* trace);
/* Any output pointer may be NULL. */
CARING_API caring_status caring_trace_get(const caring_trace* trace, size_t index, double* train_nll,
                                          double* mean_t, double* std_t);
CARING_API caring_status caring_trace_write_csv(const caring_trace* trace, const char* path);
CARING_API void caring_trace_free(caring_trace* trace);

/* Models */
CARING_API caring_status caring_model_identity(caring_model** out);
CARING_API caring_status caring_model_temperature(double tau, caring_model** out);
CARING_API caring_status caring_model_load(const char* path, caring_model** out);
CARING_API caring_status caring_model_save(const caring_model* model, const char* path);
CARING_API caring_model_kind caring_model_get_kind(const caring_model* model);
/* Temperature of a temperature model; error for other kinds. */
CARING_API caring_status caring_model_tau(const caring_model* model, double* tau);
/* Per-sample temperature for one feature vector (identity/temperature ignore z). */
CARING_API caring_status caring_model_sample_temperature(const caring_model* model, const double* z, size_t len,
                                                         double* t);
CARING_API void caring_model_free(caring_model* model);

/*
 * Calibrated probabilities as CSV: header p_0..p_{m-1},T then one row per
 * sample with the applied temperature in the last column. `model` may be NULL
 * for the raw softmax.
 */
CARING_API caring_status caring_apply_write(const caring_dataset* ds, const caring_model* model,
                                            const char* probs_path);

/* Reports. `model` may be NULL for the raw softmax. */
CARING_API caring_status caring_report_compute(const caring_dataset* ds, const caring_model* model, size_t bins,
                                               caring_report** out);
CARING_API caring_status caring_report_load(const char* path, caring_report** out);
CARING_API caring_status caring_report_save(const caring_report* report, const char* path);
/* Any output pointer may be NULL. */
CARING_API caring_status caring_report_metrics(const caring_report* report, double* ece, double* brier,
                                               double* nll, double* accuracy);
CARING_API void caring_report_free(caring_report* report);

CARING_API caring_status caring_render_reliability(const caring_report* report, const char* svg_path);
/* Confidence histogram with mean-confidence and accuracy markers. */
CARING_API caring_status caring_render_histogram(const caring_report* report, size_t bins, const char* svg_path);
/* CSV, or Markdown when the path ends in ".md". */
CARING_API caring_status caring_render_class_table(const caring_report* report, const char* path);

#ifdef __cplusplus
}
#endif

#endif /* CARING_CARING_H */
