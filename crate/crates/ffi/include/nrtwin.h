#ifndef NRTWIN_H
#define NRTWIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Number of entries in a feature vector passed to `nrt_model_predict`.
 */
#define NRT_FEATURE_COUNT 11

/*
 Status codes returned by every fallible function.
 */
typedef enum NrtStatus {
  NRT_STATUS_OK = 0,
  NRT_STATUS_NULL_POINTER = 1,
  NRT_STATUS_INVALID_UTF8 = 2,
  NRT_STATUS_CONFIG = 3,
  NRT_STATUS_RUNTIME = 4,
  NRT_STATUS_IO = 5,
  NRT_STATUS_PANIC = 6,
} NrtStatus;

/*
 A parsed scenario file.
 */
typedef struct NrtConfig NrtConfig;

/*
 A trained delay predictor.
 */
typedef struct NrtModel NrtModel;

/*
 The report of one scenario run.
 */
typedef struct NrtResult NrtResult;

/*
 Aggregate KPIs; throughput is in bits per second.
 */
typedef struct NrtKpi {
  double mean_delay_s;
  double throughput_bps;
  double success_ratio;
} NrtKpi;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. The pointer
 stays valid until the next call into this library on the same thread.
 */
const char *nrt_last_error(void);

/*
 Library version as a static string.
 */
const char *nrt_version(void);

/*
 Slot length in seconds of numerology `mu` (0 to 4).

 # Safety
 `out` must be a valid pointer to a double.
 */
enum NrtStatus nrt_tti_duration(int32_t mu, double *out);

/*
 Parses a scenario in `key = value` form.

 # Safety
 `text` must be a nul-terminated string and `out` a valid pointer.
 */
enum NrtStatus nrt_config_parse(const char *text, struct NrtConfig **out);

/*
 Replaces the scenario seed.

 # Safety
 `config` must come from `nrt_config_parse`.
 */
enum NrtStatus nrt_config_set_seed(struct NrtConfig *config, uint64_t seed);

/*
 # Safety
 `config` must come from `nrt_config_parse` or be null.
 */
void nrt_config_free(struct NrtConfig *config);

/*
 Runs the scenario under its configured policy.

 # Safety
 `config` must come from `nrt_config_parse` and `out` be valid.
 */
enum NrtStatus nrt_simulate(const struct NrtConfig *config, struct NrtResult **out);

/*
 Whole-run KPIs over victims.

 # Safety
 `result` must come from `nrt_simulate` and `out` be valid.
 */
enum NrtStatus nrt_result_network_kpi(const struct NrtResult *result, struct NrtKpi *out);

/*
 Number of UEs in the result, attacker included.

 # Safety
 `result` must come from `nrt_simulate` and `out` be valid.
 */
enum NrtStatus nrt_result_ue_count(const struct NrtResult *result, size_t *out);

/*
 Whole-run KPIs of one UE.

 # Safety
 `result` must come from `nrt_simulate` and `out` be valid.
 */
enum NrtStatus nrt_result_ue_kpi(const struct NrtResult *result,
                                 uint32_t ue_id,
                                 struct NrtKpi *out);

/*
 KPI time series as CSV; release with `nrt_string_free`.

 # Safety
 `result` must come from `nrt_simulate` and `out` be valid.
 */
enum NrtStatus nrt_result_csv(const struct NrtResult *result, char **out);

/*
 # Safety
 `result` must come from `nrt_simulate` or be null.
 */
void nrt_result_free(struct NrtResult *result);

/*
 Loads a model written by `nrtwin train`.

 # Safety
 `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum NrtStatus nrt_model_load(const char *path, struct NrtModel **out);

/*
 Parses a model from its text form.

 # Safety
 `text` must be a nul-terminated string and `out` a valid pointer.
 */
enum NrtStatus nrt_model_parse(const char *text, struct NrtModel **out);

/*
 Predicted delay in seconds for `len` (= `NRT_FEATURE_COUNT`) features
 in telemetry column order.

 # Safety
 `model` must come from a model constructor, `features` must point to
 `len` doubles and `out` be valid.
 */
enum NrtStatus nrt_model_predict(const struct NrtModel *model,
                                 const double *features,
                                 size_t len,
                                 double *out);

/*
 # Safety
 `model` must come from a model constructor or be null.
 */
void nrt_model_free(struct NrtModel *model);

/*
 # Safety
 `s` must be a string returned by this library or null.
 */
void nrt_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NRTWIN_H */
