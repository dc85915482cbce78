/* Generated by cbindgen. Do not edit. */

#ifndef FCS_H
#define FCS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum FcsStatus {
  FCS_STATUS_OK = 0,
  FCS_STATUS_NULL_POINTER = 1,
  FCS_STATUS_INVALID_UTF8 = 2,
  FCS_STATUS_INVALID_ARGUMENT = 3,
  FCS_STATUS_BUFFER_TOO_SMALL = 4,
  FCS_STATUS_CONFIG = 10,
  FCS_STATUS_IO = 11,
  FCS_STATUS_DIMENSION = 12,
  FCS_STATUS_NON_FINITE = 13,
  FCS_STATUS_NUMERICAL = 14,
  FCS_STATUS_MODEL = 15,
  FCS_STATUS_DESIGN = 16,
  FCS_STATUS_EXCLUSIVITY = 17,
  FCS_STATUS_SIMULATION = 18,
  FCS_STATUS_PANIC = 99,
} FcsStatus;

/**
 * Values for the `mode` argument of [`fcs_simulate`] and [`fcs_decide`].
 */
typedef enum FcsMode {
  FCS_MODE_BASELINE = 0,
  FCS_MODE_SATURATION = 1,
  FCS_MODE_AUGMENTED = 2,
  FCS_MODE_AW_ONLY = 3,
} FcsMode;

/**
 * Loaded and validated study.
 */
typedef struct FcsStudy FcsStudy;

/**
 * Simulation result bound to the study that produced it.
 */
typedef struct FcsTrace FcsTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *fcs_last_error_message(void);

/**
 * Loads a study from a JSON configuration file.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum FcsStatus fcs_study_load(const char *path, struct FcsStudy **out);

/**
 * Builds a study from JSON text. A null `json` loads the bundled lateral
 * aircraft scenario.
 *
 * # Safety
 * `json` must be null or a nul-terminated string; `out` must be writable.
 */
enum FcsStatus fcs_study_from_json(const char *json, struct FcsStudy **out);

/**
 * # Safety
 * `study` must be null or a handle from this library, freed at most once.
 */
void fcs_study_free(struct FcsStudy *study);

/**
 * Plant state count, input count and extended state count.
 *
 * # Safety
 * `study` must be a live handle; out pointers must be writable.
 */
enum FcsStatus fcs_study_dims(const struct FcsStudy *study, size_t *n_p, size_t *m, size_t *n);

/**
 * Design record as JSON.
 *
 * # Safety
 * `study` must be a live handle; `out` must be writable.
 */
enum FcsStatus fcs_design_json(const struct FcsStudy *study, char **out);

/**
 * MIMO margin report for an activity pattern such as `"0100"`. A null
 * pattern means no channel active.
 *
 * # Safety
 * `study` must be a live handle; `pattern` null or nul-terminated; `out`
 * writable.
 */
enum FcsStatus fcs_margins_json(const struct FcsStudy *study, const char *pattern, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed at most once.
 */
void fcs_string_free(char *s);

/**
 * Runs the study's command schedule with the given controller.
 *
 * # Safety
 * `study` must be a live handle; `out` must be writable.
 */
enum FcsStatus fcs_simulate(const struct FcsStudy *study, int32_t mode, struct FcsTrace **out);

/**
 * Number of samples in a trace, or 0 for a null handle.
 *
 * # Safety
 * `trace` must be null or a live handle.
 */
size_t fcs_trace_len(const struct FcsTrace *trace);

/**
 * Copies one channel of a signal (`t`, `x_p`, `e_yi`, `u_bl`, `v`, `w`,
 * `u_total`, `y_reg`, `z_lim`, `delta`, `y_cmd`) into `buf`. `buf_len` must
 * be at least [`fcs_trace_len`].
 *
 * # Safety
 * `trace` must be a live handle; `name` nul-terminated; `buf` writable for
 * `buf_len` values.
 */
enum FcsStatus fcs_trace_copy_signal(const struct FcsTrace *trace,
                                     const char *name,
                                     size_t channel,
                                     double *buf,
                                     size_t buf_len);

/**
 * Writes the trace as CSV in output units.
 *
 * # Safety
 * `trace` must be a live handle; `path` nul-terminated.
 */
enum FcsStatus fcs_trace_write_csv(const struct FcsTrace *trace, const char *path);

/**
 * # Safety
 * `trace` must be null or a handle from this library, freed at most once.
 */
void fcs_trace_free(struct FcsTrace *trace);

/**
 * One controller evaluation at extended state `x = [e_yI; x_p]` (length n)
 * and command `y_cmd` (length m). Writes the applied input to `u_out`
 * (length m) and, when `delta_out` is non-null, the activity flags of the
 * 2m limited channels as 0/1.
 *
 * # Safety
 * `study` must be a live handle; arrays must hold the stated lengths.
 */
enum FcsStatus fcs_decide(const struct FcsStudy *study,
                          int32_t mode,
                          const double *x,
                          size_t x_len,
                          const double *y_cmd,
                          size_t y_len,
                          double *u_out,
                          size_t u_len,
                          uint8_t *delta_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FCS_H */
