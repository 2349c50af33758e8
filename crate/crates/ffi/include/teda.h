#ifndef TEDA_H
#define TEDA_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TedaStatus {
  TEDA_STATUS_OK = 0,
  TEDA_STATUS_NULL_POINTER = 1,
  /**
   * Bad length, bad UTF-8 or an unknown enum value.
   */
  TEDA_STATUS_INVALID_ARGUMENT = 2,
  TEDA_STATUS_INVALID_CONFIG = 3,
  /**
   * The timings cannot keep every step covered for this chunk size.
   */
  TEDA_STATUS_INFEASIBLE = 4,
  /**
   * A call out of order, or a chunk that does not fit the scheduler.
   */
  TEDA_STATUS_PROTOCOL = 5,
  TEDA_STATUS_EPISODE_ENDED = 6,
  TEDA_STATUS_FORMAT = 7,
  TEDA_STATUS_IO = 8,
  TEDA_STATUS_PANIC = 9,
} TedaStatus;

typedef enum TedaMode {
  TEDA_MODE_TEDA = 0,
  TEDA_MODE_PER_STEP_TE = 1,
  TEDA_MODE_OPEN_LOOP = 2,
} TedaMode;

/**
 * Opaque scheduler handle.
 */
typedef struct TedaScheduler TedaScheduler;

/**
 * Episode parameters and latencies in seconds.
 */
typedef struct TedaConfig {
  /**
   * A `TedaMode` value.
   */
  uint32_t mode;
  size_t chunk_size;
  size_t episode_length;
  size_t action_dim;
  double weight_decay;
  double t1;
  double t2;
  double t3;
  double t4;
} TedaConfig;

typedef struct TedaSchedule {
  size_t drop_count;
  size_t max_predictions;
  size_t buffer_width;
} TedaSchedule;

/**
 * A prediction: buffer row, observation step, first usable step.
 */
typedef struct TedaTicket {
  size_t tp_index;
  size_t start_step;
  size_t completion_step;
} TedaTicket;

/**
 * What the next step needs. When `has_commit` is set, the chunk for
 * `commit` must be passed to `teda_scheduler_apply`. When `has_launch` is
 * set, the caller starts a prediction from the observation at
 * `launch.start_step`; `launch_after_apply` says whether it starts before or
 * after the step's action executes.
 */
typedef struct TedaStepPlan {
  bool done;
  size_t step;
  bool has_commit;
  struct TedaTicket commit;
  bool has_launch;
  struct TedaTicket launch;
  bool launch_after_apply;
} TedaStepPlan;

typedef struct TedaStepOutput {
  size_t step;
  size_t ensemble_size;
  size_t drops_cum;
  bool inflight;
} TedaStepOutput;

typedef struct TedaStats {
  size_t steps_done;
  size_t predictions;
  size_t total_dropped;
  bool has_outstanding;
  struct TedaTicket outstanding;
} TedaStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string. Never free it.
 */
const char *teda_version(void);

/**
 * Message for the last failed call on this thread, or null after a
 * successful call. Valid until the next call into the library on this
 * thread; do not free it.
 */
const char *teda_last_error(void);

/**
 * Drop count, buffer rows and buffer width for a TEDA episode.
 *
 * # Safety
 * `config` and `out` must be null or valid for reads and writes respectively.
 */
enum TedaStatus teda_derive_schedule(const struct TedaConfig *config,
                                     struct TedaSchedule *out_schedule);

/**
 * Creates a scheduler. `initial` holds the chunk predicted from observation
 * 0 as `chunk_size * action_dim` row-major values; open-loop ignores it and
 * accepts null.
 *
 * # Safety
 * Pointers must be null or valid; `initial` must hold `initial_len` values.
 */
enum TedaStatus teda_scheduler_new(const struct TedaConfig *config,
                                   const double *initial,
                                   size_t initial_len,
                                   struct TedaScheduler **out_handle);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `handle` must come from `teda_scheduler_new` and not be used afterwards.
 */
void teda_scheduler_free(struct TedaScheduler *handle);

/**
 * Plan for the next step; `done` is set once the episode is over.
 *
 * # Safety
 * Pointers must be null or valid.
 */
enum TedaStatus teda_scheduler_plan(const struct TedaScheduler *handle,
                                    struct TedaStepPlan *out_plan);

/**
 * Applies the planned step. `chunk` is the prediction named by the plan's
 * commit ticket (null with length 0 when there is none). The applied action
 * is written to `out_action`, which must hold `action_dim` values;
 * `out_step` may be null.
 *
 * # Safety
 * Pointers must be null or valid for the stated lengths.
 */
enum TedaStatus teda_scheduler_apply(struct TedaScheduler *handle,
                                     const double *chunk,
                                     size_t chunk_len,
                                     double *out_action,
                                     size_t out_action_len,
                                     struct TedaStepOutput *out_step);

/**
 * Commits the prediction still outstanding after the last step (see
 * `teda_scheduler_stats`), for drop accounting. Pass null when there is none.
 *
 * # Safety
 * Pointers must be null or valid for the stated lengths.
 */
enum TedaStatus teda_scheduler_finish(struct TedaScheduler *handle,
                                      const double *chunk,
                                      size_t chunk_len);

/**
 * # Safety
 * Pointers must be null or valid.
 */
enum TedaStatus teda_scheduler_stats(const struct TedaScheduler *handle,
                                     struct TedaStats *out_stats);

/**
 * Symmetric int16 quantization of `len` floats with one shared scale.
 *
 * # Safety
 * `data` and `out_codes` must hold `len` elements; `out_scale` must be valid.
 */
enum TedaStatus teda_quantize(const float *data, size_t len, int16_t *out_codes, double *out_scale);

/**
 * # Safety
 * `codes` and `out_data` must hold `len` elements.
 */
enum TedaStatus teda_dequantize(const int16_t *codes, size_t len, double scale, float *out_data);

/**
 * Runs one virtual-time episode from a JSON run configuration and returns
 * the metrics as JSON. `mode` may be null to use the configuration's mode.
 * Relative model paths resolve against the working directory. Free the
 * result with `teda_string_free`.
 *
 * # Safety
 * `config_json` and `mode` must be null or NUL-terminated; `out_json` must
 * be valid.
 */
enum TedaStatus teda_simulate_json(const char *config_json, const char *mode, char **out_json);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void teda_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TEDA_H */
