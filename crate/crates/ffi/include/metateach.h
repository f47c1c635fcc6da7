#ifndef METATEACH_H
#define METATEACH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Movement index used for optional targets.
 */
#define MT_TARGET_NONE -1

/**
 * Result codes. `MT_STATUS_OK` is zero; every other value is an error.
 */
typedef enum MtStatus {
  MT_STATUS_OK = 0,
  MT_STATUS_NULL_POINTER = 1,
  MT_STATUS_INVALID_ARGUMENT = 2,
  MT_STATUS_DIMENSION = 3,
  MT_STATUS_UNDERDETERMINED = 4,
  MT_STATUS_INVALID_TRAJECTORY = 5,
  MT_STATUS_CONFIG = 6,
  MT_STATUS_EMPTY_HISTORY = 7,
  MT_STATUS_EMPTY_GROUP = 8,
  MT_STATUS_LENGTH_MISMATCH = 9,
  MT_STATUS_UNDEFINED_CORRELATION = 10,
  MT_STATUS_VALIDATION = 11,
  MT_STATUS_NO_FALLBACK = 12,
  MT_STATUS_CAPABILITY = 13,
  MT_STATUS_WRONG_PHASE = 14,
  MT_STATUS_MALFORMED_LOG = 15,
  MT_STATUS_IO = 16,
  MT_STATUS_BUFFER_TOO_SMALL = 17,
  MT_STATUS_PANIC = 99,
} MtStatus;

typedef enum MtMode {
  MT_MODE_PREFERENCE_ONLY = 0,
  MT_MODE_FULL_MODALITY = 1,
} MtMode;

typedef enum MtPreference {
  MT_PREFERENCE_FIRST = 0,
  MT_PREFERENCE_SECOND = 1,
  MT_PREFERENCE_BOTH = 2,
  MT_PREFERENCE_NONE = 3,
} MtPreference;

typedef enum MtPhase {
  MT_PHASE_READY_TO_SAMPLE = 0,
  MT_PHASE_AWAITING_FEEDBACK = 1,
  MT_PHASE_FINISHED = 2,
} MtPhase;

/**
 * Opaque session handle.
 */
typedef struct MtSession MtSession;

typedef struct MtOutcome {
  double ball_x;
  double ball_y;
  bool hit;
  double distance_to_hole;
  double impact_speed;
  bool contact_made;
} MtOutcome;

/**
 * One trial's feedback. Targets are 0 or 1 for the first or second
 * movement, or `MT_TARGET_NONE`. Levels are 1..=5 and apply to the next
 * trial.
 */
typedef struct MtFeedback {
  enum MtPreference preference;
  int32_t guidance_target;
  int32_t correction_target;
  int32_t fallback_save_target;
  uint8_t exploration_level;
  uint8_t speed_level;
  bool fallback_load;
} MtFeedback;

typedef struct MtMannWhitney {
  double u;
  double z;
  double p_two_sided;
  double p_greater;
  double p_less;
  bool exact;
} MtMannWhitney;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static nul-terminated string.
 */
const char *mt_version(void);

/**
 * Wire protocol version, a static nul-terminated string.
 */
const char *mt_protocol_version(void);

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call into the library on the same thread.
 */
const char *mt_last_error_message(void);

/**
 * Opens a session. `config_toml` may be null for the default configuration.
 *
 * # Safety
 * `config_toml` must be null or a nul-terminated string; `out` must be a
 * valid pointer to write the handle to.
 */
enum MtStatus mt_session_new(enum MtMode mode,
                             uint64_t seed,
                             const char *config_toml,
                             struct MtSession **out);

/**
 * Releases a session. Null is ignored.
 *
 * # Safety
 * `session` must be null or a handle from [`mt_session_new`] not yet freed.
 */
void mt_session_free(struct MtSession *session);

/**
 * Samples and simulates the next pair of movements.
 *
 * # Safety
 * `session` must be a live handle.
 */
enum MtStatus mt_session_present_pair(struct MtSession *session);

/**
 * Outcome of movement `which` (0 or 1) of the current pair.
 *
 * # Safety
 * `session` must be a live handle and `out` a valid pointer.
 */
enum MtStatus mt_session_outcome(const struct MtSession *session,
                                 uint32_t which,
                                 struct MtOutcome *out);

/**
 * Copies movement `which` of the current pair into `buf` as row-major
 * `[timestep][x, y]`. `written` receives the number of values the full
 * trajectory needs; if `buf_len` is smaller nothing is copied and
 * `BufferTooSmall` is returned.
 *
 * # Safety
 * `session` must be a live handle, `buf` valid for `buf_len` doubles and
 * `written` a valid pointer.
 */
enum MtStatus mt_session_positions(const struct MtSession *session,
                                   uint32_t which,
                                   double *buf,
                                   size_t buf_len,
                                   size_t *written);

/**
 * Stages a drawn demonstration for the next feedback of this trial.
 * `points` holds `n_points` rows of `[t, x, y]`.
 *
 * # Safety
 * `session` must be a live handle and `points` valid for `3 * n_points`
 * doubles.
 */
enum MtStatus mt_session_set_demonstration(struct MtSession *session,
                                           const double *points,
                                           size_t n_points);

/**
 * Submits feedback for the current pair, attaching any staged
 * demonstration.
 *
 * # Safety
 * `session` must be a live handle and `feedback` a valid pointer.
 */
enum MtStatus mt_session_submit_feedback(struct MtSession *session,
                                         const struct MtFeedback *feedback);

/**
 * Submits feedback given as the JSON object used on the wire.
 *
 * # Safety
 * `session` must be a live handle and `json` a nul-terminated string.
 */
enum MtStatus mt_session_submit_feedback_json(struct MtSession *session, const char *json);

/**
 * Zero-based index of the current trial; equals the trial count once finished.
 *
 * # Safety
 * `session` must be null or a live handle. Returns 0 for null.
 */
size_t mt_session_trial_index(const struct MtSession *session);

/**
 * # Safety
 * `session` must be null or a live handle. Returns `Finished` for null.
 */
enum MtPhase mt_session_phase(const struct MtSession *session);

/**
 * Writes the session's JSONL log to `path`.
 *
 * # Safety
 * `session` must be a live handle and `path` a nul-terminated string.
 */
enum MtStatus mt_session_write_log(const struct MtSession *session, const char *path);

/**
 * Runs a complete scripted session and writes its log to `path`.
 *
 * # Safety
 * `path` must be a nul-terminated string.
 */
enum MtStatus mt_run_scripted(enum MtMode mode, uint64_t seed, bool noisy, const char *path);

/**
 * Mann-Whitney U test of group `a` against group `b`.
 *
 * # Safety
 * `a` and `b` must be valid for `na` and `nb` doubles, `out` a valid pointer.
 */
enum MtStatus mt_mann_whitney(const double *a,
                              size_t na,
                              const double *b,
                              size_t nb,
                              struct MtMannWhitney *out);

/**
 * Spearman rank correlation of two equally long vectors.
 *
 * # Safety
 * `x` and `y` must be valid for `n` doubles; `rho` and `p` valid pointers.
 */
enum MtStatus mt_spearman(const double *x, const double *y, size_t n, double *rho, double *p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* METATEACH_H */
