#ifndef FEEDLAB_H
#define FEEDLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum FeedlabStatus {
  FEEDLAB_STATUS_OK = 0,
  FEEDLAB_STATUS_NULL_ARGUMENT = 1,
  FEEDLAB_STATUS_INVALID_UTF8 = 2,
  FEEDLAB_STATUS_VALIDATION = 3,
  FEEDLAB_STATUS_SEQUENCE = 4,
  FEEDLAB_STATUS_UNKNOWN_REFERENCE = 5,
  FEEDLAB_STATUS_CONFIGURATION = 6,
  FEEDLAB_STATUS_PARSE = 7,
  FEEDLAB_STATUS_ROLE = 8,
  FEEDLAB_STATUS_MODE = 9,
  FEEDLAB_STATUS_PAIRING = 10,
  FEEDLAB_STATUS_GAME = 11,
  FEEDLAB_STATUS_DEGENERATE = 12,
  FEEDLAB_STATUS_INPUT = 13,
  FEEDLAB_STATUS_IO = 14,
  FEEDLAB_STATUS_SESSION = 15,
  FEEDLAB_STATUS_PANIC = 16,
} FeedlabStatus;

/**
 * Opaque server core.
 */
typedef struct FeedlabHub FeedlabHub;

typedef struct FeedlabChiSquare {
  double chi2;
  uint64_t df;
  double p;
} FeedlabChiSquare;

typedef struct FeedlabPairedT {
  uint64_t n;
  double mean_diff;
  double sd_diff;
  double t;
  uint64_t df;
  double p_two_tailed;
  double cohen_d;
} FeedlabPairedT;

typedef struct FeedlabKappa {
  double kappa;
  double observed_agreement;
  double expected_agreement;
  double agreement_pct;
} FeedlabKappa;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message from the last failing call on this thread, or NULL. The pointer
 * stays valid until the next failing call on this thread.
 */
const char *feedlab_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` is NULL or a pointer returned by this library and not yet freed.
 */
void feedlab_string_free(char *s);

/**
 * Creates a hub on the system clock. `data_dir` may be NULL to keep logs
 * in memory only. Returns NULL on failure.
 *
 * # Safety
 * `data_dir` is NULL or a valid NUL-terminated string.
 */
struct FeedlabHub *feedlab_hub_new(uint64_t seed, const char *data_dir);

/**
 * Creates an in-memory hub on a manual clock starting at `start_ms`.
 */
struct FeedlabHub *feedlab_hub_new_manual(uint64_t seed, uint64_t start_ms);

/**
 * Destroys a hub. NULL is ignored.
 *
 * # Safety
 * `hub` is NULL or a live handle from `feedlab_hub_new*`.
 */
void feedlab_hub_free(struct FeedlabHub *hub);

/**
 * Advances a manual-clock hub.
 *
 * # Safety
 * `hub` is a live handle.
 */
enum FeedlabStatus feedlab_hub_advance_clock(struct FeedlabHub *hub, uint64_t ms);

/**
 * Creates a room. `config_json` (a room config object) and
 * `manifest_json` (a manifest document) may be NULL for defaults and the
 * bundled sample manifest. The room code is written to `out_code`.
 *
 * # Safety
 * `hub` is a live handle; string arguments are NULL or valid; `out_code`
 * is writable.
 */
enum FeedlabStatus feedlab_hub_create_room(struct FeedlabHub *hub,
                                           const char *config_json,
                                           const char *manifest_json,
                                           char **out_code);

/**
 * Opens a connection and writes its id to `out_conn`.
 *
 * # Safety
 * `hub` is a live handle; `out_conn` is writable.
 */
enum FeedlabStatus feedlab_hub_connect(struct FeedlabHub *hub, uint64_t *out_conn);

/**
 * # Safety
 * `hub` is a live handle.
 */
enum FeedlabStatus feedlab_hub_disconnect(struct FeedlabHub *hub, uint64_t conn);

/**
 * Feeds one client text frame. Replies are written to `out_frames` as a
 * JSON array of `{"conn": id, "text": frame}`. Protocol errors are
 * replies, not failures; the status is only non-zero for bad arguments.
 *
 * # Safety
 * `hub` is a live handle; `text` is valid; `out_frames` is writable.
 */
enum FeedlabStatus feedlab_hub_handle(struct FeedlabHub *hub,
                                      uint64_t conn,
                                      const char *text,
                                      char **out_frames);

/**
 * Runs due broadcast ticks; frames are written as in `feedlab_hub_handle`.
 *
 * # Safety
 * `hub` is a live handle; `out_frames` is writable.
 */
enum FeedlabStatus feedlab_hub_tick(struct FeedlabHub *hub, char **out_frames);

/**
 * Writes the room's final snapshot JSON to `out_json`.
 *
 * # Safety
 * `hub` is a live handle; `room` is valid; `out_json` is writable.
 */
enum FeedlabStatus feedlab_hub_snapshot(struct FeedlabHub *hub, const char *room, char **out_json);

/**
 * Chi-square test on a row-major `rows x cols` count matrix. When
 * `out_residuals` is non-NULL it receives `rows * cols` Pearson residuals.
 *
 * # Safety
 * `counts` holds `rows * cols` values; `out` is writable;
 * `out_residuals` is NULL or holds `rows * cols` slots.
 */
enum FeedlabStatus feedlab_chi_square(const uint64_t *counts,
                                      size_t rows,
                                      size_t cols,
                                      struct FeedlabChiSquare *out,
                                      double *out_residuals);

/**
 * Paired t-test over `n` matched values.
 *
 * # Safety
 * `pre` and `post` hold `n` values; `out` is writable.
 */
enum FeedlabStatus feedlab_paired_t(const double *pre,
                                    const double *post,
                                    size_t n,
                                    struct FeedlabPairedT *out);

/**
 * Cohen's kappa over `n` paired string labels.
 *
 * # Safety
 * `rater_a` and `rater_b` hold `n` valid strings each; `out` is writable.
 */
enum FeedlabStatus feedlab_cohens_kappa(const char *const *rater_a,
                                        const char *const *rater_b,
                                        size_t n,
                                        struct FeedlabKappa *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEEDLAB_H */
