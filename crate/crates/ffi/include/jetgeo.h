/* C interface to the jetgeo symbolic jet-geometry engine.
 *
 * Scenes are opaque handles created from the same line-oriented scene
 * format the command-line tool reads. Reports come back as UTF-8,
 * NUL-terminated strings owned by the caller; release them with
 * jetgeo_string_free. Every function returns a JetgeoStatus; on any
 * failure, jetgeo_last_error() describes what went wrong.
 */

#ifndef JETGEO_H
#define JETGEO_H

/* Generated by cbindgen from the Rust sources; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a call. Anything other than `Ok` leaves a human-readable
 * explanation behind [`jetgeo_last_error`]; `ChecksFailed` still writes
 * the report so the failing entries can be inspected.
 */
typedef enum JetgeoStatus {
  /**
   * The call succeeded (and, for verification, every check passed).
   */
  JETGEO_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  JETGEO_STATUS_NULL_ARGUMENT = 1,
  /**
   * An input string was not valid UTF-8.
   */
  JETGEO_STATUS_INVALID_UTF8 = 2,
  /**
   * An argument value was not understood: an unknown structure or
   * suite name, an unknown connection choice, or a request the scene
   * cannot satisfy.
   */
  JETGEO_STATUS_BAD_REQUEST = 3,
  /**
   * The scene or change text did not parse or validate.
   */
  JETGEO_STATUS_BAD_SCENE = 4,
  /**
   * A geometric computation failed.
   */
  JETGEO_STATUS_COMPUTE_ERROR = 5,
  /**
   * Verification ran to completion and at least one check failed.
   */
  JETGEO_STATUS_CHECKS_FAILED = 6,
  /**
   * An internal panic was caught at the boundary.
   */
  JETGEO_STATUS_INTERNAL_ERROR = 7,
} JetgeoStatus;

/**
 * A parsed and validated scene: the jet-space coordinates plus either a
 * metric pair or explicit connection coefficients. Create with
 * [`jetgeo_scene_parse`] or [`jetgeo_scene_load`], release with
 * [`jetgeo_scene_free`].
 */
typedef struct JetgeoScene JetgeoScene;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The library version as a static NUL-terminated string; never freed.
 */
const char *jetgeo_version(void);

/**
 * The message of the most recent failed call on this thread, or NULL if
 * none has failed yet. The pointer stays valid until the next call into
 * the library on the same thread; do not free it.
 */
const char *jetgeo_last_error(void);

/**
 * Parses scene text into a new scene handle and stores it in
 * `*out_scene` (NULL on failure).
 *
 * # Safety
 *
 * `text` must be NULL or a NUL-terminated string valid for the call.
 * `out_scene` must be a valid, writable pointer.
 */
enum JetgeoStatus jetgeo_scene_parse(const char *text, struct JetgeoScene **out_scene);

/**
 * Reads and parses a scene file into a new scene handle and stores it
 * in `*out_scene` (NULL on failure).
 *
 * # Safety
 *
 * `path` must be NULL or a NUL-terminated string valid for the call.
 * `out_scene` must be a valid, writable pointer.
 */
enum JetgeoStatus jetgeo_scene_load(const char *path, struct JetgeoScene **out_scene);

/**
 * Releases a scene handle. NULL is a no-op.
 *
 * # Safety
 *
 * `scene` must be NULL or a pointer previously returned through
 * [`jetgeo_scene_parse`] or [`jetgeo_scene_load`] that has not been
 * freed yet; it must not be used afterwards.
 */
void jetgeo_scene_free(struct JetgeoScene *scene);

/**
 * The spatial dimension n of the scene's manifold, or 0 for NULL.
 *
 * # Safety
 *
 * `scene` must be NULL or a live scene handle.
 */
size_t jetgeo_scene_dimension(const struct JetgeoScene *scene);

/**
 * Computes one structure of the scene and stores the rendered report in
 * `*out_report` as a caller-owned string (NULL on failure).
 *
 * `what` picks the structure: `christoffel`, `nlc`, `connection`,
 * `torsion`, `curvature`, `deflection`, or `em`. `connection` picks the
 * linear connection where one is needed: NULL or `auto` for whatever the
 * scene provides, `berwald` for the metric-pair connection, `file` for
 * explicit coefficients. `machine` switches the report from readable
 * text to flat `key = value` lines.
 *
 * # Safety
 *
 * `scene` must be a live scene handle or NULL. `what` and `connection`
 * must each be NULL or NUL-terminated strings valid for the call.
 * `out_report` must be a valid, writable pointer.
 */
enum JetgeoStatus jetgeo_compute(const struct JetgeoScene *scene,
                                 const char *what,
                                 const char *connection,
                                 bool machine,
                                 char **out_report);

/**
 * Verifies an identity suite of the scene's connection by seeded
 * sampling and stores the rendered report in `*out_report` as a
 * caller-owned string. On `ChecksFailed` the report is still written;
 * it lists each failing check.
 *
 * `what` picks the suite: `ricci`, `deflection`, `brackets`,
 * `covariance`, or `all`. Pass `samples` = 0, `seed` = 0, or `tol` <= 0
 * to fall back to the scene file's value for that control (or the
 * defaults: 32 samples, seed 0, tolerance 1e-9).
 *
 * # Safety
 *
 * `scene` must be a live scene handle or NULL. `what` must be NULL or a
 * NUL-terminated string valid for the call. `out_report` must be a
 * valid, writable pointer.
 */
enum JetgeoStatus jetgeo_verify(const struct JetgeoScene *scene,
                                const char *what,
                                size_t samples,
                                uint64_t seed,
                                double tol,
                                char **out_report);

/**
 * Transports a structure across a coordinate change and stores the
 * rendered report in `*out_report` as a caller-owned string.
 *
 * `change_text` holds `t_new`/`t_old`/`x_new[i]`/`x_old[i]` lines; pass
 * NULL to use the change embedded in the scene. `what` picks the
 * target: `nlc`, `connection`, or `check` to verify the transport rules
 * themselves (`check` reports `ChecksFailed` like [`jetgeo_verify`]).
 *
 * # Safety
 *
 * `scene` must be a live scene handle or NULL. `change_text` and `what`
 * must each be NULL or NUL-terminated strings valid for the call.
 * `out_report` must be a valid, writable pointer.
 */
enum JetgeoStatus jetgeo_transform(const struct JetgeoScene *scene,
                                   const char *change_text,
                                   const char *what,
                                   char **out_report);

/**
 * Releases a string returned by this library. NULL is a no-op.
 *
 * # Safety
 *
 * `text` must be NULL or a pointer previously returned in an
 * `out_report` slot that has not been freed yet; it must not be used
 * afterwards.
 */
void jetgeo_string_free(char *text);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JETGEO_H */
