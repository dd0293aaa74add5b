#ifndef RSIRS_H
#define RSIRS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RsirsScheme {
  RSIRS_SCHEME_RS_IRS = 0,
  RSIRS_SCHEME_RS_NOIRS = 1,
  RSIRS_SCHEME_TIN_IRS = 2,
  RSIRS_SCHEME_TIN_NOIRS = 3,
} RsirsScheme;

/**
 * Result code of every fallible call.
 */
typedef enum RsirsStatus {
  RSIRS_STATUS_OK = 0,
  RSIRS_STATUS_NULL_POINTER = 1,
  RSIRS_STATUS_INVALID_INPUT = 2,
  RSIRS_STATUS_INVALID_CONFIG = 3,
  RSIRS_STATUS_SOLVER = 4,
  RSIRS_STATUS_IO = 5,
  RSIRS_STATUS_PARSE = 6,
  RSIRS_STATUS_PANIC = 7,
} RsirsStatus;

/**
 * System parameters.
 */
typedef struct RsirsConfig RsirsConfig;

/**
 * Outcome of one scheme run.
 */
typedef struct RsirsResult RsirsResult;

/**
 * One sampled topology and channel realization plus the config it came from.
 */
typedef struct RsirsScenario RsirsScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *rsirs_last_error_message(void);

/**
 * Default configuration (4 BSs x 4 antennas, 6 users, 15 elements). Never returns null.
 */
struct RsirsConfig *rsirs_config_default(void);

/**
 * Parse a TOML document; absent keys keep their defaults.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RsirsStatus rsirs_config_from_toml(const char *toml, struct RsirsConfig **out);

/**
 * Resize to `n_users` users, each with floor `qos_bps` and unit weight.
 *
 * # Safety
 * `config` must come from this library and not be freed.
 */
enum RsirsStatus rsirs_config_set_users(struct RsirsConfig *config, size_t n_users, double qos_bps);

/**
 * Set per-user power weights; `len` must equal the user count.
 *
 * # Safety
 * `config` must be live and `weights` must point to `len` doubles.
 */
enum RsirsStatus rsirs_config_set_power_weights(struct RsirsConfig *config,
                                                const double *weights,
                                                size_t len);

/**
 * # Safety
 * `config` must come from this library (or be null) and is invalid afterwards.
 */
void rsirs_config_free(struct RsirsConfig *config);

/**
 * Draw a topology and channel set from `config` with `seed`.
 *
 * # Safety
 * `config` must be live and `out` a valid pointer.
 */
enum RsirsStatus rsirs_scenario_new(const struct RsirsConfig *config,
                                    uint64_t seed,
                                    struct RsirsScenario **out);

/**
 * # Safety
 * `scenario` must be live.
 */
size_t rsirs_scenario_n_users(const struct RsirsScenario *scenario);

/**
 * # Safety
 * `scenario` must come from this library (or be null) and is invalid afterwards.
 */
void rsirs_scenario_free(struct RsirsScenario *scenario);

/**
 * Run `scheme` on `scenario`; `seed` drives the randomization step.
 *
 * # Safety
 * `scenario` must be live and `out` a valid pointer.
 */
enum RsirsStatus rsirs_optimize(const struct RsirsScenario *scenario,
                                enum RsirsScheme scheme,
                                uint64_t seed,
                                struct RsirsResult **out);

/**
 * 1 if every QoS floor is met, 0 otherwise (including a null handle).
 *
 * # Safety
 * `result` must be live or null.
 */
int32_t rsirs_result_feasible(const struct RsirsResult *result);

/**
 * Unweighted transmit power in watts; NaN for a null handle.
 *
 * # Safety
 * `result` must be live or null.
 */
double rsirs_result_power_w(const struct RsirsResult *result);

/**
 * Weighted transmit power in watts; NaN for a null handle.
 *
 * # Safety
 * `result` must be live or null.
 */
double rsirs_result_weighted_power_w(const struct RsirsResult *result);

/**
 * # Safety
 * `result` must be live or null.
 */
size_t rsirs_result_outer_iters(const struct RsirsResult *result);

/**
 * Number of reflecting elements in the returned phase vector.
 *
 * # Safety
 * `result` must be live or null.
 */
size_t rsirs_result_n_phases(const struct RsirsResult *result);

/**
 * Copy phase angles in radians, `[0, 2π)`, into `out[0..len]`.
 * `len` must equal [`rsirs_result_n_phases`].
 *
 * # Safety
 * `result` must be live and `out` must hold `len` doubles.
 */
enum RsirsStatus rsirs_result_phases(const struct RsirsResult *result, double *out, size_t len);

/**
 * Copy per-user achieved rates in bit/s into `out[0..len]`; `len` must
 * equal the user count.
 *
 * # Safety
 * `result` must be live and `out` must hold `len` doubles.
 */
enum RsirsStatus rsirs_result_rates(const struct RsirsResult *result, double *out, size_t len);

/**
 * # Safety
 * `result` must come from this library (or be null) and is invalid afterwards.
 */
void rsirs_result_free(struct RsirsResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RSIRS_H */
