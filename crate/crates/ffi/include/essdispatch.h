/* C interface to the essdispatch simulator and policy runtime. */

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Opaque episode session over one network and profile set.
 */
typedef struct EssEnv EssEnv;

/**
 * Opaque radial network handle.
 */
typedef struct EssNetwork EssNetwork;

/**
 * Opaque checkpointed policy bound to a network.
 */
typedef struct EssPolicy EssPolicy;

/**
 * Opaque exogenous-profile handle (price, demand, PV time series).
 */
typedef struct EssProfiles EssProfiles;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be NULL (query mode).
 */
int32_t essdispatch_last_error(char *buf, uintptr_t len);

/**
 * Copy the library version string into `buf`; returns its full length.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be NULL.
 */
int32_t essdispatch_version(char *buf, uintptr_t len);

/**
 * Load a network definition file. Returns NULL on error
 * (see `essdispatch_last_error`).
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string.
 */
struct EssNetwork *essdispatch_network_load(const char *path);

/**
 * Apply a reconfiguration case from a case file to an existing network,
 * returning a new handle. NULL on error.
 *
 * # Safety
 * `network` must be a live handle from this library; strings as above.
 */
struct EssNetwork *essdispatch_network_reconfigure(const struct EssNetwork *network,
                                                   const char *reconfig_path,
                                                   const char *case_id);

/**
 * # Safety
 * `network` must be a handle from this library, freed at most once.
 */
void essdispatch_network_free(struct EssNetwork *network);

/**
 * # Safety
 * `network` must be a live handle.
 */
int32_t essdispatch_network_bus_count(const struct EssNetwork *network);

/**
 * # Safety
 * `network` must be a live handle.
 */
int32_t essdispatch_network_line_count(const struct EssNetwork *network);

/**
 * # Safety
 * `network` must be a live handle.
 */
int32_t essdispatch_network_ess_count(const struct EssNetwork *network);

/**
 * Generate a synthetic profile set for the network.
 *
 * # Safety
 * `network` must be a live handle.
 */
struct EssProfiles *essdispatch_profiles_synthetic(const struct EssNetwork *network,
                                                   uint32_t days,
                                                   uint64_t seed);

/**
 * Load profiles from the documented CSV layout.
 *
 * # Safety
 * `network` must be a live handle; `path` a NUL-terminated UTF-8 string.
 */
struct EssProfiles *essdispatch_profiles_load_csv(const struct EssNetwork *network,
                                                  const char *path);

/**
 * # Safety
 * `profiles` must be a handle from this library, freed at most once.
 */
void essdispatch_profiles_free(struct EssProfiles *profiles);

/**
 * Create an environment with default reward weights.
 *
 * # Safety
 * Both handles must be live.
 */
struct EssEnv *essdispatch_env_new(const struct EssNetwork *network,
                                   const struct EssProfiles *profiles);

/**
 * # Safety
 * `env` must be a handle from this library, freed at most once.
 */
void essdispatch_env_free(struct EssEnv *env);

/**
 * Length of the flat state vector: `2 + n + 2 b`.
 *
 * # Safety
 * `env` must be a live handle.
 */
int32_t essdispatch_env_state_len(const struct EssEnv *env);

/**
 * Number of ESS units (= action vector length).
 *
 * # Safety
 * `env` must be a live handle.
 */
int32_t essdispatch_env_action_len(const struct EssEnv *env);

/**
 * Reset to the start of `episode` (a day index) and write the initial state.
 *
 * # Safety
 * `env` must be a live handle; `state_out` must point to `state_len`
 * writable doubles.
 */
int32_t essdispatch_env_reset(struct EssEnv *env,
                              uint32_t episode,
                              double *state_out,
                              uintptr_t state_len);

/**
 * Apply ESS setpoints in kW (positive discharges; infeasible requests are
 * clipped). Writes the reward, the done flag and the next state.
 *
 * # Safety
 * `env` must be a live, reset handle; `action_kw` must point to
 * `action_len` doubles; `reward_out`/`done_out` must be writable;
 * `state_out` must point to `state_len` writable doubles (or be NULL).
 */
int32_t essdispatch_env_step(struct EssEnv *env,
                             const double *action_kw,
                             uintptr_t action_len,
                             double *reward_out,
                             int32_t *done_out,
                             double *state_out,
                             uintptr_t state_len);

/**
 * Load a training checkpoint (base path without the `.ckpt`/`.json`
 * suffix) and bind it to a network. Flat checkpoints fail with a
 * dimension-mismatch error on a different bus set. NULL on error.
 *
 * # Safety
 * Handles must be live; `checkpoint_base` a NUL-terminated UTF-8 string.
 */
struct EssPolicy *essdispatch_policy_load(const char *checkpoint_base,
                                          const struct EssNetwork *network,
                                          const struct EssProfiles *profiles);

/**
 * # Safety
 * `policy` must be a handle from this library, freed at most once.
 */
void essdispatch_policy_free(struct EssPolicy *policy);

/**
 * Run the policy on a flat state vector and write the dispatch in kW
 * (already scaled to each unit's power band).
 *
 * # Safety
 * `policy` must be a live handle; `state` must point to `state_len`
 * doubles in the documented layout; `action_kw_out` to `action_len`
 * writable doubles.
 */
int32_t essdispatch_policy_action(struct EssPolicy *policy,
                                  const double *state,
                                  uintptr_t state_len,
                                  double *action_kw_out,
                                  uintptr_t action_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
