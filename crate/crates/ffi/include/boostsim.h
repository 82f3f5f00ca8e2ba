#ifndef BOOSTSIM_H
#define BOOSTSIM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define BOOSTSIM_MODE_LTE_ONLY 0

#define BOOSTSIM_MODE_WIFI_ONLY 1

#define BOOSTSIM_MODE_LWIP 2

#define BOOSTSIM_MODE_BOOST 3

typedef enum BoostsimStatus {
  BOOSTSIM_STATUS_OK = 0,
  BOOSTSIM_STATUS_NULL_POINTER = 1,
  BOOSTSIM_STATUS_INVALID_UTF8 = 2,
  BOOSTSIM_STATUS_CONFIG_PARSE = 3,
  BOOSTSIM_STATUS_CONFIG_VALIDATION = 4,
  BOOSTSIM_STATUS_INVALID_ARGUMENT = 5,
  BOOSTSIM_STATUS_SIMULATION = 6,
  BOOSTSIM_STATUS_IO = 7,
  BOOSTSIM_STATUS_PANIC = 8,
} BoostsimStatus;

/**
 * Campaign configuration.
 */
typedef struct BoostsimConfig BoostsimConfig;

/**
 * Outcome of one simulated drop.
 */
typedef struct BoostsimDropResult BoostsimDropResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code. Never null.
 */
const char *boostsim_status_string(enum BoostsimStatus status);

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length
 * without the terminator, so a caller can size a second attempt.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t boostsim_last_error_message(char *buf, size_t len);

/**
 * Outer size of a packet of `inner_size` bytes after IPsec tunnelling.
 */
uint32_t boostsim_ipsec_encapsulate(uint32_t inner_size);

/**
 * Default (calibrated) configuration.
 *
 * # Safety
 * `out` must be null or valid for a pointer write.
 */
enum BoostsimStatus boostsim_config_default(struct BoostsimConfig **out);

/**
 * Parses and validates a TOML configuration. Missing keys take defaults.
 *
 * # Safety
 * `text` must be null or a NUL-terminated string; `out` must be null or
 * valid for a pointer write.
 */
enum BoostsimStatus boostsim_config_from_toml(const char *text, struct BoostsimConfig **out);

/**
 * Simulated time per drop, seconds.
 *
 * # Safety
 * `cfg` must be null or a live handle.
 */
enum BoostsimStatus boostsim_config_set_duration(struct BoostsimConfig *cfg, double seconds);

/**
 * # Safety
 * `cfg` must be null or a live handle.
 */
enum BoostsimStatus boostsim_config_set_master_seed(struct BoostsimConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `cfg` must be null or a handle not yet freed.
 */
void boostsim_config_free(struct BoostsimConfig *cfg);

/**
 * Generates drop `drop_index` of an `n_ues` cell from the configured
 * master seed and runs it in `mode` (one of the `BOOSTSIM_MODE_*` codes).
 *
 * # Safety
 * `cfg` must be null or a live handle; `out` must be null or valid for a
 * pointer write.
 */
enum BoostsimStatus boostsim_run_drop(const struct BoostsimConfig *cfg,
                                      uint32_t mode,
                                      uint32_t n_ues,
                                      uint64_t drop_index,
                                      struct BoostsimDropResult **out);

/**
 * Number of UEs in the drop, 0 for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
uint32_t boostsim_drop_ue_count(const struct BoostsimDropResult *result);

/**
 * Downlink throughput of one UE in Mbps, on the configured basis.
 *
 * # Safety
 * `result` must be null or a live handle; `out` must be null or valid for
 * a write.
 */
enum BoostsimStatus boostsim_drop_ue_throughput(const struct BoostsimDropResult *result,
                                                const struct BoostsimConfig *cfg,
                                                uint32_t ue,
                                                double *out);

/**
 * Downlink goodput summed over all cells, Mbps. NaN for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double boostsim_drop_sum_cell_mbps(const struct BoostsimDropResult *result);

/**
 * Committed path switches in the drop.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
uint64_t boostsim_drop_switch_count(const struct BoostsimDropResult *result);

/**
 * Wi-Fi collisions in the drop.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
uint64_t boostsim_drop_collisions(const struct BoostsimDropResult *result);

/**
 * # Safety
 * `result` must be null or a handle not yet freed.
 */
void boostsim_drop_free(struct BoostsimDropResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BOOSTSIM_H */
