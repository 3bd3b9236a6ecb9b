#ifndef BERRY_H
#define BERRY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; 2, 3 and 4 match the CLI exit codes.
 */
typedef enum BerryStatus {
  BERRY_STATUS_OK = 0,
  BERRY_STATUS_NULL_ARGUMENT = 1,
  BERRY_STATUS_SCHEMA = 2,
  BERRY_STATUS_DOMAIN = 3,
  BERRY_STATUS_NUMERICAL = 4,
  BERRY_STATUS_BUFFER_TOO_SMALL = 5,
  BERRY_STATUS_PANIC = 6,
} BerryStatus;

typedef enum BerryMethod {
  BERRY_METHOD_ODE = 0,
  BERRY_METHOD_WILSON = 1,
} BerryMethod;

/**
 * Opaque Hamiltonian family.
 */
typedef struct BerryModel BerryModel;

/**
 * Opaque parameter path.
 */
typedef struct BerryPath BerryPath;

typedef struct BerryDiagnostics {
  double unitarity_residual;
  double min_gap;
  size_t steps;
  double richardson_error_estimate;
} BerryDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *berry_last_error(void);

/**
 * Library version as a static string.
 */
const char *berry_version(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void berry_string_free(char *s);

/**
 * Spin dipole `H = b·S` for spin `twice_s / 2`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum BerryStatus berry_model_spin_dipole(uint32_t twice_s, struct BerryModel **out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum BerryStatus berry_model_lambda(struct BerryModel **out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum BerryStatus berry_model_planar_spin(uint32_t twice_s,
                                         int64_t j,
                                         double eps,
                                         struct BerryModel **out);

/**
 * Model from a JSON object `{"name": ..., "params": {...}}`, as in scenario files.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BerryStatus berry_model_from_json(const char *json, struct BerryModel **out);

/**
 * # Safety
 * `model` must come from a `berry_model_*` constructor, or be NULL.
 */
void berry_model_free(struct BerryModel *model);

/**
 * Parameter-space dimension, or 0 for a NULL handle.
 *
 * # Safety
 * `model` must be a live handle or NULL.
 */
size_t berry_model_param_dim(const struct BerryModel *model);

/**
 * Hilbert-space dimension, or 0 for a NULL handle.
 *
 * # Safety
 * `model` must be a live handle or NULL.
 */
size_t berry_model_hilbert_dim(const struct BerryModel *model);

/**
 * Degeneracy K of the branch with the given label.
 *
 * # Safety
 * `model` must be a live handle, `label` a NUL-terminated string and `out_k` valid.
 */
enum BerryStatus berry_model_branch_degeneracy(const struct BerryModel *model,
                                               const char *label,
                                               size_t *out_k);

/**
 * Polyline through `count` points of dimension `dim`, stored row by row.
 *
 * # Safety
 * `coords` must point to `dim * count` doubles and `out` must be valid.
 */
enum BerryStatus berry_path_from_nodes(size_t dim,
                                       size_t count,
                                       const double *coords,
                                       struct BerryPath **out);

/**
 * Path from its scenario JSON form: a preset object or `{"nodes": [...]}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BerryStatus berry_path_from_json(const char *json, struct BerryPath **out);

/**
 * # Safety
 * `path` must come from a `berry_path_*` constructor, or be NULL.
 */
void berry_path_free(struct BerryPath *path);

/**
 * Non-abelian holonomy of a closed path.
 *
 * The K×K unitary is written row-major into `re`/`im`, which must hold
 * `capacity` doubles each. `out_k` receives K even when the buffers are too
 * small. `diagnostics` may be NULL.
 *
 * # Safety
 * All non-NULL pointers must be valid for the sizes described above.
 */
enum BerryStatus berry_holonomy(const struct BerryModel *model,
                                const struct BerryPath *path,
                                const char *branch,
                                enum BerryMethod method,
                                size_t steps,
                                double *re,
                                double *im,
                                size_t capacity,
                                size_t *out_k,
                                struct BerryDiagnostics *diagnostics);

/**
 * Bundle classification over the model's base; `samples` of 0 uses the default.
 *
 * # Safety
 * `model` must be live, `branch` NUL-terminated, the outputs valid.
 */
enum BerryStatus berry_classify(const struct BerryModel *model,
                                const char *branch,
                                size_t samples,
                                int64_t *out_det_winding,
                                bool *out_trivializable);

/**
 * Run a scenario document and return the report JSON through `out_json`
 * (free with [`berry_string_free`]); it is set to NULL on failure.
 *
 * # Safety
 * `scenario_json` must be NUL-terminated and `out_json` valid.
 */
enum BerryStatus berry_run_scenario(const char *scenario_json, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BERRY_H */
