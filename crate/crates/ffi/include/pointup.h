#ifndef POINTUP_H
#define POINTUP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>

/**
 * Result code of every fallible call.
 */
typedef enum PuStatus {
  PU_STATUS_OK = 0,
  PU_STATUS_NULL_POINTER = 1,
  PU_STATUS_INVALID_ARGUMENT = 2,
  PU_STATUS_SHAPE = 3,
  PU_STATUS_PARSE = 4,
  PU_STATUS_IO = 5,
  PU_STATUS_CHECKPOINT = 6,
  PU_STATUS_NON_FINITE = 7,
  PU_STATUS_BUFFER_TOO_SMALL = 8,
  PU_STATUS_PANIC = 9,
} PuStatus;

/**
 * A point cloud.
 */
typedef struct PuCloud PuCloud;

/**
 * A KNN index matrix: `rows x k` neighbor indices.
 */
typedef struct PuGraph PuGraph;

/**
 * A triangle mesh.
 */
typedef struct PuMesh PuMesh;

/**
 * A trained upsampling model.
 */
typedef struct PuModel PuModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *pu_last_error(void);

/**
 * Library version as a NUL-terminated string with static lifetime.
 */
const char *pu_version(void);

/**
 * Copies `n` points from `xyz` (`3n` doubles, x y z per point).
 *
 * # Safety
 * `xyz` must point to `3 * n` readable doubles; `out` must be writable.
 */
enum PuStatus pu_cloud_new(const double *xyz, size_t n, struct PuCloud **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PuStatus pu_cloud_read_xyz(const char *path, struct PuCloud **out);

/**
 * # Safety
 * `cloud` must be a live handle; `path` a NUL-terminated string.
 */
enum PuStatus pu_cloud_write_xyz(const struct PuCloud *cloud, const char *path);

/**
 * Number of points, or 0 for a null handle.
 *
 * # Safety
 * `cloud` must be null or a live handle.
 */
size_t pu_cloud_len(const struct PuCloud *cloud);

/**
 * Copies the points into `out` (`3 * capacity` doubles).
 *
 * # Safety
 * `cloud` must be a live handle; `out` must hold `3 * capacity` doubles.
 */
enum PuStatus pu_cloud_copy_points(const struct PuCloud *cloud, double *out, size_t capacity);

/**
 * # Safety
 * `cloud` must be null or a handle not yet freed.
 */
void pu_cloud_free(struct PuCloud *cloud);

/**
 * Loads a `PUXP1` checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PuStatus pu_model_load(const char *path, struct PuModel **out);

/**
 * Upsampling ratio, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t pu_model_ratio(const struct PuModel *model);

/**
 * Produces `ratio * n` points from an `n`-point cloud.
 *
 * # Safety
 * `model` and `input` must be live handles; `out` must be writable.
 */
enum PuStatus pu_model_upsample(const struct PuModel *model,
                                const struct PuCloud *input,
                                struct PuCloud **out);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void pu_model_free(struct PuModel *model);

/**
 * Reads an OFF mesh; `dropped` (may be null) receives the number of
 * zero-area faces discarded.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PuStatus pu_mesh_read_off(const char *path, struct PuMesh **out, size_t *dropped);

/**
 * # Safety
 * `mesh` must be null or a handle not yet freed.
 */
void pu_mesh_free(struct PuMesh *mesh);

/**
 * Sum of both directed mean squared nearest-neighbor distances.
 *
 * # Safety
 * `pred` and `gt` must be live handles; `out` must be writable.
 */
enum PuStatus pu_chamfer(const struct PuCloud *pred, const struct PuCloud *gt, double *out);

/**
 * Larger of both directed maxima of unsquared nearest-neighbor distances.
 *
 * # Safety
 * `pred` and `gt` must be live handles; `out` must be writable.
 */
enum PuStatus pu_hausdorff(const struct PuCloud *pred, const struct PuCloud *gt, double *out);

/**
 * Mean unsquared distance from each predicted point to the mesh.
 *
 * # Safety
 * `pred` and `mesh` must be live handles; `out` must be writable.
 */
enum PuStatus pu_point_to_face(const struct PuCloud *pred, const struct PuMesh *mesh, double *out);

/**
 * Exact `k`-nearest-neighbor graph, self excluded, ties by smaller index.
 *
 * # Safety
 * `cloud` must be a live handle; `out` must be writable.
 */
enum PuStatus pu_knn(const struct PuCloud *cloud, size_t k, struct PuGraph **out);

/**
 * Graph for the doubled point set: rows `2i` and `2i+1` take row `i` with
 * every index `j` mapped to `2j`.
 *
 * # Safety
 * `graph` must be a live handle; `out` must be writable.
 */
enum PuStatus pu_graph_expand(const struct PuGraph *graph, struct PuGraph **out);

/**
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t pu_graph_rows(const struct PuGraph *graph);

/**
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t pu_graph_k(const struct PuGraph *graph);

/**
 * Copies the row-major `rows x k` indices into `out`.
 *
 * # Safety
 * `graph` must be a live handle; `out` must hold `capacity` entries.
 */
enum PuStatus pu_graph_copy_entries(const struct PuGraph *graph, size_t *out, size_t capacity);

/**
 * # Safety
 * `graph` must be null or a handle not yet freed.
 */
void pu_graph_free(struct PuGraph *graph);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POINTUP_H */
