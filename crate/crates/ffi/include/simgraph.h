#ifndef SIMGRAPH_H
#define SIMGRAPH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum SgStatus {
  SG_STATUS_OK = 0,
  SG_STATUS_NULL_POINTER = 1,
  SG_STATUS_INVALID_ARGUMENT = 2,
  SG_STATUS_IO = 3,
  SG_STATUS_FORMAT = 4,
  SG_STATUS_DIM_MISMATCH = 5,
  SG_STATUS_VERSION = 6,
  SG_STATUS_INVALID_GRAPH = 7,
  SG_STATUS_CONFIG = 8,
  SG_STATUS_DIVERGENCE = 9,
  SG_STATUS_PANIC = 10,
} SgStatus;

typedef struct SgGraph SgGraph;

/**
 * Row-major `f32` vectors.
 */
typedef struct SgMatrix SgMatrix;

typedef struct SgSearchStats {
  /**
   * Number of results written.
   */
  size_t n_results;
  size_t dcs;
  size_t hops;
} SgSearchStats;

typedef struct SgEvalResult {
  double recall_at_1;
  double mean_dcs;
  double mean_hops;
  double mean_reward;
} SgEvalResult;

typedef struct SgTrainSummary {
  size_t best_epoch;
  double initial_reward;
  double initial_recall;
  double initial_mean_dcs;
  double best_reward;
  double best_recall;
  double best_mean_dcs;
} SgTrainSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a
 * successful call. Valid until the next `sg_*` call on the same thread.
 */
const char *sg_last_error(void);

/**
 * Copies `rows * dim` floats into a new matrix.
 *
 * # Safety
 * `data` must point to `rows * dim` readable floats; `out` must be writable.
 */
enum SgStatus sg_matrix_new(const float *data, size_t rows, size_t dim, struct SgMatrix **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SgStatus sg_matrix_load_fvecs(const char *path, struct SgMatrix **out);

/**
 * # Safety
 * `m` must be a live handle or NULL.
 */
size_t sg_matrix_rows(const struct SgMatrix *m);

/**
 * # Safety
 * `m` must be a live handle or NULL.
 */
size_t sg_matrix_dim(const struct SgMatrix *m);

/**
 * # Safety
 * `m` must come from an `sg_matrix_*` constructor and not be used again.
 */
void sg_matrix_free(struct SgMatrix *m);

/**
 * Exact nearest base row for every query, written to `out_ids`.
 *
 * # Safety
 * `out_ids` must have room for `sg_matrix_rows(queries)` entries.
 */
enum SgStatus sg_brute_force_gt(const struct SgMatrix *base,
                                const struct SgMatrix *queries,
                                uint32_t *out_ids);

/**
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum SgStatus sg_medoid(const struct SgMatrix *base, uint32_t *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum SgStatus sg_graph_complete(size_t n, uint32_t start, struct SgGraph **out);

/**
 * # Safety
 * `base` must be live; `out` must be writable.
 */
enum SgStatus sg_graph_nsw(const struct SgMatrix *base,
                           size_t m,
                           size_t ef_construction,
                           uint64_t seed,
                           struct SgGraph **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SgStatus sg_graph_load(const char *path, struct SgGraph **out);

/**
 * # Safety
 * `g` must be live; `path` must be a NUL-terminated string.
 */
enum SgStatus sg_graph_save(const struct SgGraph *g, const char *path);

/**
 * # Safety
 * `g` must be a live handle or NULL.
 */
size_t sg_graph_n_vertices(const struct SgGraph *g);

/**
 * # Safety
 * `g` must be a live handle or NULL.
 */
size_t sg_graph_n_edges(const struct SgGraph *g);

/**
 * # Safety
 * `g` must be a live handle or NULL.
 */
uint32_t sg_graph_start(const struct SgGraph *g);

/**
 * Copies the out-neighbors of `v` into `out` (capacity `cap`) and stores
 * the outdegree in `out_len`. Nothing is copied when `cap` is too small.
 *
 * # Safety
 * `out` must have room for `cap` entries; `out_len` must be writable.
 */
enum SgStatus sg_graph_neighbors(const struct SgGraph *g,
                                 uint32_t v,
                                 uint32_t *out,
                                 size_t cap,
                                 size_t *out_len);

/**
 * Plain graph of the edges with probability at least 0.5.
 *
 * # Safety
 * `g` must be live; `out` must be writable.
 */
enum SgStatus sg_graph_extract(const struct SgGraph *g, struct SgGraph **out);

/**
 * # Safety
 * `g` must come from an `sg_graph_*` constructor and not be used again.
 */
void sg_graph_free(struct SgGraph *g);

/**
 * Beam search keeping every edge. Up to `k` ids, closest first, go to
 * `out_ids`.
 *
 * # Safety
 * `query` must hold `dim` floats, `out_ids` room for `k` ids, `stats`
 * must be writable.
 */
enum SgStatus sg_search(const struct SgGraph *g,
                        const struct SgMatrix *base,
                        const float *query,
                        size_t dim,
                        size_t k,
                        size_t ef,
                        uint32_t *out_ids,
                        struct SgSearchStats *stats);

/**
 * Recall@1, mean DCS, mean hops and mean reward over a query set.
 *
 * # Safety
 * `gt` must hold one id per query row; `out` must be writable.
 */
enum SgStatus sg_evaluate(const struct SgGraph *g,
                          const struct SgMatrix *base,
                          const struct SgMatrix *queries,
                          const uint32_t *gt,
                          size_t k,
                          size_t ef,
                          size_t dcs_max,
                          struct SgEvalResult *out);

/**
 * Session reward: `found * max(dcs_max - dcs, 1)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SgStatus sg_reward(bool found, size_t dcs, size_t dcs_max, double *out);

/**
 * Builds the dataset and initial graph described by a TOML experiment
 * config, trains, and returns the refined graph.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string; `out_graph` and
 * `summary` must be writable.
 */
enum SgStatus sg_train_from_config(const char *config_toml,
                                   struct SgGraph **out_graph,
                                   struct SgTrainSummary *summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIMGRAPH_H */
