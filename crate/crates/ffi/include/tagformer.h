#ifndef TAGFORMER_H
#define TAGFORMER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TfStatus {
  TF_STATUS_OK = 0,
  TF_STATUS_NULL_POINTER = 1,
  TF_STATUS_INVALID_INPUT = 2,
  TF_STATUS_IO = 3,
  TF_STATUS_PARSE = 4,
  TF_STATUS_CONFIG = 5,
  TF_STATUS_CHECKPOINT = 6,
  /**
   * A caller buffer was missing or too small; the required length was
   * written to the length out-parameter.
   */
  TF_STATUS_BUFFER_TOO_SMALL = 7,
  TF_STATUS_RUNTIME = 8,
  TF_STATUS_PANIC = 9,
} TfStatus;

/**
 * A directed citation graph.
 */
typedef struct TfGraph TfGraph;

/**
 * A prepared dataset with a trained classifier.
 */
typedef struct TfModel TfModel;

typedef struct TfMetrics {
  double accuracy;
  double macro_precision;
  double macro_recall;
  double macro_f1;
} TfMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next call into this library on the same
 * thread.
 */
const char *tf_last_error(void);

/**
 * Builds a graph from `num_edges` directed edges `src[i] -> dst[i]`.
 *
 * # Safety
 * `src` and `dst` must point to `num_edges` readable values, and `out` must
 * be a valid pointer.
 */
enum TfStatus tf_graph_new(const size_t *src,
                           const size_t *dst,
                           size_t num_edges,
                           size_t num_nodes,
                           struct TfGraph **out);

/**
 * # Safety
 * `graph` must be null or a handle from [`tf_graph_new`] not yet freed.
 */
void tf_graph_free(struct TfGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle; the out pointers must be valid.
 */
enum TfStatus tf_graph_size(const struct TfGraph *graph, size_t *num_nodes, size_t *num_edges);

/**
 * Fills `in_deg` and `out_deg`, each of length `len` which must equal the
 * node count.
 *
 * # Safety
 * `graph` must be a live handle; both buffers must hold `len` values.
 */
enum TfStatus tf_graph_degrees(const struct TfGraph *graph,
                               size_t *in_deg,
                               size_t *out_deg,
                               size_t len);

/**
 * Local clustering coefficient of every node over the undirected view.
 *
 * # Safety
 * `graph` must be a live handle; `out` must hold `len` values.
 */
enum TfStatus tf_graph_clustering(const struct TfGraph *graph, double *out, size_t len);

/**
 * Samples the ego subgraph of `center` and its shortest-path distances
 * capped at `max_spd` (unreachable pairs get `max_spd + 1`).
 *
 * On return `*k` holds the subgraph size. `nodes` receives the global ids in
 * local order (center first) and `spd` the row-major `k×k` distances. When
 * `nodes_len < k` or `spd_len < k*k` nothing is written and
 * `TF_STATUS_BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * `graph` must be a live handle, `k` valid, and each buffer either null or
 * writable for its stated length.
 */
enum TfStatus tf_graph_ego_spd(const struct TfGraph *graph,
                               size_t center,
                               size_t hops,
                               size_t max_nodes,
                               uint64_t seed,
                               size_t max_spd,
                               size_t *nodes,
                               size_t nodes_len,
                               size_t *spd,
                               size_t spd_len,
                               size_t *k);

/**
 * Accuracy and macro precision, recall and F1 of `len` predictions.
 *
 * # Safety
 * `preds` and `labels` must hold `len` values; `out` must be valid.
 */
enum TfStatus tf_metrics(const size_t *preds,
                         const size_t *labels,
                         size_t len,
                         size_t num_classes,
                         struct TfMetrics *out);

/**
 * Hashed bag-of-words embedding of a NUL-terminated UTF-8 string.
 *
 * # Safety
 * `text` must be a valid C string and `out` must hold `dim` values.
 */
enum TfStatus tf_encode_text(const char *text, size_t dim, uint64_t seed, double *out);

/**
 * Loads the prepared dataset named by the run config at `config_path` and
 * the checkpoint at `checkpoint_path`.
 *
 * # Safety
 * Both paths must be valid C strings and `out` a valid pointer.
 */
enum TfStatus tf_model_load(const char *config_path,
                            const char *checkpoint_path,
                            struct TfModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`tf_model_load`] not yet freed.
 */
void tf_model_free(struct TfModel *model);

/**
 * # Safety
 * `model` must be a live handle; the out pointers must be valid.
 */
enum TfStatus tf_model_shape(const struct TfModel *model, size_t *num_nodes, size_t *num_classes);

/**
 * Predicted class of each of the `len` node ids in `nodes`.
 *
 * # Safety
 * `model` must be a live handle; `nodes` and `out` must hold `len` values.
 */
enum TfStatus tf_model_predict(const struct TfModel *model,
                               const size_t *nodes,
                               size_t len,
                               size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TAGFORMER_H */
