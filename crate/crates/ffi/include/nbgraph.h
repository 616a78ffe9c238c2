#ifndef NBGRAPH_H
#define NBGRAPH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum nbg_edge_outcome {
  NBG_EDGE_OUTCOME_VERTEX_NOT_PRESENT = 0,
  NBG_EDGE_OUTCOME_EDGE_PRESENT = 1,
  NBG_EDGE_OUTCOME_EDGE_ADDED = 2,
  NBG_EDGE_OUTCOME_EDGE_NOT_PRESENT = 3,
  NBG_EDGE_OUTCOME_EDGE_REMOVED = 4,
  NBG_EDGE_OUTCOME_EDGE_FOUND = 5,
  NBG_EDGE_OUTCOME_VERTEX_OR_EDGE_NOT_PRESENT = 6,
} nbg_edge_outcome;

typedef enum nbg_reclamation {
  NBG_RECLAMATION_EPOCH = 0,
  NBG_RECLAMATION_LEAK = 1,
} nbg_reclamation;

typedef enum nbg_status {
  NBG_STATUS_OK = 0,
  NBG_STATUS_NULL_ARGUMENT = 1,
  NBG_STATUS_KEY_OUT_OF_RANGE = 2,
  NBG_STATUS_SELF_LOOP = 3,
  NBG_STATUS_REGISTRY_FULL = 4,
  NBG_STATUS_ALREADY_REGISTERED = 5,
  NBG_STATUS_INVALID_CONFIG = 6,
  // `nbg_get_path`: the endpoints are not connected.
  NBG_STATUS_NO_PATH = 7,
  // `nbg_get_path`: the round budget ran out.
  NBG_STATUS_INCONCLUSIVE = 8,
  // `nbg_get_path`: `*out_len` holds the required capacity.
  NBG_STATUS_BUFFER_TOO_SMALL = 9,
  NBG_STATUS_PANIC = 10,
} nbg_status;

// Opaque graph handle.
typedef struct nbg_graph nbg_graph;

// Opaque per-thread handle.
typedef struct nbg_thread nbg_thread;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a graph admitting up to `max_threads` registered threads.
//
// # Safety
// `out` must be null or point to writable storage for a pointer.
enum nbg_status nbg_graph_new(size_t max_threads,
                              enum nbg_reclamation reclamation,
                              struct nbg_graph **out);

// Releases the caller's graph handle. Nodes are freed once every thread
// handle is gone too. Null is a no-op.
//
// # Safety
// `g` must be null or a handle from `nbg_graph_new` not yet freed.
void nbg_graph_free(struct nbg_graph *g);

// Runs pending reclamation. Call only while no thread is inside an
// operation on this graph.
//
// # Safety
// `g` must be null or a live graph handle.
enum nbg_status nbg_graph_quiesce(const struct nbg_graph *g);

// Registers the calling thread.
//
// # Safety
// `g` must be a live graph handle and `out` writable. The returned handle
// must only be used and freed on the calling thread.
enum nbg_status nbg_thread_register(const struct nbg_graph *g, struct nbg_thread **out);

// Releases a thread handle and its registry slot. Null is a no-op.
//
// # Safety
// `t` must be null or a handle from `nbg_thread_register` on this thread.
void nbg_thread_free(struct nbg_thread *t);

// `*out` is true if `k` was absent and is now present.
//
// # Safety
// `t` must be a live thread handle owned by the caller, `out` writable.
enum nbg_status nbg_add_vertex(const struct nbg_thread *t, int64_t k, bool *out);

// `*out` is true if `k` was present and has been removed.
//
// # Safety
// As for `nbg_add_vertex`.
enum nbg_status nbg_remove_vertex(const struct nbg_thread *t, int64_t k, bool *out);

// # Safety
// As for `nbg_add_vertex`.
enum nbg_status nbg_contains_vertex(const struct nbg_thread *t, int64_t k, bool *out);

// # Safety
// As for `nbg_add_vertex`.
enum nbg_status nbg_add_edge(const struct nbg_thread *t,
                             int64_t k,
                             int64_t l,
                             enum nbg_edge_outcome *out);

// # Safety
// As for `nbg_add_vertex`.
enum nbg_status nbg_remove_edge(const struct nbg_thread *t,
                                int64_t k,
                                int64_t l,
                                enum nbg_edge_outcome *out);

// # Safety
// As for `nbg_add_vertex`.
enum nbg_status nbg_contains_edge(const struct nbg_thread *t,
                                  int64_t k,
                                  int64_t l,
                                  enum nbg_edge_outcome *out);

// Finds a path from `k` to `l`. On `NBG_STATUS_OK` the keys, endpoints
// included, are in `buf[0..*out_len]`. Returns `NBG_STATUS_NO_PATH` when
// the vertices are not connected (or one is absent), and
// `NBG_STATUS_BUFFER_TOO_SMALL` with the needed length in `*out_len` when
// `cap` is short. `max_rounds` bounds the comparison rounds; 0 means
// unbounded.
//
// # Safety
// `t` must be a live thread handle owned by the caller, `out_len` writable,
// and `buf` valid for `cap` writes (it may be null when `cap` is 0).
enum nbg_status nbg_get_path(const struct nbg_thread *t,
                             int64_t k,
                             int64_t l,
                             uint32_t max_rounds,
                             int64_t *buf,
                             size_t cap,
                             size_t *out_len);

// Static, NUL-terminated description of a status code.
const char *nbg_status_str(enum nbg_status s);

// Static, NUL-terminated message for an edge outcome, e.g. `"EDGE ADDED"`.
const char *nbg_edge_outcome_str(enum nbg_edge_outcome o);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NBGRAPH_H */
