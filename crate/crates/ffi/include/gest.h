#ifndef GEST_H
#define GEST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdint.h>

typedef enum GestStatus {
  GEST_STATUS_OK = 0,
  GEST_STATUS_NULL_POINTER = 1,
  GEST_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed JSON or registry document.
   */
  GEST_STATUS_PARSE = 3,
  /**
   * The graph failed validation; the report is still written.
   */
  GEST_STATUS_INVALID = 4,
  /**
   * The temporal constraints have no solution.
   */
  GEST_STATUS_INFEASIBLE = 5,
  GEST_STATUS_GENERATION = 6,
  GEST_STATUS_IO = 7,
  GEST_STATUS_PANIC = 8,
} GestStatus;

/**
 * Immutable capability registry; may be shared between threads.
 */
typedef struct GestRegistry GestRegistry;

/**
 * One tool-call session bound to a registry.
 */
typedef struct GestSession GestSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next call into this library from the same thread; do not free.
 */
const char *gest_last_error_message(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void gest_string_free(char *s);

/**
 * The bundled sample registry.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GestStatus gest_registry_sample(struct GestRegistry **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum GestStatus gest_registry_load_file(const char *path, struct GestRegistry **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` a valid pointer.
 */
enum GestStatus gest_registry_load_json(const char *json, struct GestRegistry **out);

/**
 * Releases a registry. Sessions created from it stay valid. NULL is ignored.
 *
 * # Safety
 * `reg` must come from a `gest_registry_*` constructor and not have been freed.
 */
void gest_registry_free(struct GestRegistry *reg);

/**
 * # Safety
 * `reg` must be a live registry handle; `out` a valid pointer.
 */
enum GestStatus gest_session_new(const struct GestRegistry *reg, struct GestSession **out);

/**
 * Runs one tool call. `args_json` may be NULL for no arguments. The result
 * object (`{"ok": ...}`) is written to `out_json`; a rejected tool call is
 * still `GEST_STATUS_OK` with `"ok": false` in the result.
 *
 * # Safety
 * `session` must be a live session handle; strings NUL-terminated; `out_json`
 * a valid pointer.
 */
enum GestStatus gest_session_call(struct GestSession *session,
                                  const char *tool,
                                  const char *args_json,
                                  char **out_json);

/**
 * Fingerprint of the whole session state.
 *
 * # Safety
 * `session` must be a live session handle; `out` a valid pointer.
 */
enum GestStatus gest_session_fingerprint(const struct GestSession *session, uint64_t *out);

/**
 * The graph built so far, as JSON.
 *
 * # Safety
 * `session` must be a live session handle; `out_json` a valid pointer.
 */
enum GestStatus gest_session_graph(const struct GestSession *session, char **out_json);

/**
 * # Safety
 * `session` must come from [`gest_session_new`] and not have been freed.
 */
void gest_session_free(struct GestSession *session);

/**
 * Validates a graph. The report is written to `out_report` whether or not
 * the graph is valid; an invalid graph returns `GEST_STATUS_INVALID`.
 *
 * # Safety
 * `reg` must be a live registry handle; `graph_json` NUL-terminated;
 * `out_report` a valid pointer.
 */
enum GestStatus gest_validate_json(const struct GestRegistry *reg,
                                   const char *graph_json,
                                   char **out_report);

/**
 * Earliest-start schedule of a graph at `fps` frames per time unit.
 *
 * # Safety
 * `reg` must be a live registry handle; `graph_json` NUL-terminated;
 * `out_json` a valid pointer.
 */
enum GestStatus gest_schedule_json(const struct GestRegistry *reg,
                                   const char *graph_json,
                                   uint32_t fps,
                                   char **out_json);

/**
 * Procedurally generates a story graph.
 *
 * # Safety
 * `reg` must be a live registry handle; `out_json` a valid pointer.
 */
enum GestStatus gest_generate(const struct GestRegistry *reg,
                              uint64_t seed,
                              uint32_t actors,
                              uint32_t scenes,
                              uint32_t rounds,
                              char **out_json);

/**
 * The tool manifest: name, kind, description and parameter schema of every tool.
 *
 * # Safety
 * `out_json` must be a valid pointer.
 */
enum GestStatus gest_tools_manifest(char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEST_H */
