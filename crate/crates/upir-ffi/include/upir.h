/* C interface for the upir combinatorial-design and protocol toolkit. */

#pragma once

/* Generated with cbindgen:0.26.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call in this API.
typedef enum UpirStatus {
  // The call succeeded and `out` parameters are populated.
  UPIR_STATUS_OK = 0,
  // A pointer was null, a string was not UTF-8, or a parameter was out
  // of range for the operation.
  UPIR_STATUS_INVALID_ARGUMENT = 1,
  // The input could not be parsed (malformed JSON or NDJSON).
  UPIR_STATUS_PARSE_ERROR = 2,
  // The input parsed but failed validation (broken design invariants,
  // inconsistent observations, mismatched trace).
  UPIR_STATUS_VALIDATION_FAILED = 3,
  // The design/protocol combination does not support the operation.
  UPIR_STATUS_UNSUPPORTED = 4,
  // An internal invariant failed; report this as a bug.
  UPIR_STATUS_INTERNAL = 5,
} UpirStatus;

// Opaque handle to a validated design (a set system plus its derived
// structure).
typedef struct UpirDesign UpirDesign;

// Opaque handle to a simulated query trace.
typedef struct UpirTrace UpirTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string; do not free.
const char *upir_version(void);

// Description of the current thread's most recent failure (empty after a
// success). Free with `upir_string_free`.
char *upir_last_error_message(void);

// Frees a string returned by this library. Null is a no-op.
void upir_string_free(char *s);

// Parses and validates a design from `{"name", "points", "blocks"}` JSON.
enum UpirStatus upir_design_from_json(const char *json_text, struct UpirDesign **out);

// Loads one of the built-in example designs by name.
enum UpirStatus upir_design_fixture(const char *name, struct UpirDesign **out);

// Releases a design handle. Null is a no-op.
void upir_design_free(struct UpirDesign *design);

// Serializes the design back to its JSON file form.
enum UpirStatus upir_design_to_json(const struct UpirDesign *design, char **out);

// Classification profile of the design (parameters and family flags), as
// JSON.
enum UpirStatus upir_design_profile_json(const struct UpirDesign *design, char **out);

// JSON array of the design's point names, in id order. Numeric point ids
// in other outputs index into this array.
enum UpirStatus upir_design_point_names(const struct UpirDesign *design, char **out);

// Builds the dual design (points and blocks exchanged).
enum UpirStatus upir_design_dual(const struct UpirDesign *design, struct UpirDesign **out);

// Adds a user, covering it with a greedy choice of existing memory spaces.
// Writes the grown design to `out` and, when `joined_json` is non-null, a
// JSON report `{"user", "joined_spaces": [indices]}` of the spaces whose
// keys the newcomer must receive.
enum UpirStatus upir_design_add_user(const struct UpirDesign *design,
                                     const char *user,
                                     struct UpirDesign **out,
                                     char **joined_json);

// Removes a user. Writes the shrunken design to `out` and, when
// `rekeyed_json` is non-null, a JSON report `{"user", "rekeyed_spaces":
// [indices]}` of the spaces whose keys must rotate. Refused (leaving the
// design untouched) when removal would break a block or the covering
// property.
enum UpirStatus upir_design_remove_user(const struct UpirDesign *design,
                                        const char *user,
                                        struct UpirDesign **out,
                                        char **rekeyed_json);

// Simulates `n_queries` independent uniform-source queries under the named
// protocol. `kind` is one of: `dbwm`, `dbwms`, `pd-bibd-v1`, `pd-bibd-v2`,
// `pd-cover-v1`, `pd-cover-v2`. Pass a negative `p` / `p_hop` to leave the
// parameter unset.
enum UpirStatus upir_run_workload(const struct UpirDesign *design,
                                  const char *kind,
                                  double p,
                                  double p_hop,
                                  uint64_t n_queries,
                                  uint64_t seed,
                                  struct UpirTrace **out);

// Releases a trace handle. Null is a no-op.
void upir_trace_free(struct UpirTrace *trace);

// Number of query records in the trace.
enum UpirStatus upir_trace_query_count(const struct UpirTrace *trace, uint64_t *out);

// Serializes the trace as NDJSON: a header line, then one line per query.
// With `redact` nonzero, ground truth is stripped and only the database's
// view (query id, link group, contacting proxy) is kept.
enum UpirStatus upir_trace_to_ndjson(const struct UpirTrace *trace, bool redact, char **out);

// Parses a full (unredacted) NDJSON trace back into a handle.
enum UpirStatus upir_trace_from_ndjson(const char *text, struct UpirTrace **out);

// The database's intersection attack over the proxies of one linked query
// group. `proxies_json` is a JSON array of point names, e.g.
// `["U2","U11","U8"]`. The result JSON holds the surviving candidates and
// the per-observation derivation.
enum UpirStatus upir_db_intersection_attack(const struct UpirDesign *design,
                                            const char *kind,
                                            const char *proxies_json,
                                            char **out);

// A coalition attack from explicit observations. `observations_json` is a
// JSON array of `[block_index, "proxy_name"]` pairs; `coalition_json` is a
// JSON array of member names.
enum UpirStatus upir_coalition_attack(const struct UpirDesign *design,
                                      const char *kind,
                                      const char *observations_json,
                                      const char *coalition_json,
                                      char **out);

// Brute-forces the worst-case anonymity of the design under the protocol's
// observation rules: the smallest candidate set any coalition of `c` users
// can reach from `rho` linked observations. The report JSON carries
// `kappa`, a minimizing `witness` (point and block names), whether the
// evaluation `budget` truncated the search (`partial`), and the number of
// evaluations.
enum UpirStatus upir_measure_anonymity(const struct UpirDesign *design,
                                       const char *kind,
                                       uint32_t rho,
                                       uint32_t c,
                                       uint64_t budget,
                                       char **out);

// Exact posterior a space member assigns to each candidate source after
// seeing one post naming `proxy` in block `space`. The JSON maps candidate
// names to `{"numerator", "denominator", "value"}`.
enum UpirStatus upir_theoretical_posterior(const struct UpirDesign *design,
                                           const char *kind,
                                           uint32_t space,
                                           const char *proxy,
                                           const char *observer,
                                           char **out);

// Simulates `n_trials` queries and checks that the database's view of
// sources given proxies is uniform within `z` standard errors per cell.
// The report JSON carries `pass`, the per-cell verdict, and hop-length
// statistics when `p_hop` was set (pass a negative value to leave it
// unset).
enum UpirStatus upir_verify_db_anonymity(const struct UpirDesign *design,
                                         const char *kind,
                                         double p_hop,
                                         uint64_t n_trials,
                                         uint64_t seed,
                                         double z,
                                         char **out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus
