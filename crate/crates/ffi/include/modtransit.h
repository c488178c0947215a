#ifndef MODTRANSIT_H
#define MODTRANSIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MtStatus {
  MT_STATUS_OK = 0,
  MT_STATUS_NULL_POINTER = 1,
  MT_STATUS_INVALID_ARGUMENT = 2,
  MT_STATUS_DATA_ERROR = 3,
  MT_STATUS_SOLVER_ERROR = 4,
  /**
   * The solve stopped at a time or iteration limit; results are valid
   * but not proven optimal.
   */
  MT_STATUS_LIMIT_REACHED = 5,
  MT_STATUS_PANIC = 6,
} MtStatus;

typedef enum MtMethod {
  MT_METHOD_MONOLITH = 0,
  MT_METHOD_CLASSIC = 1,
  MT_METHOD_ENHANCED = 2,
} MtMethod;

/**
 * A network with its design and solver settings.
 */
typedef struct MtNetwork MtNetwork;

/**
 * Result of a design solve.
 */
typedef struct MtRun MtRun;

typedef struct MtRunSummary {
  bool optimal;
  double upper_bound;
  double lower_bound;
  double gap_percent;
  size_t iterations;
  double wall_time;
} MtRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mt_version(void);

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *mt_last_error(void);

/**
 * Loads the four CSV tables in `dir`. `config` may be null for the default
 * settings, or name a TOML/JSON file with `[design]` and `[benders]` tables.
 *
 * # Safety
 * `dir` and `config` must be null or NUL-terminated strings; `out` must be
 * a valid pointer.
 */
enum MtStatus mt_network_load(const char *dir, const char *config, struct MtNetwork **out);

/**
 * One of the built-in toy instances (`index` 0 to 2).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum MtStatus mt_network_toy(uint32_t index, struct MtNetwork **out);

/**
 * # Safety
 * `net` must come from this library and not be used afterwards.
 */
void mt_network_free(struct MtNetwork *net);

/**
 * Writes element counts; any output pointer may be null.
 *
 * # Safety
 * `net` must be a live handle; non-null outputs must be valid.
 */
enum MtStatus mt_network_counts(const struct MtNetwork *net,
                                size_t *nodes,
                                size_t *links,
                                size_t *lines,
                                size_t *zones);

/**
 * Replaces the bus and MoD fleet budgets.
 *
 * # Safety
 * `net` must be a live handle.
 */
enum MtStatus mt_network_set_budgets(struct MtNetwork *net, double buses, double vehicles);

/**
 * Expected total travel cost of a fixed design. `frequencies` has one entry
 * per line (0 for closed), `fleets` one per zone; values must be on the
 * configured menus.
 *
 * # Safety
 * `net` must be a live handle, the arrays must hold the stated number of
 * elements and `cost` must be valid.
 */
enum MtStatus mt_assign_cost(const struct MtNetwork *net,
                             const double *frequencies,
                             size_t num_lines,
                             const double *fleets,
                             size_t num_zones,
                             double *cost);

/**
 * Optimizes the design. `time_limit` is in seconds; pass 0 or a negative
 * value for no limit. On `Ok` and `LimitReached` `*out` holds a run.
 *
 * # Safety
 * `net` must be a live handle and `out` a valid pointer.
 */
enum MtStatus mt_design(const struct MtNetwork *net,
                        enum MtMethod method,
                        double time_limit,
                        struct MtRun **out);

/**
 * # Safety
 * `run` must come from this library and not be used afterwards.
 */
void mt_run_free(struct MtRun *run);

/**
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum MtStatus mt_run_summary(const struct MtRun *run, struct MtRunSummary *out);

/**
 * Frequency of line `line` in the best design, 0 when closed.
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum MtStatus mt_run_line_frequency(const struct MtRun *run, size_t line, double *out);

/**
 * MoD fleet size of zone `zone` in the best design.
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum MtStatus mt_run_zone_fleet(const struct MtRun *run, size_t zone, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODTRANSIT_H */
