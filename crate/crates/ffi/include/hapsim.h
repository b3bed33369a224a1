#ifndef HAPSIM_H
#define HAPSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum HapsimStatus {
  HAPSIM_STATUS_OK = 0,
  /**
   * A required pointer was null.
   */
  HAPSIM_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  HAPSIM_STATUS_INVALID_UTF8 = 2,
  HAPSIM_STATUS_INVALID_ARGUMENT = 3,
  /**
   * Scenario text or values were rejected.
   */
  HAPSIM_STATUS_INVALID_SCENARIO = 4,
  HAPSIM_STATUS_PARSE_ERROR = 5,
  HAPSIM_STATUS_ENCODING_OVERFLOW = 6,
  /**
   * The requested value is not available for this run.
   */
  HAPSIM_STATUS_INSUFFICIENT_DATA = 7,
  HAPSIM_STATUS_IO = 8,
  /**
   * A metric name that the report does not contain.
   */
  HAPSIM_STATUS_UNKNOWN_METRIC = 9,
  /**
   * Internal failure; the library caught a panic.
   */
  HAPSIM_STATUS_INTERNAL = 10,
} HapsimStatus;

/**
 * Finished simulation run.
 */
typedef struct HapsimResult HapsimResult;

/**
 * Parsed scenario.
 */
typedef struct HapsimScenario HapsimScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *hapsim_last_error(void);

/**
 * Library version, a static string.
 */
const char *hapsim_version(void);

/**
 * Parses scenario text into `*out`.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HapsimStatus hapsim_scenario_parse(const char *text, struct HapsimScenario **out);

/**
 * Reads and parses the scenario file at `path`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HapsimStatus hapsim_scenario_load(const char *path, struct HapsimScenario **out);

/**
 * Applies one `section.key=value` override. On failure the scenario is
 * left unchanged.
 *
 * # Safety
 * `scenario` must come from this library; `assignment` must be a
 * NUL-terminated string.
 */
enum HapsimStatus hapsim_scenario_override(struct HapsimScenario *scenario, const char *assignment);

/**
 * Canonical text of the scenario. Free with `hapsim_string_free`.
 *
 * # Safety
 * `scenario` must come from this library and `out` be a valid pointer.
 */
enum HapsimStatus hapsim_scenario_to_text(const struct HapsimScenario *scenario, char **out);

/**
 * # Safety
 * `scenario` must come from this library (or be null) and not be used
 * afterwards.
 */
void hapsim_scenario_free(struct HapsimScenario *scenario);

/**
 * Runs the simulation to completion.
 *
 * # Safety
 * `scenario` must come from this library and `out` be a valid pointer.
 */
enum HapsimStatus hapsim_run(const struct HapsimScenario *scenario, struct HapsimResult **out);

/**
 * Looks up a report metric by its report.csv name, e.g.
 * `total_pps_avg` or `divergence_rms.client1`.
 *
 * # Safety
 * `result` must come from this library, `name` be a NUL-terminated string
 * and `out` a valid pointer.
 */
enum HapsimStatus hapsim_result_metric(const struct HapsimResult *result,
                                       const char *name,
                                       double *out);

/**
 * Number of packets offered to the channels during the run.
 *
 * # Safety
 * `result` must come from this library or be null.
 */
uint64_t hapsim_result_packet_count(const struct HapsimResult *result);

/**
 * The report as CSV (`metric,value` lines). Free with `hapsim_string_free`.
 *
 * # Safety
 * `result` must come from this library and `out` be a valid pointer.
 */
enum HapsimStatus hapsim_result_report_csv(const struct HapsimResult *result, char **out);

/**
 * The report as a text table. Free with `hapsim_string_free`.
 *
 * # Safety
 * `result` must come from this library and `out` be a valid pointer.
 */
enum HapsimStatus hapsim_result_report_table(const struct HapsimResult *result, char **out);

/**
 * Writes the same files as `hapsim run` into `dir`.
 *
 * # Safety
 * Handles must come from this library; `dir` must be a NUL-terminated
 * string.
 */
enum HapsimStatus hapsim_result_write(const struct HapsimResult *result,
                                      const struct HapsimScenario *scenario,
                                      const char *dir);

/**
 * # Safety
 * `result` must come from this library (or be null) and not be used
 * afterwards.
 */
void hapsim_result_free(struct HapsimResult *result);

/**
 * # Safety
 * `s` must be a string returned by this library (or null).
 */
void hapsim_string_free(char *s);

/**
 * Rounds `value` to the nearest multiple of `quantum`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HapsimStatus hapsim_quantize(double value, double quantum, double *out);

/**
 * Bandwidth in kbit/s for a packet rate and average packet size in bytes.
 */
double hapsim_bandwidth_kbps(double pps, double avg_packet_bytes);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HAPSIM_H */
