#ifndef SPA_H
#define SPA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Answer carried by a report.
 */
typedef enum SpaAnswer {
  SPA_ANSWER_NO = 0,
  SPA_ANSWER_YES = 1,
  SPA_ANSWER_NONE = 2,
  SPA_ANSWER_FOUND = 3,
  SPA_ANSWER_EXHAUSTED = 4,
  SPA_ANSWER_FAILED = 5,
} SpaAnswer;

/**
 * Result of an API call.
 */
typedef enum SpaStatus {
  SPA_STATUS_OK = 0,
  SPA_STATUS_NULL_POINTER = 1,
  SPA_STATUS_INVALID_UTF8 = 2,
  SPA_STATUS_PARSE = 3,
  SPA_STATUS_QUERY = 4,
  SPA_STATUS_OUT_OF_RANGE = 5,
  SPA_STATUS_PANIC = 6,
} SpaStatus;

/**
 * The report of one query.
 */
typedef struct SpaReport SpaReport;

/**
 * A parsed `.spa` file.
 */
typedef struct SpaSpec SpaSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Valid until the next
 * failing call on the same thread; empty if none failed.
 */
const char *spa_last_error(void);

/**
 * Library version, a static string.
 */
const char *spa_version(void);

/**
 * Parse a specification from source text.
 *
 * # Safety
 * `src` must be a valid nul-terminated string and `out` a valid pointer.
 */
enum SpaStatus spa_spec_parse(const char *src, struct SpaSpec **out);

/**
 * # Safety
 * `spec` must come from [`spa_spec_parse`] and not be used afterwards.
 */
void spa_spec_free(struct SpaSpec *spec);

/**
 * Number of queries in the file; 0 for a null handle.
 *
 * # Safety
 * `spec` must be null or a live handle.
 */
size_t spa_spec_query_count(const struct SpaSpec *spec);

/**
 * Name of query `index`, as a string to release with [`spa_string_free`].
 *
 * # Safety
 * `spec` must be a live handle and `out` a valid pointer.
 */
enum SpaStatus spa_spec_query_name(const struct SpaSpec *spec, size_t index, char **out);

/**
 * Answer a derive query. A null `query` selects the only derive query.
 *
 * # Safety
 * `spec` must be a live handle, `query` null or a nul-terminated string,
 * `out` a valid pointer.
 */
enum SpaStatus spa_derive(const struct SpaSpec *spec, const char *query, struct SpaReport **out);

/**
 * Search for an attack. `sessions == 0` uses the query's bound and
 * `budget_ms == 0` means no time limit.
 *
 * # Safety
 * As for [`spa_derive`].
 */
enum SpaStatus spa_attack(const struct SpaSpec *spec,
                          const char *query,
                          uint32_t sessions,
                          uint64_t budget_ms,
                          struct SpaReport **out);

/**
 * # Safety
 * `report` must be null or a live handle.
 */
enum SpaAnswer spa_report_answer(const struct SpaReport *report);

/**
 * CLI exit code of the report: 0 answered, 1 error, 2 budget exhausted.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
int32_t spa_report_exit_code(const struct SpaReport *report);

/**
 * The report as JSON, to release with [`spa_string_free`]. Null for a null
 * handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
char *spa_report_json(const struct SpaReport *report);

/**
 * # Safety
 * `report` must come from [`spa_derive`] or [`spa_attack`] and not be used
 * afterwards.
 */
void spa_report_free(struct SpaReport *report);

/**
 * # Safety
 * `s` must be a string returned by this library and not be used afterwards.
 */
void spa_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SPA_H */
