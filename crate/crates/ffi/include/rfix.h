#ifndef RFIX_H
#define RFIX_H

#include <stdbool.h>
#include <stddef.h>

/**
 * Return codes. The numeric values match the `rfix` CLI exit codes where
 * the meanings overlap.
 */
typedef enum rfix_status {
  RFIX_STATUS_OK = 0,
  RFIX_STATUS_INVALID_INPUT = 1,
  RFIX_STATUS_INFEASIBLE = 2,
  RFIX_STATUS_NUMERICAL_FAILURE = 3,
  RFIX_STATUS_NULL_POINTER = 4,
  RFIX_STATUS_BUFFER_TOO_SMALL = 5,
  RFIX_STATUS_UNSTABLE = 6,
  RFIX_STATUS_PANIC = 7,
} rfix_status;

/**
 * Parsed problem file.
 */
typedef struct rfix_problem rfix_problem;

/**
 * Outcome of a synthesis or controller check.
 */
typedef struct rfix_result rfix_result;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *rfix_version(void);

/**
 * Message for the last failing call on this thread. Valid until the next
 * call into the library from the same thread.
 */
const char *rfix_last_error(void);

/**
 * Parses and validates a problem document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum rfix_status rfix_problem_from_json(const char *json, struct rfix_problem **out);

/**
 * # Safety
 * `problem` must come from [`rfix_problem_from_json`] or be null.
 */
void rfix_problem_free(struct rfix_problem *problem);

/**
 * Plant order `n` and controller order `m` of a problem.
 *
 * # Safety
 * `problem` must be a live handle; the out pointers must be writable.
 */
enum rfix_status rfix_problem_orders(const struct rfix_problem *problem,
                                     size_t *plant_order,
                                     size_t *controller_order);

/**
 * Synthesizes a controller. A result handle is produced for every solver
 * outcome, including infeasible ones; the return value mirrors its status.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum rfix_status rfix_synthesize(const struct rfix_problem *problem, struct rfix_result **out);

/**
 * Certifies a fixed controller, one SDP per LMI group.
 *
 * # Safety
 * `x` and `y` must point to `len` doubles each; `out` must be writable.
 */
enum rfix_status rfix_check_controller(const struct rfix_problem *problem,
                                       const double *x,
                                       const double *y,
                                       size_t len,
                                       struct rfix_result **out);

/**
 * # Safety
 * `result` must come from this library or be null.
 */
void rfix_result_free(struct rfix_result *result);

/**
 * Status of a result: `RFIX_STATUS_OK`, `RFIX_STATUS_INFEASIBLE` or `RFIX_STATUS_NUMERICAL_FAILURE`.
 *
 * # Safety
 * `result` must be a live handle.
 */
enum rfix_status rfix_result_status(const struct rfix_result *result);

/**
 * Smallest verified margin over the result's certificates.
 *
 * # Safety
 * `result` must be a live handle; `margin` must be writable.
 */
enum rfix_status rfix_result_margin(const struct rfix_result *result, double *margin);

/**
 * Copies the controller into `x` and `y`, each of capacity `cap`. On
 * return `*len` holds `m + 1`; `RFIX_STATUS_BUFFER_TOO_SMALL` if `cap` is short.
 *
 * # Safety
 * `x` and `y` must be writable for `cap` doubles; `len` must be writable.
 */
enum rfix_status rfix_result_controller(const struct rfix_result *result,
                                        double *x,
                                        double *y,
                                        size_t cap,
                                        size_t *len);

/**
 * Certificates and solver statistics as a JSON string; release with
 * [`rfix_string_free`].
 *
 * # Safety
 * `result` must be a live handle; `out` must be writable.
 */
enum rfix_status rfix_result_json(const struct rfix_result *result, char **out);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void rfix_string_free(char *s);

/**
 * Closed-loop stability of `(a, b)` under the controller `(x, y)`, where
 * `a`, `b` hold `a_1..a_n`, `b_1..b_n` and must lie inside the intervals.
 *
 * # Safety
 * Array arguments must point to the stated number of doubles; `stable`
 * must be writable.
 */
enum rfix_status rfix_closed_loop_stable(const struct rfix_problem *problem,
                                         const double *x,
                                         const double *y,
                                         size_t len,
                                         const double *a,
                                         const double *b,
                                         size_t n,
                                         bool *stable);

/**
 * Unit-step response at one plant sample, written to `t_out` / `y_out`
 * (capacity `cap`). `*written` receives the number of points; with
 * `RFIX_STATUS_BUFFER_TOO_SMALL` it holds the required capacity.
 *
 * # Safety
 * Array arguments must point to the stated number of doubles; `t_out`
 * and `y_out` must be writable for `cap` doubles.
 */
enum rfix_status rfix_step_response(const struct rfix_problem *problem,
                                    const double *x,
                                    const double *y,
                                    size_t len,
                                    const double *a,
                                    const double *b,
                                    size_t n,
                                    double t_end,
                                    double dt,
                                    double *t_out,
                                    double *y_out,
                                    size_t cap,
                                    size_t *written);

/**
 * Number of sampling-plan points (vertices plus seeded interior samples)
 * configured by the problem file.
 *
 * # Safety
 * `problem` must be a live handle; `count` must be writable.
 */
enum rfix_status rfix_problem_sample_count(const struct rfix_problem *problem, size_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RFIX_H */
