#ifndef CYBERINSURE_H
#define CYBERINSURE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CiStatus {
  CI_STATUS_OK = 0,
  CI_STATUS_NULL_POINTER = 1,
  CI_STATUS_DOMAIN = 2,
  CI_STATUS_NUMERICAL = 3,
  CI_STATUS_CONVERGENCE = 4,
  CI_STATUS_NON_FINITE = 5,
  CI_STATUS_PANIC = 6,
} CiStatus;

typedef enum CiRiskFamily {
  CI_RISK_FAMILY_EXPONENTIAL = 0,
  CI_RISK_FAMILY_POWER = 1,
} CiRiskFamily;

typedef enum CiBoundary {
  CI_BOUNDARY_INTERIOR = 0,
  CI_BOUNDARY_ZERO_INVESTMENT = 1,
  CI_BOUNDARY_FULL_ELIMINATION = 2,
} CiBoundary;

typedef enum CiScenario {
  CI_SCENARIO_NO_INFO = 0,
  CI_SCENARIO_POST_CONTRACT_INFO = 1,
  CI_SCENARIO_PRE_CONTRACT_INFO = 2,
} CiScenario;

/**
 * Opaque market handle.
 */
typedef struct CiMarket CiMarket;

typedef struct CiInvestment {
  double x_star;
  double p_star;
  double objective_value;
  enum CiBoundary boundary;
  double foc_residual;
  double second_derivative;
} CiInvestment;

typedef struct CiContract {
  double premium;
  double coverage;
  double p_low;
  double p_high;
  double total_welfare;
  double insurer_profit;
} CiContract;

/**
 * Two risk classes sharing one family.
 */
typedef struct CiClasses {
  enum CiRiskFamily family;
  double low_p0;
  double low_rate;
  double high_p0;
  double high_rate;
  double theta;
} CiClasses;

typedef struct CiAsymSummary {
  bool traded;
  bool separating;
  double insurer_profit;
  double value_of_information;
  /**
   * Largest coverage offered to any class.
   */
  double max_coverage;
} CiAsymSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL, or 0
 * when no error has been recorded.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t ci_last_error_message(char *buf, size_t len);

/**
 * Creates a market of `n` users with linear utility. The handle is written to
 * `out` and must be released with `ci_market_free`.
 *
 * # Safety
 * `out` must be null or valid for a pointer write.
 */
enum CiStatus ci_market_new(size_t n,
                            double w0,
                            double r,
                            enum CiRiskFamily risk_family,
                            double p0,
                            double rate,
                            struct CiMarket **out);

/**
 * Switches the market to exponential utility with the given aversion, or to
 * linear utility when `aversion` is 0.
 *
 * # Safety
 * `market` must be null or a live handle from `ci_market_new`.
 */
enum CiStatus ci_market_set_aversion(struct CiMarket *market, double aversion);

/**
 * # Safety
 * `market` must be null or a handle from `ci_market_new` not yet freed.
 */
void ci_market_free(struct CiMarket *market);

/**
 * Socially optimal investment when users do not interact.
 *
 * # Safety
 * `market` must be a live handle; `out` must be valid for a write.
 */
enum CiStatus ci_solve_case1(const struct CiMarket *market, struct CiInvestment *out);

/**
 * Cooperative (social planner) investment.
 *
 * # Safety
 * `market` must be a live handle; `out` must be valid for a write.
 */
enum CiStatus ci_solve_case2(const struct CiMarket *market, struct CiInvestment *out);

/**
 * Selected symmetric Nash equilibrium; the number of equilibria found is
 * written to `count` when it is not null.
 *
 * # Safety
 * `market` must be a live handle; `out` must be valid for a write; `count`
 * must be null or valid for a write.
 */
enum CiStatus ci_solve_case3(const struct CiMarket *market,
                             struct CiInvestment *out,
                             size_t *count);

/**
 * # Safety
 * `out` must be valid for a write.
 */
enum CiStatus ci_welfare_contract(double w, double r, double k, struct CiContract *out);

/**
 * # Safety
 * `out` must be valid for a write.
 */
enum CiStatus ci_profit_contract(double w, double r, double k, struct CiContract *out);

/**
 * # Safety
 * `out` must be valid for a write.
 */
enum CiStatus ci_welfare_gap(double r, double k, double *out);

/**
 * Insurer-optimal contract under one information scenario. `aversion` 0
 * selects linear utility.
 *
 * # Safety
 * `classes` must point to a valid `CiClasses`; `out` must be valid for a write.
 */
enum CiStatus ci_solve_asym(enum CiScenario scenario,
                            const struct CiClasses *classes,
                            double aversion,
                            double w0,
                            double r,
                            struct CiAsymSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CYBERINSURE_H */
