/* C interface of the rankvol library.
 *
 * Every object is an opaque handle released with its *_free function. Every
 * fallible call returns an rv_status; on failure rv_last_error() describes the
 * problem (per thread, valid until the next failing call on that thread).
 * Strings returned through char** are heap copies released with rv_string_free.
 * Array outputs are caller-allocated; sizes are given in each comment.
 * Rank k (1-based in files) is index k-1 in arrays. */
#ifndef RANKVOL_H
#define RANKVOL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RV_API __declspec(dllexport)
#else
#define RV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rv_status {
  RV_OK = 0,
  RV_ERR_INVALID_INPUT = 1,
  RV_ERR_NUMERICAL = 2,
  RV_ERR_DATA_QUALITY = 3,
  RV_ERR_INCONSISTENT = 4,
  RV_ERR_UNDEFINED_HORIZON = 5,
  RV_ERR_BANKRUPTCY = 6,
  RV_ERR_IO = 7,
  RV_ERR_INTERNAL = 8
} rv_status;

RV_API const char* rv_version(void);
RV_API const char* rv_last_error(void);
RV_API const char* rv_status_name(rv_status status);
RV_API void rv_string_free(char* s);

/* ---- model parameters ------------------------------------------------- */

typedef struct rv_params rv_params;

RV_API rv_status rv_params_create(const double* a, const double* sigma2, size_t d, rv_params** out);
RV_API rv_status rv_params_from_json(const char* json, rv_params** out);
RV_API rv_status rv_params_load(const char* path, rv_params** out);
RV_API rv_status rv_params_save(const rv_params* p, const char* path);
RV_API rv_status rv_params_to_json(const rv_params* p, char** out);
RV_API size_t rv_params_d(const rv_params* p);
RV_API double rv_params_lambda(const rv_params* p);
/* a and sigma2: d entries each (either may be NULL). */
RV_API void rv_params_get(const rv_params* p, double* a, double* sigma2);
/* margins: d-1 entries, margins[j] belongs to rank j+2. */
RV_API rv_status rv_feller_check(const rv_params* p, double* margins, int* satisfied);
RV_API void rv_params_free(rv_params* p);

/* ---- simulation ------------------------------------------------------- */

typedef struct rv_sim_config {
  double dt;
  size_t substeps_per_sample;
  double horizon;
  size_t n_paths;
  uint64_t seed;
  double floor_eps;
  size_t top_m; /* 0: no truncation */
} rv_sim_config;

RV_API rv_sim_config rv_sim_config_default(void);
/* Defaults for stationary moments: 50 paths, 100-year horizon. */
RV_API rv_sim_config rv_moment_config_default(void);

/* One Euler step: x (d) -> x_out (d); *log_total_cap is advanced in place. */
RV_API rv_status rv_step_weights(const rv_params* p, const double* x, double dt, const double* noise,
                                 double floor_eps, double* x_out, double* log_total_cap);

typedef struct rv_trajectory rv_trajectory;

/* x0: d entries, or NULL for the uniform start. */
RV_API rv_status rv_simulate_path(const rv_params* p, const double* x0, const rv_sim_config* cfg,
                                  uint64_t path_index, rv_trajectory** out);
/* dw: n_steps * d Brownian increments with n_steps = round(horizon / dt). */
RV_API rv_status rv_simulate_driven(const rv_params* p, const double* x0, const rv_sim_config* cfg,
                                    const double* dw, size_t n_dw, rv_trajectory** out);
/* out: n_steps * d. */
RV_API rv_status rv_brownian_increments(uint64_t seed, uint64_t path_index, size_t d, size_t n_steps, double dt,
                                        double* out);
/* out: (n_dw / d / factor) * d. */
RV_API rv_status rv_coarsen_increments(const double* dw, size_t n_dw, size_t d, size_t factor, double* out);
RV_API size_t rv_trajectory_d(const rv_trajectory* t);
RV_API size_t rv_trajectory_n_samples(const rv_trajectory* t);
RV_API size_t rv_trajectory_clamp_events(const rv_trajectory* t);
/* times, log_total_cap: n_samples; weights: n_samples * d by name. */
RV_API void rv_trajectory_get(const rv_trajectory* t, double* times, double* weights, double* log_total_cap);
/* ranked: d descending weights of sample i. */
RV_API rv_status rv_trajectory_ranked(const rv_trajectory* t, size_t i, double* ranked);
RV_API rv_status rv_trajectory_save(const rv_trajectory* t, const char* path);
RV_API rv_status rv_trajectory_load(const char* path, rv_trajectory** out);
RV_API rv_status rv_trajectory_write_csv(const rv_trajectory* t, const char* path);
RV_API rv_status rv_trajectory_read_csv(const char* path, rv_trajectory** out);
RV_API void rv_trajectory_free(rv_trajectory* t);

typedef enum rv_moment_mode { RV_MOMENTS_TERMINAL = 0, RV_MOMENTS_TAIL_AVERAGE = 1 } rv_moment_mode;

typedef struct rv_moments rv_moments;

/* x0 may be NULL (uniform start). On partial failure the failing path count is
 * in rv_last_error and no handle is returned. */
RV_API rv_status rv_stationary_moments(const rv_params* p, const rv_sim_config* cfg, const double* x0,
                                       rv_moment_mode mode, double tail_fraction, rv_moments** out);
RV_API size_t rv_moments_d(const rv_moments* m);
RV_API size_t rv_moments_n_paths(const rv_moments* m);
RV_API size_t rv_moments_clamp_events(const rv_moments* m);
/* Each output d entries (any may be NULL). */
RV_API void rv_moments_get(const rv_moments* m, double* mu, double* rho, double* mu_stderr, double* rho_stderr);
RV_API void rv_moments_free(rv_moments* m);

/* ---- panels ----------------------------------------------------------- */

typedef enum rv_clock { RV_CLOCK_TRADING_DAYS = 0, RV_CLOCK_CALENDAR = 1 } rv_clock;

typedef struct rv_panel rv_panel;

RV_API rv_status rv_panel_ingest_csv(const char* path, size_t d, rv_clock clock, rv_panel** out);
RV_API rv_status rv_panel_from_trajectory(const rv_trajectory* t, double cap_scale, rv_panel** out);
RV_API rv_status rv_panel_load(const char* path, rv_panel** out);
RV_API rv_status rv_panel_save(const rv_panel* p, const char* path);
RV_API rv_status rv_panel_write_csv(const rv_panel* p, const char* path);
RV_API rv_status rv_panel_sidecar_json(const rv_panel* p, char** out);
RV_API size_t rv_panel_d(const rv_panel* p);
RV_API size_t rv_panel_n_dates(const rv_panel* p);
RV_API size_t rv_panel_rejected_rows(const rv_panel* p);
RV_API double rv_panel_span_years(const rv_panel* p);
/* out: d ranked weights of date i. */
RV_API rv_status rv_panel_ranked_weights(const rv_panel* p, size_t i, double* out);
/* Dates [first, last) as a new panel. */
RV_API rv_status rv_panel_slice(const rv_panel* p, size_t first, size_t last, rv_panel** out);
RV_API void rv_panel_free(rv_panel* p);

/* ---- estimators ------------------------------------------------------- */

typedef enum rv_delisting { RV_DELISTING_DROP = 0, RV_DELISTING_STRICT = 1 } rv_delisting;

typedef enum rv_field {
  RV_FIELD_SIGMA2_RAW = 0,
  RV_FIELD_SIGMA2 = 1,
  RV_FIELD_PHIBAR = 2,
  RV_FIELD_PHI = 3,
  RV_FIELD_MU = 4,
  RV_FIELD_RHO = 5,
  RV_FIELD_A = 6
} rv_field;

typedef struct rv_estimates rv_estimates;

RV_API rv_status rv_estimate(const rv_panel* panel, size_t smoothing_window, rv_delisting policy,
                             rv_estimates** out);
RV_API size_t rv_estimates_d(const rv_estimates* e);
/* out: d entries. RV_FIELD_A fails unless a lambda has been applied. */
RV_API rv_status rv_estimates_get(const rv_estimates* e, rv_field field, double* out);
RV_API void rv_estimates_lambda_hat(const rv_estimates* e, double* arithmetic, double* log_growth);
RV_API size_t rv_estimates_warning_count(const rv_estimates* e);
RV_API rv_status rv_estimates_to_csv(const rv_estimates* e, char** out);
RV_API rv_status rv_estimates_header_json(const rv_estimates* e, char** out);
RV_API void rv_estimates_free(rv_estimates* e);

/* Array-level estimators; outputs have the input length d. */
RV_API rv_status rv_sigma2_ranked_variant(const rv_panel* panel, rv_delisting policy, double* out);
RV_API rv_status rv_name_change_share(const rv_panel* panel, double* out);
RV_API rv_status rv_smooth_uniform(const double* v, size_t n, size_t window, double* out);
RV_API rv_status rv_phi_hat(const double* phibar, size_t d, double* out);
RV_API rv_status rv_a_hat(const double* mu, const double* rho, const double* phi, const double* sigma2, size_t d,
                          double lambda, double* out);

typedef struct rv_leakage {
  double lhs;
  double rhs;
  double boundary;
  double relative_wealth_drift;
} rv_leakage;

RV_API rv_status rv_leakage_check(const rv_panel* panel, size_t k, rv_leakage* out);

/* ---- calibration ------------------------------------------------------ */

typedef struct rv_calibration rv_calibration;

RV_API rv_status rv_calibrate(const rv_panel* panel, double lambda, size_t smoothing_window, rv_delisting policy,
                              rv_calibration** out);
RV_API rv_status rv_calibrate_estimates(const rv_estimates* e, double lambda, rv_calibration** out);
RV_API rv_status rv_calibration_params(const rv_calibration* c, rv_params** out);
RV_API rv_status rv_calibration_estimates(const rv_calibration* c, rv_estimates** out);
RV_API int rv_calibration_feller_satisfied(const rv_calibration* c);
RV_API rv_status rv_calibration_to_json(const rv_calibration* c, char** out);
RV_API void rv_calibration_free(rv_calibration* c);

/* mu, rho, out: d entries. */
RV_API rv_status rv_implied_phi(const rv_params* p, const double* mu, const double* rho, double* out);

typedef struct rv_fit_summary {
  size_t top_n;
  double l2_collision;
  double l2_cdc;
  double l2_collision_se;
  double l2_cdc_se;
  double max_identity_residual;
} rv_fit_summary;

typedef enum rv_fit_field {
  RV_FIT_MU_MODEL = 0,
  RV_FIT_PHI_MODEL = 1,
  RV_FIT_MU_STDERR = 2,
  RV_FIT_PHI_STDERR = 3,
  RV_FIT_NORM_COLLISION_ERR = 4,
  RV_FIT_NORM_CDC_ERR = 5,
  RV_FIT_IDENTITY_RESIDUAL = 6,
  RV_FIT_APPROXIMATION_RESIDUAL = 7
} rv_fit_field;

typedef struct rv_fit_report rv_fit_report;

RV_API rv_status rv_fit(const rv_calibration* c, const rv_moments* m, size_t top_n, rv_fit_report** out);
RV_API void rv_fit_get_summary(const rv_fit_report* f, rv_fit_summary* out);
RV_API rv_status rv_fit_get(const rv_fit_report* f, rv_fit_field field, double* out);
RV_API rv_status rv_fit_to_csv(const rv_fit_report* f, char** out);
RV_API rv_status rv_fit_to_json(const rv_fit_report* f, char** out);
RV_API void rv_fit_free(rv_fit_report* f);

typedef struct rv_sweep_options {
  rv_sim_config sim;
  size_t smoothing_window;
  rv_delisting policy;
  size_t top_n;
  rv_moment_mode mode;
  double tail_fraction;
} rv_sweep_options;

RV_API rv_sweep_options rv_sweep_options_default(void);
/* out: 21 entries. */
RV_API void rv_default_lambda_grid(double* out);

typedef struct rv_sweep_row {
  double lambda;
  int ok;
  double l2_collision;
  double l2_cdc;
  double l2_collision_se;
  double l2_cdc_se;
  double max_identity_residual;
  int feller_satisfied;
  const char* error; /* owned by the sweep handle */
} rv_sweep_row;

typedef struct rv_sweep rv_sweep;

RV_API rv_status rv_lambda_sweep(const rv_panel* panel, const double* grid, size_t n_grid,
                                 const rv_sweep_options* options, rv_sweep** out);
RV_API size_t rv_sweep_n_rows(const rv_sweep* s);
RV_API rv_status rv_sweep_row_get(const rv_sweep* s, size_t i, rv_sweep_row* out);
/* Monotonicity within tolerance_se combined standard errors. */
RV_API void rv_sweep_diagnostics(const rv_sweep* s, double tolerance_se, int* cdc_non_increasing,
                                 int* collision_non_decreasing);
RV_API rv_status rv_sweep_to_csv(const rv_sweep* s, char** out);
RV_API rv_status rv_sweep_to_json(const rv_sweep* s, char** out);
RV_API void rv_sweep_free(rv_sweep* s);

/* All arrays n entries. */
RV_API rv_status rv_out_of_sample_errors(const double* in_errors, const double* phi_hat_in,
                                         const double* phi_hat_out, const double* mu_hat_in, size_t n,
                                         double* out);

/* ---- portfolios ------------------------------------------------------- */

typedef enum rv_rule_kind {
  RV_RULE_MARKET = 0,
  RV_RULE_DIVERSITY = 1,
  RV_RULE_GROWTH_CLOSED = 2,
  RV_RULE_GROWTH_OPEN = 3,
  RV_RULE_LARGE_CAP = 4
} rv_rule_kind;

typedef struct rv_rule {
  rv_rule_kind kind;
  double p;
  size_t n_open;
  size_t k_top;
} rv_rule;

RV_API rv_status rv_rule_from_json(const char* json, rv_rule* out);
RV_API rv_status rv_rule_to_json(const rv_rule* rule, char** out);

/* x, out: d entries; params may be NULL for rules that do not need it. */
RV_API rv_status rv_portfolio_weights(const rv_rule* rule, const double* x, size_t d, const rv_params* params,
                                      double* out);
/* n = 0: closed market. */
RV_API rv_status rv_growth_qp_oracle(const double* x, size_t d, const rv_params* params, size_t n, double* out);
/* Rank coordinates, any d >= 1. */
RV_API rv_status rv_growth_qp_ranked(const double* ranked_x, const double* a, const double* sigma2, size_t d,
                                     size_t n, double* out);
RV_API rv_status rv_diversity_function(const double* x, size_t d, double p, double* out);
RV_API rv_status rv_excess_growth_rate(const double* x, const double* sigma2, size_t d, double p, double* out);
RV_API rv_status rv_excess_growth_lower_bound(const double* sigma2, size_t d, double p, double* out);
RV_API rv_status rv_t_star(const double* x0, size_t d, double p, const double* sigma2, double* out);

typedef enum rv_wealth_scheme { RV_WEALTH_ARITHMETIC = 0, RV_WEALTH_LOG_EULER = 1 } rv_wealth_scheme;

typedef struct rv_wealth rv_wealth;

RV_API rv_status rv_wealth_path(const rv_trajectory* t, const rv_rule* rule, const rv_params* params,
                                rv_wealth_scheme scheme, rv_wealth** out);
RV_API size_t rv_wealth_n(const rv_wealth* w);
RV_API double rv_wealth_max_abs_step_return(const rv_wealth* w);
/* Each output n entries (any may be NULL). */
RV_API void rv_wealth_get(const rv_wealth* w, double* times, double* log_wealth, double* log_relative);
RV_API rv_status rv_wealth_to_csv(const rv_wealth* w, char** out);
RV_API void rv_wealth_free(rv_wealth* w);

typedef enum rv_generator {
  RV_GENERATOR_DIVERSITY = 0,
  RV_GENERATOR_GROWTH_CLOSED = 1,
  RV_GENERATOR_GROWTH_OPEN = 2
} rv_generator;

typedef struct rv_fgp rv_fgp;

RV_API rv_status rv_fgp_decompose(const rv_trajectory* t, const rv_rule* rule, rv_generator generator,
                                  const rv_params* params, rv_fgp** out);
RV_API size_t rv_fgp_n(const rv_fgp* f);
RV_API int rv_fgp_gamma_is_residual(const rv_fgp* f);
/* Each output n entries (any may be NULL). */
RV_API void rv_fgp_get(const rv_fgp* f, double* log_relative, double* log_g_change, double* gamma,
                       double* residual);
RV_API rv_status rv_fgp_to_csv(const rv_fgp* f, char** out);
RV_API void rv_fgp_free(rv_fgp* f);

/* CSV of rank,name,x,weight for a weight snapshot (d entries each). */
RV_API rv_status rv_weights_csv(const double* x, const double* weights, size_t d, char** out);

/* ---- report ----------------------------------------------------------- */

typedef struct rv_report_options {
  const double* lambdas;
  size_t n_lambdas;
  const double* grid;
  size_t n_grid;
  rv_sweep_options sweep;
  double p;
  size_t n_open;
  size_t weight_ranks;
} rv_report_options;

RV_API rv_report_options rv_report_options_default(void);
/* Writes the figure-data files into out_dir (which must exist). out_of_sample
 * may be NULL. If names is not NULL it receives a newline-separated list of
 * the files written. */
RV_API rv_status rv_report(const rv_panel* in_sample, const rv_panel* out_of_sample,
                           const rv_report_options* options, const char* out_dir, char** names);

#ifdef __cplusplus
}
#endif

#endif
