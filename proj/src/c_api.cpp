#include "rankvol/rankvol.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <optional>
#include <string>

#include "rankvol/calibration.hpp"
#include "rankvol/estimators.hpp"
#include "rankvol/market_model.hpp"
#include "rankvol/panel.hpp"
#include "rankvol/portfolios.hpp"
#include "rankvol/report.hpp"
#include "rankvol/simulator.hpp"
#include "rankvol/trajectory_io.hpp"

#ifndef RANKVOL_VERSION
#define RANKVOL_VERSION "0.0.0"
#endif

struct rv_params {
  rankvol::ModelParams v;
};
struct rv_trajectory {
  rankvol::Trajectory v;
};
struct rv_moments {
  rankvol::StationaryMoments v;
};
struct rv_panel {
  rankvol::PanelData v;
};
struct rv_estimates {
  rankvol::EstimateSet v;
};
struct rv_calibration {
  rankvol::CalibrationResult v;
};
struct rv_fit_report {
  rankvol::FitReport v;
};
struct rv_sweep {
  rankvol::SweepTable v;
};
struct rv_wealth {
  rankvol::WealthPath v;
};
struct rv_fgp {
  rankvol::FgpDecomposition v;
};

namespace {

using namespace rankvol;

thread_local std::string last_error;

rv_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return RV_ERR_INVALID_INPUT;
    case ErrorCode::numerical_blowup: return RV_ERR_NUMERICAL;
    case ErrorCode::data_quality: return RV_ERR_DATA_QUALITY;
    case ErrorCode::inconsistent_inputs: return RV_ERR_INCONSISTENT;
    case ErrorCode::undefined_horizon: return RV_ERR_UNDEFINED_HORIZON;
    case ErrorCode::bankruptcy: return RV_ERR_BANKRUPTCY;
    case ErrorCode::io: return RV_ERR_IO;
  }
  return RV_ERR_INTERNAL;
}

template <class F>
rv_status guard(F&& f) noexcept {
  try {
    f();
    return RV_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return RV_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return RV_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return RV_ERR_INTERNAL;
  }
}

template <class T>
const T& need(const T* p, const char* what) {
  if (p == nullptr) fail(ErrorCode::invalid_input, std::string(what) + " is NULL");
  return *p;
}

void need_out(const void* p) {
  if (p == nullptr) fail(ErrorCode::invalid_input, "output pointer is NULL");
}

void need_array(const void* p, const char* what) {
  if (p == nullptr) fail(ErrorCode::invalid_input, std::string(what) + " is NULL");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void copy_out(const std::vector<double>& v, double* out) {
  if (out != nullptr) std::copy(v.begin(), v.end(), out);
}

std::span<const double> view(const double* p, std::size_t n) { return {p, n}; }

// NULL start means the uniform vector.
std::vector<double> start_or_uniform(const double* x0, std::size_t d) {
  if (x0) return {x0, x0 + d};
  return std::vector<double>(d, 1.0 / static_cast<double>(d));
}

SimConfig to_config(const rv_sim_config* c) {
  const rv_sim_config& cfg = need(c, "simulation config");
  SimConfig s;
  s.dt = cfg.dt;
  s.substeps_per_sample = cfg.substeps_per_sample;
  s.horizon = cfg.horizon;
  s.n_paths = cfg.n_paths;
  s.seed = cfg.seed;
  s.floor_eps = cfg.floor_eps;
  if (cfg.top_m != 0) s.top_m = cfg.top_m;
  return s;
}

DelistingPolicy to_policy(rv_delisting p) {
  return p == RV_DELISTING_STRICT ? DelistingPolicy::strict : DelistingPolicy::drop;
}

MomentMode to_mode(rv_moment_mode m) {
  return m == RV_MOMENTS_TAIL_AVERAGE ? MomentMode::tail_average : MomentMode::terminal;
}

PortfolioRule to_rule(const rv_rule* r) {
  const rv_rule& rule = need(r, "portfolio rule");
  PortfolioRule out;
  switch (rule.kind) {
    case RV_RULE_MARKET: out.kind = RuleKind::market; break;
    case RV_RULE_DIVERSITY: out.kind = RuleKind::diversity; break;
    case RV_RULE_GROWTH_CLOSED: out.kind = RuleKind::growth_closed; break;
    case RV_RULE_GROWTH_OPEN: out.kind = RuleKind::growth_open; break;
    case RV_RULE_LARGE_CAP: out.kind = RuleKind::large_cap; break;
    default: fail(ErrorCode::invalid_input, "unknown portfolio rule kind");
  }
  out.p = rule.p;
  out.n_open = rule.n_open;
  out.k_top = rule.k_top;
  return out;
}

rv_rule from_rule(const PortfolioRule& r) {
  rv_rule out{};
  switch (r.kind) {
    case RuleKind::market: out.kind = RV_RULE_MARKET; break;
    case RuleKind::diversity: out.kind = RV_RULE_DIVERSITY; break;
    case RuleKind::growth_closed: out.kind = RV_RULE_GROWTH_CLOSED; break;
    case RuleKind::growth_open: out.kind = RV_RULE_GROWTH_OPEN; break;
    case RuleKind::large_cap: out.kind = RV_RULE_LARGE_CAP; break;
  }
  out.p = r.p;
  out.n_open = r.n_open;
  out.k_top = r.k_top;
  return out;
}

SweepOptions to_sweep(const rv_sweep_options* o) {
  const rv_sweep_options& opt = need(o, "sweep options");
  SweepOptions s;
  s.sim = to_config(&opt.sim);
  s.estimator.smoothing_window = opt.smoothing_window;
  s.estimator.delisting = to_policy(opt.policy);
  s.top_n = opt.top_n;
  s.mode = to_mode(opt.mode);
  s.tail_fraction = opt.tail_fraction;
  return s;
}

rv_sim_config from_config(const SimConfig& s) {
  return rv_sim_config{s.dt, s.substeps_per_sample, s.horizon, s.n_paths, s.seed, s.floor_eps, s.top_m.value_or(0)};
}

const ModelParams* optional_params(const rv_params* p) { return p ? &p->v : nullptr; }

}  // namespace

extern "C" {

const char* rv_version(void) { return RANKVOL_VERSION; }

const char* rv_last_error(void) { return last_error.c_str(); }

const char* rv_status_name(rv_status status) {
  switch (status) {
    case RV_OK: return "ok";
    case RV_ERR_INVALID_INPUT: return "invalid_input";
    case RV_ERR_NUMERICAL: return "numerical_blowup";
    case RV_ERR_DATA_QUALITY: return "data_quality";
    case RV_ERR_INCONSISTENT: return "inconsistent_inputs";
    case RV_ERR_UNDEFINED_HORIZON: return "undefined_horizon";
    case RV_ERR_BANKRUPTCY: return "bankruptcy";
    case RV_ERR_IO: return "io";
    case RV_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void rv_string_free(char* s) { std::free(s); }

// ---- model parameters ----------------------------------------------------

rv_status rv_params_create(const double* a, const double* sigma2, size_t d, rv_params** out) {
  return guard([&] {
    need_out(out);
    need_array(a, "a");
    need_array(sigma2, "sigma2");
    *out = new rv_params{ModelParams({a, a + d}, {sigma2, sigma2 + d})};
  });
}

rv_status rv_params_from_json(const char* json, rv_params** out) {
  return guard([&] {
    need_out(out);
    need_array(json, "json");
    *out = new rv_params{ModelParams::from_json(json)};
  });
}

rv_status rv_params_load(const char* path, rv_params** out) {
  return guard([&] {
    need_out(out);
    need_array(path, "path");
    *out = new rv_params{ModelParams::load(path)};
  });
}

rv_status rv_params_save(const rv_params* p, const char* path) {
  return guard([&] {
    need_array(path, "path");
    need(p, "params").v.save(path);
  });
}

rv_status rv_params_to_json(const rv_params* p, char** out) {
  return guard([&] {
    need_out(out);
    *out = copy_string(need(p, "params").v.to_json());
  });
}

size_t rv_params_d(const rv_params* p) { return p ? p->v.d() : 0; }

double rv_params_lambda(const rv_params* p) { return p ? p->v.lambda() : 0.0; }

void rv_params_get(const rv_params* p, double* a, double* sigma2) {
  if (!p) return;
  copy_out(p->v.a(), a);
  copy_out(p->v.sigma2(), sigma2);
}

rv_status rv_feller_check(const rv_params* p, double* margins, int* satisfied) {
  return guard([&] {
    const FellerReport r = feller_check(need(p, "params").v);
    copy_out(r.margins, margins);
    if (satisfied) *satisfied = r.satisfied ? 1 : 0;
  });
}

void rv_params_free(rv_params* p) { delete p; }

// ---- simulation ------------------------------------------------------------

rv_sim_config rv_sim_config_default(void) { return from_config(SimConfig{}); }

rv_sim_config rv_moment_config_default(void) { return from_config(moment_config()); }

rv_status rv_step_weights(const rv_params* p, const double* x, double dt, const double* noise, double floor_eps,
                          double* x_out, double* log_total_cap) {
  return guard([&] {
    const ModelParams& prm = need(p, "params").v;
    need_array(x, "x");
    need_array(noise, "noise");
    need_out(x_out);
    MarketState state{0.0, {x, x + prm.d()}, log_total_cap ? *log_total_cap : 0.0};
    const MarketState next = step_weights(state, prm, dt, view(noise, prm.d()), floor_eps);
    std::copy(next.x.begin(), next.x.end(), x_out);
    if (log_total_cap) *log_total_cap = next.log_total_cap;
  });
}

rv_status rv_simulate_path(const rv_params* p, const double* x0, const rv_sim_config* cfg, uint64_t path_index,
                           rv_trajectory** out) {
  return guard([&] {
    need_out(out);
    const ModelParams& prm = need(p, "params").v;
    *out = new rv_trajectory{simulate_path(prm, start_or_uniform(x0, prm.d()), to_config(cfg), path_index)};
  });
}

rv_status rv_simulate_driven(const rv_params* p, const double* x0, const rv_sim_config* cfg, const double* dw,
                             size_t n_dw, rv_trajectory** out) {
  return guard([&] {
    need_out(out);
    const ModelParams& prm = need(p, "params").v;
    need_array(dw, "dw");
    *out = new rv_trajectory{simulate_driven(prm, start_or_uniform(x0, prm.d()), to_config(cfg), view(dw, n_dw))};
  });
}

rv_status rv_brownian_increments(uint64_t seed, uint64_t path_index, size_t d, size_t n_steps, double dt,
                                 double* out) {
  return guard([&] {
    need_out(out);
    copy_out(brownian_increments(seed, path_index, d, n_steps, dt), out);
  });
}

rv_status rv_coarsen_increments(const double* dw, size_t n_dw, size_t d, size_t factor, double* out) {
  return guard([&] {
    need_array(dw, "dw");
    need_out(out);
    copy_out(coarsen_increments(view(dw, n_dw), d, factor), out);
  });
}

size_t rv_trajectory_d(const rv_trajectory* t) { return t ? t->v.d : 0; }
size_t rv_trajectory_n_samples(const rv_trajectory* t) { return t ? t->v.n_samples() : 0; }
size_t rv_trajectory_clamp_events(const rv_trajectory* t) { return t ? t->v.clamp_events : 0; }

void rv_trajectory_get(const rv_trajectory* t, double* times, double* weights, double* log_total_cap) {
  if (!t) return;
  copy_out(t->v.times, times);
  copy_out(t->v.weights, weights);
  copy_out(t->v.log_total_cap, log_total_cap);
}

rv_status rv_trajectory_ranked(const rv_trajectory* t, size_t i, double* ranked) {
  return guard([&] {
    const Trajectory& traj = need(t, "trajectory").v;
    need_out(ranked);
    require(i < traj.n_samples(), "sample index out of range");
    for (std::size_t k = 0; k < traj.d; ++k) ranked[k] = traj.ranked_weight(i, k);
  });
}

rv_status rv_trajectory_save(const rv_trajectory* t, const char* path) {
  return guard([&] {
    need_array(path, "path");
    save_trajectory(need(t, "trajectory").v, path);
  });
}

rv_status rv_trajectory_load(const char* path, rv_trajectory** out) {
  return guard([&] {
    need_out(out);
    need_array(path, "path");
    *out = new rv_trajectory{load_trajectory(path)};
  });
}

rv_status rv_trajectory_write_csv(const rv_trajectory* t, const char* path) {
  return guard([&] {
    need_array(path, "path");
    write_trajectory_csv(need(t, "trajectory").v, path);
  });
}

rv_status rv_trajectory_read_csv(const char* path, rv_trajectory** out) {
  return guard([&] {
    need_out(out);
    need_array(path, "path");
    *out = new rv_trajectory{read_trajectory_csv(path)};
  });
}

void rv_trajectory_free(rv_trajectory* t) { delete t; }

rv_status rv_stationary_moments(const rv_params* p, const rv_sim_config* cfg, const double* x0, rv_moment_mode mode,
                                double tail_fraction, rv_moments** out) {
  return guard([&] {
    need_out(out);
    const ModelParams& prm = need(p, "params").v;
    std::span<const double> start;
    if (x0) start = view(x0, prm.d());
    *out = new rv_moments{stationary_moments(prm, to_config(cfg), start, to_mode(mode), tail_fraction)};
  });
}

size_t rv_moments_d(const rv_moments* m) { return m ? m->v.mu.size() : 0; }
size_t rv_moments_n_paths(const rv_moments* m) { return m ? m->v.n_paths : 0; }
size_t rv_moments_clamp_events(const rv_moments* m) { return m ? m->v.clamp_events : 0; }

void rv_moments_get(const rv_moments* m, double* mu, double* rho, double* mu_stderr, double* rho_stderr) {
  if (!m) return;
  copy_out(m->v.mu, mu);
  copy_out(m->v.rho, rho);
  copy_out(m->v.mu_stderr, mu_stderr);
  copy_out(m->v.rho_stderr, rho_stderr);
}

void rv_moments_free(rv_moments* m) { delete m; }

// ---- panels ------------------------------------------------------------------

rv_status rv_panel_ingest_csv(const char* path, size_t d, rv_clock clock, rv_panel** out) {
  return guard([&] {
    need_out(out);
    need_array(path, "path");
    std::size_t rejected = 0;
    const auto rows = read_panel_csv(path, &rejected);
    IngestOptions opt;
    opt.d = d;
    opt.clock = clock == RV_CLOCK_CALENDAR ? PanelClock::calendar : PanelClock::trading_days;
    PanelData panel = ingest_panel(rows, opt);
    panel.rejected_rows = rejected;
    *out = new rv_panel{std::move(panel)};
  });
}

rv_status rv_panel_from_trajectory(const rv_trajectory* t, double cap_scale, rv_panel** out) {
  return guard([&] {
    need_out(out);
    *out = new rv_panel{panel_from_trajectory(need(t, "trajectory").v, cap_scale)};
  });
}

rv_status rv_panel_load(const char* path, rv_panel** out) {
  return guard([&] {
    need_out(out);
    need_array(path, "path");
    *out = new rv_panel{PanelData::load(path)};
  });
}

rv_status rv_panel_save(const rv_panel* p, const char* path) {
  return guard([&] {
    need_array(path, "path");
    need(p, "panel").v.save(path);
  });
}

rv_status rv_panel_write_csv(const rv_panel* p, const char* path) {
  return guard([&] {
    need_array(path, "path");
    need(p, "panel").v.write_csv(path);
  });
}

rv_status rv_panel_sidecar_json(const rv_panel* p, char** out) {
  return guard([&] {
    need_out(out);
    *out = copy_string(need(p, "panel").v.sidecar_json());
  });
}

size_t rv_panel_d(const rv_panel* p) { return p ? p->v.d : 0; }
size_t rv_panel_n_dates(const rv_panel* p) { return p ? p->v.n_dates() : 0; }
size_t rv_panel_rejected_rows(const rv_panel* p) { return p ? p->v.rejected_rows : 0; }
double rv_panel_span_years(const rv_panel* p) { return p && p->v.n_dates() > 0 ? p->v.span_years() : 0.0; }

rv_status rv_panel_ranked_weights(const rv_panel* p, size_t i, double* out) {
  return guard([&] {
    const PanelData& panel = need(p, "panel").v;
    need_out(out);
    require(i < panel.n_dates(), "date index out of range");
    copy_out(panel.ranked_weights(i), out);
  });
}

rv_status rv_panel_slice(const rv_panel* p, size_t first, size_t last, rv_panel** out) {
  return guard([&] {
    need_out(out);
    *out = new rv_panel{slice_panel(need(p, "panel").v, first, last)};
  });
}

void rv_panel_free(rv_panel* p) { delete p; }

// ---- estimators --------------------------------------------------------------

rv_status rv_estimate(const rv_panel* panel, size_t smoothing_window, rv_delisting policy, rv_estimates** out) {
  return guard([&] {
    need_out(out);
    EstimatorOptions opt;
    opt.smoothing_window = smoothing_window;
    opt.delisting = to_policy(policy);
    *out = new rv_estimates{estimate_all(need(panel, "panel").v, opt)};
  });
}

size_t rv_estimates_d(const rv_estimates* e) { return e ? e->v.d : 0; }

rv_status rv_estimates_get(const rv_estimates* e, rv_field field, double* out) {
  return guard([&] {
    const EstimateSet& es = need(e, "estimates").v;
    need_out(out);
    switch (field) {
      case RV_FIELD_SIGMA2_RAW: copy_out(es.sigma2_raw, out); return;
      case RV_FIELD_SIGMA2: copy_out(es.sigma2, out); return;
      case RV_FIELD_PHIBAR: copy_out(es.phibar, out); return;
      case RV_FIELD_PHI: copy_out(es.phi, out); return;
      case RV_FIELD_MU: copy_out(es.mu, out); return;
      case RV_FIELD_RHO: copy_out(es.rho, out); return;
      case RV_FIELD_A:
        if (!es.a) fail(ErrorCode::invalid_input, "growth parameters are only set after a lambda is chosen");
        copy_out(*es.a, out);
        return;
    }
    fail(ErrorCode::invalid_input, "unknown estimate field");
  });
}

void rv_estimates_lambda_hat(const rv_estimates* e, double* arithmetic, double* log_growth) {
  if (!e) return;
  if (arithmetic) *arithmetic = e->v.lambda_hat.arithmetic;
  if (log_growth) *log_growth = e->v.lambda_hat.log_growth;
}

size_t rv_estimates_warning_count(const rv_estimates* e) { return e ? e->v.warnings.size() : 0; }

rv_status rv_estimates_to_csv(const rv_estimates* e, char** out) {
  return guard([&] {
    need_out(out);
    *out = copy_string(need(e, "estimates").v.to_csv());
  });
}

rv_status rv_estimates_header_json(const rv_estimates* e, char** out) {
  return guard([&] {
    need_out(out);
    *out = copy_string(need(e, "estimates").v.header_json());
  });
}

void rv_estimates_free(rv_estimates* e) { delete e; }

rv_status rv_sigma2_ranked_variant(const rv_panel* panel, rv_delisting policy, double* out) {
  return guard([&] {
    need_out(out);
    copy_out(sigma2_hat_ranked_variant(need(panel, "panel").v, to_policy(policy)), out);
  });
}

rv_status rv_name_change_share(const rv_panel* panel, double* out) {
  return guard([&] {
    need_out(out);
    copy_out(name_change_share(need(panel, "panel").v), out);
  });
}

rv_status rv_smooth_uniform(const double* v, size_t n, size_t window, double* out) {
  return guard([&] {
    need_array(v, "v");
    need_out(out);
    copy_out(smooth_uniform(view(v, n), window), out);
  });
}

rv_status rv_phi_hat(const double* phibar, size_t d, double* out) {
  return guard([&] {
    need_array(phibar, "phibar");
    need_out(out);
    copy_out(phi_hat(view(phibar, d)), out);
  });
}

rv_status rv_a_hat(const double* mu, const double* rho, const double* phi, const double* sigma2, size_t d,
                   double lambda, double* out) {
  return guard([&] {
    need_array(mu, "mu");
    need_array(rho, "rho");
    need_array(phi, "phi");
    need_array(sigma2, "sigma2");
    need_out(out);
    copy_out(a_hat(view(mu, d), view(rho, d), view(phi, d), view(sigma2, d), lambda), out);
  });
}

rv_status rv_leakage_check(const rv_panel* panel, size_t k, rv_leakage* out) {
  return guard([&] {
    need_out(out);
    const LeakageCheck c = leakage_check(need(panel, "panel").v, k);
    *out = rv_leakage{c.lhs, c.rhs, c.boundary, c.relative_wealth_drift};
  });
}

// ---- calibration ---------------------------------------------------------------

rv_status rv_calibrate(const rv_panel* panel, double lambda, size_t smoothing_window, rv_delisting policy,
                       rv_calibration** out) {
  return guard([&] {
    need_out(out);
    EstimatorOptions opt;
    opt.smoothing_window = smoothing_window;
    opt.delisting = to_policy(policy);
    *out = new rv_calibration{calibrate(need(panel, "panel").v, lambda, opt)};
  });
}

rv_status rv_calibrate_estimates(const rv_estimates* e, double lambda, rv_calibration** out) {
  return guard([&] {
    need_out(out);
    *out = new rv_calibration{calibrate(need(e, "estimates").v, lambda)};
  });
}

rv_status rv_calibration_params(const rv_calibration* c, rv_params** out) {
  return guard([&] {
    need_out(out);
    *out = new rv_params{need(c, "calibration").v.params};
  });
}

rv_status rv_calibration_estimates(const rv_calibration* c, rv_estimates** out) {
  return guard([&] {
    need_out(out);
    *out = new rv_estimates{need(c, "calibration").v.estimates};
  });
}

int rv_calibration_feller_satisfied(const rv_calibration* c) { return c && c->v.feller.satisfied ? 1 : 0; }

rv_status rv_calibration_to_json(const rv_calibration* c, char** out) {
  return guard([&] {
    need_out(out);
    *out = copy_string(need(c, "calibration").v.to_json());
  });
}

void rv_calibration_free(rv_calibration* c) { delete c; }

rv_status rv_implied_phi(const rv_params* p, const double* mu, const double* rho, double* out) {
  return guard([&] {
    const ModelParams& prm = need(p, "params").v;
    need_array(mu, "mu");
    need_array(rho, "rho");
    need_out(out);
    copy_out(implied_phi(prm, view(mu, prm.d()), view(rho, prm.d())), out);
  });
}

rv_status rv_fit(const rv_calibration* c, const rv_moments* m, size_t top_n, rv_fit_report** out) {
  return guard([&] {
    need_out(out);
    *out = new rv_fit_report{fit_report(need(c, "calibration").v, need(m, "moments").v, top_n)};
  });
}

void rv_fit_get_summary(const rv_fit_report* f, rv_fit_summary* out) {
  if (!f || !out) return;
  const FitReport& r = f->v;
  *out = rv_fit_summary{r.top_n, r.l2_collision, r.l2_cdc, r.l2_collision_se, r.l2_cdc_se, r.max_identity_residual()};
}

rv_status rv_fit_get(const rv_fit_report* f, rv_fit_field field, double* out) {
  return guard([&] {
    const FitReport& r = need(f, "fit report").v;
    need_out(out);
    switch (field) {
      case RV_FIT_MU_MODEL: copy_out(r.mu_model, out); return;
      case RV_FIT_PHI_MODEL: copy_out(r.phi_model, out); return;
      case RV_FIT_MU_STDERR: copy_out(r.mu_stderr, out); return;
      case RV_FIT_PHI_STDERR: copy_out(r.phi_stderr, out); return;
      case RV_FIT_NORM_COLLISION_ERR: copy_out(r.norm_collision_err, out); return;
      case RV_FIT_NORM_CDC_ERR: copy_out(r.norm_cdc_err, out); return;
      case RV_FIT_IDENTITY_RESIDUAL: copy_out(r.identity_residual, out); return;
      case RV_FIT_APPROXIMATION_RESIDUAL: copy_out(r.approximation_residual, out); return;
    }
    fail(ErrorCode::invalid_input, "unknown fit field");
  });
}

rv_status rv_fit_to_csv(const rv_fit_report* f, char** out) {
  return guard([&] {
    need_out(out);
    *out = copy_string(need(f, "fit report").v.to_csv());
  });
}

rv_status rv_fit_to_json(const rv_fit_report* f, char** out) {
  return guard([&] {
    need_out(out);
    *out = copy_string(need(f, "fit report").v.to_json());
  });
}

void rv_fit_free(rv_fit_report* f) { delete f; }

rv_sweep_options rv_sweep_options_default(void) {
  const SweepOptions s;
  rv_sweep_options o{};
  o.sim = from_config(s.sim);
  o.smoothing_window = s.estimator.smoothing_window;
  o.policy = RV_DELISTING_DROP;
  o.top_n = s.top_n;
  o.mode = s.mode == MomentMode::tail_average ? RV_MOMENTS_TAIL_AVERAGE : RV_MOMENTS_TERMINAL;
  o.tail_fraction = s.tail_fraction;
  return o;
}

void rv_default_lambda_grid(double* out) { copy_out(default_lambda_grid(), out); }

rv_status rv_lambda_sweep(const rv_panel* panel, const double* grid, size_t n_grid, const rv_sweep_options* options,
                          rv_sweep** out) {
  return guard([&] {
    need_out(out);
    need_array(grid, "grid");
    *out = new rv_sweep{lambda_sweep(need(panel, "panel").v, view(grid, n_grid), to_sweep(options))};
  });
}

size_t rv_sweep_n_rows(const rv_sweep* s) { return s ? s->v.rows.size() : 0; }

rv_status rv_sweep_row_get(const rv_sweep* s, size_t i, rv_sweep_row* out) {
  return guard([&] {
    const SweepTable& t = need(s, "sweep").v;
    need_out(out);
    require(i < t.rows.size(), "sweep row index out of range");
    const SweepRow& r = t.rows[i];
    *out = rv_sweep_row{r.lambda,    r.ok ? 1 : 0,          r.l2_collision,         r.l2_cdc,
                        r.l2_collision_se, r.l2_cdc_se, r.max_identity_residual, r.feller_satisfied ? 1 : 0,
                        r.error.c_str()};
  });
}

void rv_sweep_diagnostics(const rv_sweep* s, double tolerance_se, int* cdc_non_increasing,
                          int* collision_non_decreasing) {
  if (!s) return;
  const SweepDiagnostics d = s->v.diagnostics(tolerance_se);
  if (cdc_non_increasing) *cdc_non_increasing = d.cdc_non_increasing ? 1 : 0;
  if (collision_non_decreasing) *collision_non_decreasing = d.collision_non_decreasing ? 1 : 0;
}

rv_status rv_sweep_to_csv(const rv_sweep* s, char** out) {
  return guard([&] {
    need_out(out);
    *out = copy_string(need(s, "sweep").v.to_csv());
  });
}

rv_status rv_sweep_to_json(const rv_sweep* s, char** out) {
  return guard([&] {
    need_out(out);
    *out = copy_string(need(s, "sweep").v.to_json());
  });
}

void rv_sweep_free(rv_sweep* s) { delete s; }

rv_status rv_out_of_sample_errors(const double* in_errors, const double* phi_hat_in, const double* phi_hat_out,
                                  const double* mu_hat_in, size_t n, double* out) {
  return guard([&] {
    need_array(in_errors, "in_errors");
    need_array(phi_hat_in, "phi_hat_in");
    need_array(phi_hat_out, "phi_hat_out");
    need_array(mu_hat_in, "mu_hat_in");
    need_out(out);
    copy_out(out_of_sample_errors(view(in_errors, n), view(phi_hat_in, n), view(phi_hat_out, n), view(mu_hat_in, n)),
             out);
  });
}

// ---- portfolios ----------------------------------------------------------------

rv_status rv_rule_from_json(const char* json, rv_rule* out) {
  return guard([&] {
    need_out(out);
    need_array(json, "json");
    *out = from_rule(PortfolioRule::from_json(json));
  });
}

rv_status rv_rule_to_json(const rv_rule* rule, char** out) {
  return guard([&] {
    need_out(out);
    *out = copy_string(to_rule(rule).to_json());
  });
}

rv_status rv_portfolio_weights(const rv_rule* rule, const double* x, size_t d, const rv_params* params, double* out) {
  return guard([&] {
    need_array(x, "x");
    need_out(out);
    copy_out(weights(to_rule(rule), view(x, d), optional_params(params)), out);
  });
}

rv_status rv_growth_qp_oracle(const double* x, size_t d, const rv_params* params, size_t n, double* out) {
  return guard([&] {
    need_array(x, "x");
    need_out(out);
    copy_out(growth_optimal_qp_oracle(view(x, d), need(params, "params").v, n), out);
  });
}

rv_status rv_growth_qp_ranked(const double* ranked_x, const double* a, const double* sigma2, size_t d, size_t n,
                              double* out) {
  return guard([&] {
    need_array(ranked_x, "ranked_x");
    need_array(a, "a");
    need_array(sigma2, "sigma2");
    need_out(out);
    copy_out(growth_optimal_qp_ranked(view(ranked_x, d), view(a, d), view(sigma2, d), n), out);
  });
}

rv_status rv_diversity_function(const double* x, size_t d, double p, double* out) {
  return guard([&] {
    need_array(x, "x");
    need_out(out);
    *out = diversity_function(view(x, d), p);
  });
}

rv_status rv_excess_growth_rate(const double* x, const double* sigma2, size_t d, double p, double* out) {
  return guard([&] {
    need_array(x, "x");
    need_array(sigma2, "sigma2");
    need_out(out);
    *out = excess_growth_rate(view(x, d), view(sigma2, d), p);
  });
}

rv_status rv_excess_growth_lower_bound(const double* sigma2, size_t d, double p, double* out) {
  return guard([&] {
    need_array(sigma2, "sigma2");
    need_out(out);
    *out = excess_growth_lower_bound(view(sigma2, d), p);
  });
}

rv_status rv_t_star(const double* x0, size_t d, double p, const double* sigma2, double* out) {
  return guard([&] {
    need_array(x0, "x0");
    need_array(sigma2, "sigma2");
    need_out(out);
    *out = t_star(view(x0, d), p, view(sigma2, d));
  });
}

rv_status rv_wealth_path(const rv_trajectory* t, const rv_rule* rule, const rv_params* params,
                         rv_wealth_scheme scheme, rv_wealth** out) {
  return guard([&] {
    need_out(out);
    const WealthScheme s = scheme == RV_WEALTH_LOG_EULER ? WealthScheme::log_euler : WealthScheme::arithmetic;
    *out = new rv_wealth{wealth_path(need(t, "trajectory").v, to_rule(rule), optional_params(params), s)};
  });
}

size_t rv_wealth_n(const rv_wealth* w) { return w ? w->v.times.size() : 0; }
double rv_wealth_max_abs_step_return(const rv_wealth* w) { return w ? w->v.max_abs_step_return : 0.0; }

void rv_wealth_get(const rv_wealth* w, double* times, double* log_wealth, double* log_relative) {
  if (!w) return;
  copy_out(w->v.times, times);
  copy_out(w->v.log_wealth, log_wealth);
  copy_out(w->v.log_relative, log_relative);
}

rv_status rv_wealth_to_csv(const rv_wealth* w, char** out) {
  return guard([&] {
    need_out(out);
    *out = copy_string(need(w, "wealth path").v.to_csv());
  });
}

void rv_wealth_free(rv_wealth* w) { delete w; }

rv_status rv_fgp_decompose(const rv_trajectory* t, const rv_rule* rule, rv_generator generator,
                           const rv_params* params, rv_fgp** out) {
  return guard([&] {
    need_out(out);
    GeneratorKind g = GeneratorKind::diversity;
    if (generator == RV_GENERATOR_GROWTH_CLOSED) g = GeneratorKind::growth_closed;
    else if (generator == RV_GENERATOR_GROWTH_OPEN) g = GeneratorKind::growth_open;
    else require(generator == RV_GENERATOR_DIVERSITY, "unknown generator");
    *out = new rv_fgp{fgp_decompose(need(t, "trajectory").v, to_rule(rule), g, optional_params(params))};
  });
}

size_t rv_fgp_n(const rv_fgp* f) { return f ? f->v.times.size() : 0; }
int rv_fgp_gamma_is_residual(const rv_fgp* f) { return f && f->v.gamma_is_residual ? 1 : 0; }

void rv_fgp_get(const rv_fgp* f, double* log_relative, double* log_g_change, double* gamma, double* residual) {
  if (!f) return;
  copy_out(f->v.log_relative, log_relative);
  copy_out(f->v.log_g_change, log_g_change);
  copy_out(f->v.gamma, gamma);
  copy_out(f->v.residual, residual);
}

rv_status rv_fgp_to_csv(const rv_fgp* f, char** out) {
  return guard([&] {
    need_out(out);
    *out = copy_string(need(f, "decomposition").v.to_csv());
  });
}

void rv_fgp_free(rv_fgp* f) { delete f; }

rv_status rv_weights_csv(const double* x, const double* w, size_t d, char** out) {
  return guard([&] {
    need_array(x, "x");
    need_array(w, "weights");
    need_out(out);
    *out = copy_string(weights_csv(view(x, d), view(w, d)));
  });
}

// ---- report ----------------------------------------------------------------------

rv_report_options rv_report_options_default(void) {
  static const double lambdas[] = {0.0, 0.11, 0.2};
  const ReportOptions r;
  rv_report_options o{};
  o.lambdas = lambdas;
  o.n_lambdas = 3;
  o.grid = nullptr;
  o.n_grid = 0;
  o.sweep = rv_sweep_options_default();
  o.p = r.p;
  o.n_open = r.n_open;
  o.weight_ranks = r.weight_ranks;
  return o;
}

rv_status rv_report(const rv_panel* in_sample, const rv_panel* out_of_sample, const rv_report_options* options,
                    const char* out_dir, char** names) {
  return guard([&] {
    const rv_report_options& o = need(options, "report options");
    need_array(out_dir, "out_dir");
    ReportOptions r;
    if (o.n_lambdas > 0) {
      need_array(o.lambdas, "lambdas");
      r.lambdas.assign(o.lambdas, o.lambdas + o.n_lambdas);
    }
    if (o.n_grid > 0) {
      need_array(o.grid, "grid");
      r.grid.assign(o.grid, o.grid + o.n_grid);
    }
    r.sweep = to_sweep(&o.sweep);
    r.p = o.p;
    r.n_open = o.n_open;
    r.weight_ranks = o.weight_ranks;
    const auto files =
        build_report(need(in_sample, "in-sample panel").v, out_of_sample ? &out_of_sample->v : nullptr, r);
    const std::filesystem::path dir(out_dir);
    if (!std::filesystem::is_directory(dir)) fail(ErrorCode::io, std::string("not a directory: ") + out_dir);
    std::string list;
    for (const auto& f : files) {
      const auto path = dir / f.name;
      std::ofstream out(path, std::ios::binary);
      out << f.content;
      if (!out) fail(ErrorCode::io, "cannot write " + path.string());
      list += f.name + "\n";
    }
    if (names) *names = copy_string(list);
  });
}

}  // extern "C"
