#include "rankvol/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"

namespace rankvol {

namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("calibrate/") + name + ": " + e.what());
  }
}

double sum_squares(std::span<const double> v, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += v[k] * v[k];
  return s;
}

}  // namespace

CalibrationResult calibrate(const EstimateSet& estimates, double lambda) {
  require(std::isfinite(lambda), "calibrate: lambda must be finite");
  EstimateSet es = estimates;
  es.lambda = lambda;
  es.a = stage("a_hat", [&] { return a_hat(es.mu, es.rho, es.phi, es.sigma2, lambda); });
  ModelParams params = stage("assemble", [&] { return ModelParams(*es.a, es.sigma2); });
  FellerReport feller = feller_check(params);
  std::vector<std::string> warnings = es.warnings;
  if (!feller.satisfied) {
    std::ostringstream msg;
    msg << "Feller condition fails at rank(s):";
    for (std::size_t j = 0; j < feller.margins.size(); ++j)
      if (feller.margins[j] < 0.0) msg << ' ' << (j + 2);
    warnings.push_back(msg.str());
  }
  return CalibrationResult{std::move(params), std::move(es), lambda, std::move(feller), std::move(warnings)};
}

CalibrationResult calibrate(const PanelData& panel, double lambda, const EstimatorOptions& options) {
  require(std::isfinite(lambda), "calibrate: lambda must be finite");
  stage("panel", [&] { panel.validate(); });
  EstimateSet es;
  es.d = panel.d;
  es.smoothing_window = options.smoothing_window;
  es.delisting = options.delisting;
  auto s2 = stage("sigma2_hat", [&] { return sigma2_hat(panel, options.smoothing_window, options.delisting); });
  es.sigma2_raw = std::move(s2.raw);
  es.sigma2 = std::move(s2.smoothed);
  es.sigma2_skipped = std::move(s2.skipped);
  es.warnings = std::move(s2.warnings);
  auto pb = stage("phibar_hat", [&] { return phibar_hat(panel, options.delisting); });
  es.phibar = std::move(pb.phibar);
  es.phibar_skipped = std::move(pb.skipped);
  es.phi = stage("phi_hat", [&] { return phi_hat(es.phibar); });
  auto m = stage("moment_hats", [&] { return moment_hats(panel, es.sigma2); });
  es.mu = std::move(m.mu);
  es.rho = std::move(m.rho);
  es.lambda_hat = stage("lambda_hat", [&] { return lambda_hat(panel); });
  es.first_date = panel.date_labels.front();
  es.last_date = panel.date_labels.back();
  es.span_years = panel.span_years();
  return calibrate(es, lambda);
}

std::string CalibrationResult::to_json() const {
  nlohmann::ordered_json j;
  j["lambda"] = lambda;
  j["params"] = nlohmann::ordered_json::parse(params.to_json());
  j["feller_satisfied"] = feller.satisfied;
  j["feller_margins"] = feller.margins;
  j["estimates"] = nlohmann::ordered_json::parse(estimates.header_json());
  j["warnings"] = warnings;
  return j.dump(2);
}

std::vector<double> implied_phi(const ModelParams& params, std::span<const double> mu, std::span<const double> rho) {
  const std::size_t d = params.d();
  require(mu.size() == d && rho.size() == d, "implied_phi: moments must have length d");
  const double lambda = params.lambda();
  std::vector<double> phi(d);
  for (std::size_t k = 0; k < d; ++k) phi[k] = -params.a(k) + lambda * mu[k] + params.sigma2(k) * mu[k] - rho[k];
  return phi;
}

std::vector<double> implied_phi(const ModelParams& params, const StationaryMoments& moments) {
  return implied_phi(params, moments.mu, moments.rho);
}

FitReport fit_report(const CalibrationResult& result, const StationaryMoments& moments, std::size_t top_n) {
  const ModelParams& params = result.params;
  const EstimateSet& es = result.estimates;
  const std::size_t d = params.d();
  require(moments.mu.size() == d, "fit_report: moments were computed for a different number of ranks");
  require(top_n >= 1, "fit_report: top_n must be at least 1");
  const double lambda = params.lambda();

  FitReport r;
  r.top_n = std::min(top_n, d);
  r.lambda = result.lambda;
  r.mu_hat = es.mu;
  r.phi_hat = es.phi;
  r.mu_model = moments.mu;
  r.phi_model = implied_phi(params, moments);
  r.mu_stderr = moments.mu_stderr;
  r.phi_stderr.assign(d, 0.0);
  r.norm_collision_err.resize(d);
  r.norm_cdc_err.resize(d);
  r.identity_residual.resize(d);
  r.approximation_residual.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double mh = es.mu[k];
    r.norm_collision_err[k] = (r.phi_model[k] - es.phi[k]) / mh;
    r.norm_cdc_err[k] = (moments.mu[k] - mh) / mh;
    const double cdc_term = (lambda + params.sigma2(k)) * (moments.mu[k] - mh) / mh;
    const double rho_term = (moments.rho[k] - es.rho[k]) / mh;
    r.identity_residual[k] = r.norm_collision_err[k] - (cdc_term - rho_term);
    r.approximation_residual[k] = r.norm_collision_err[k] - cdc_term;
  }
  r.l2_collision = sum_squares(r.norm_collision_err, r.top_n);
  r.l2_cdc = sum_squares(r.norm_cdc_err, r.top_n);

  const std::size_t n = moments.n_paths;
  if (n > 1 && moments.path_mu.size() == n * d) {
    // Per-path implied phi is linear in the path moments, so its standard
    // error follows from the path-wise spread.
    std::vector<double> path_phi(n * d);
    for (std::size_t p = 0; p < n; ++p) {
      auto phi = implied_phi(params, std::span<const double>(moments.path_mu.data() + p * d, d),
                             std::span<const double>(moments.path_rho.data() + p * d, d));
      std::copy(phi.begin(), phi.end(), path_phi.begin() + static_cast<std::ptrdiff_t>(p * d));
    }
    const double nn = static_cast<double>(n);
    for (std::size_t k = 0; k < d; ++k) {
      double v = 0.0;
      for (std::size_t p = 0; p < n; ++p) v += std::pow(path_phi[p * d + k] - r.phi_model[k], 2);
      r.phi_stderr[k] = std::sqrt(v / (nn - 1.0) / nn);
    }

    // Leave-one-path-out jackknife of both L2 sums.
    std::vector<double> jc(n), jm(n);
    for (std::size_t p = 0; p < n; ++p) {
      double sc = 0.0, sm = 0.0;
      for (std::size_t k = 0; k < r.top_n; ++k) {
        const double mh = es.mu[k];
        const double mu_p = (moments.mu[k] * nn - moments.path_mu[p * d + k]) / (nn - 1.0);
        const double phi_p = (r.phi_model[k] * nn - path_phi[p * d + k]) / (nn - 1.0);
        sc += std::pow((phi_p - es.phi[k]) / mh, 2);
        sm += std::pow((mu_p - mh) / mh, 2);
      }
      jc[p] = sc;
      jm[p] = sm;
    }
    auto jackknife = [&](const std::vector<double>& v) {
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / nn;
      double s = 0.0;
      for (double x : v) s += (x - mean) * (x - mean);
      return std::sqrt((nn - 1.0) / nn * s);
    };
    r.l2_collision_se = jackknife(jc);
    r.l2_cdc_se = jackknife(jm);
  }
  return r;
}

double FitReport::max_identity_residual() const {
  double m = 0.0;
  for (double v : identity_residual) m = std::max(m, std::abs(v));
  return m;
}

std::string FitReport::to_csv() const {
  using detail::format_double;
  std::ostringstream out;
  out << "rank,mu_hat,mu_model,mu_stderr,phi_hat,phi_model,phi_stderr,norm_cdc_err,norm_collision_err,"
         "identity_residual,approximation_residual\n";
  for (std::size_t k = 0; k < mu_hat.size(); ++k) {
    out << (k + 1) << ',' << format_double(mu_hat[k]) << ',' << format_double(mu_model[k]) << ','
        << format_double(mu_stderr[k]) << ',' << format_double(phi_hat[k]) << ',' << format_double(phi_model[k])
        << ',' << format_double(phi_stderr[k]) << ',' << format_double(norm_cdc_err[k]) << ','
        << format_double(norm_collision_err[k]) << ',' << format_double(identity_residual[k]) << ','
        << format_double(approximation_residual[k]) << '\n';
  }
  return out.str();
}

std::string FitReport::to_json() const {
  nlohmann::ordered_json j;
  j["lambda"] = lambda;
  j["top_n"] = top_n;
  j["l2_collision"] = l2_collision;
  j["l2_cdc"] = l2_cdc;
  j["l2_collision_se"] = l2_collision_se;
  j["l2_cdc_se"] = l2_cdc_se;
  j["max_identity_residual"] = max_identity_residual();
  j["mu_model"] = mu_model;
  j["phi_model"] = phi_model;
  j["norm_cdc_err"] = norm_cdc_err;
  j["norm_collision_err"] = norm_collision_err;
  return j.dump(2);
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid(21);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 0.25 * static_cast<double>(i) / 20.0;
  // 0.1125 moves to 0.11 so that 0, 0.11 and 0.2 are all grid points.
  grid[9] = 0.11;
  return grid;
}

std::vector<double> interior_start(std::span<const double> mu_hat) {
  std::vector<double> x(mu_hat.begin(), mu_hat.end());
  require(!x.empty(), "interior_start: empty vector");
  for (double& v : x) v = std::max(v, 1e-9);
  renormalize(x);
  return x;
}

SweepTable lambda_sweep(const EstimateSet& estimates, std::span<const double> grid, const SweepOptions& options) {
  require(!grid.empty(), "lambda_sweep: empty lambda grid");
  const std::vector<double> x0 = options.x0.empty() ? interior_start(estimates.mu) : options.x0;
  SweepTable table;
  table.top_n = std::min(options.top_n, estimates.d);
  for (double lambda : grid) {
    SweepRow row;
    row.lambda = lambda;
    try {
      const CalibrationResult cal = calibrate(estimates, lambda);
      const StationaryMoments m =
          stationary_moments(cal.params, options.sim, x0, options.mode, options.tail_fraction);
      FitReport fr = fit_report(cal, m, options.top_n);
      row.ok = true;
      row.l2_collision = fr.l2_collision;
      row.l2_cdc = fr.l2_cdc;
      row.l2_collision_se = fr.l2_collision_se;
      row.l2_cdc_se = fr.l2_cdc_se;
      row.max_identity_residual = fr.max_identity_residual();
      row.feller_satisfied = cal.feller.satisfied;
      table.reports.push_back(std::move(fr));
    } catch (const Error& e) {
      row.error = std::string(to_string(e.code())) + ": " + e.what();
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

SweepTable lambda_sweep(const PanelData& panel, std::span<const double> grid, const SweepOptions& options) {
  return lambda_sweep(estimate_all(panel, options.estimator), grid, options);
}

SweepDiagnostics SweepTable::diagnostics(double tolerance_se) const {
  std::vector<const SweepRow*> ok;
  for (const auto& r : rows)
    if (r.ok) ok.push_back(&r);
  std::sort(ok.begin(), ok.end(), [](const SweepRow* a, const SweepRow* b) { return a->lambda < b->lambda; });
  SweepDiagnostics d;
  for (std::size_t i = 1; i < ok.size(); ++i) {
    const SweepRow& a = *ok[i - 1];
    const SweepRow& b = *ok[i];
    const double cdc_slack = tolerance_se * std::hypot(a.l2_cdc_se, b.l2_cdc_se);
    const double col_slack = tolerance_se * std::hypot(a.l2_collision_se, b.l2_collision_se);
    if (b.l2_cdc > a.l2_cdc + cdc_slack) ++d.cdc_increases;
    if (b.l2_collision < a.l2_collision - col_slack) ++d.collision_decreases;
  }
  d.cdc_non_increasing = d.cdc_increases == 0;
  d.collision_non_decreasing = d.collision_decreases == 0;
  return d;
}

std::string SweepTable::to_csv() const {
  using detail::format_double;
  std::ostringstream out;
  out << "lambda,ok,l2_collision,l2_cdc,l2_collision_se,l2_cdc_se,max_identity_residual,feller_satisfied,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << format_double(r.lambda) << ',' << (r.ok ? 1 : 0) << ',' << format_double(r.l2_collision) << ','
        << format_double(r.l2_cdc) << ',' << format_double(r.l2_collision_se) << ','
        << format_double(r.l2_cdc_se) << ',' << format_double(r.max_identity_residual) << ','
        << (r.feller_satisfied ? 1 : 0) << ',' << err << '\n';
  }
  return out.str();
}

std::string SweepTable::to_json() const {
  nlohmann::ordered_json j;
  j["top_n"] = top_n;
  auto rows_json = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json o;
    o["lambda"] = r.lambda;
    o["ok"] = r.ok;
    if (r.ok) {
      o["l2_collision"] = r.l2_collision;
      o["l2_cdc"] = r.l2_cdc;
      o["l2_collision_se"] = r.l2_collision_se;
      o["l2_cdc_se"] = r.l2_cdc_se;
      o["max_identity_residual"] = r.max_identity_residual;
      o["feller_satisfied"] = r.feller_satisfied;
    } else {
      o["error"] = r.error;
    }
    rows_json.push_back(std::move(o));
  }
  j["rows"] = std::move(rows_json);
  const auto diag = diagnostics();
  j["diagnostics"] = {{"cdc_non_increasing", diag.cdc_non_increasing},
                      {"collision_non_decreasing", diag.collision_non_decreasing},
                      {"tolerance_standard_errors", 2.0}};
  return j.dump(2);
}

std::vector<double> out_of_sample_errors(std::span<const double> in_errors, std::span<const double> phi_hat_in,
                                         std::span<const double> phi_hat_out, std::span<const double> mu_hat_in) {
  const std::size_t n = in_errors.size();
  require(phi_hat_in.size() >= n && phi_hat_out.size() >= n && mu_hat_in.size() >= n,
          "out_of_sample_errors: vectors shorter than the error vector");
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = in_errors[k] + (phi_hat_in[k] - phi_hat_out[k]) / mu_hat_in[k];
  return out;
}

}  // namespace rankvol
