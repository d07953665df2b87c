#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rankvol/estimators.hpp"
#include "rankvol/market_model.hpp"
#include "rankvol/simulator.hpp"

namespace rankvol {

struct CalibrationResult {
  ModelParams params;
  EstimateSet estimates;  // a and lambda populated
  double lambda = 0.0;
  FellerReport feller;
  std::vector<std::string> warnings;

  std::string to_json() const;
};

/// sigma2_hat -> phibar_hat -> phi_hat -> moment_hats -> a_hat, then the model.
/// Errors keep their code and gain a "calibrate/<stage>:" prefix. An
/// unsatisfied Feller condition is a warning.
CalibrationResult calibrate(const PanelData& panel, double lambda, const EstimatorOptions& options = {});

/// Same as calibrate() but reuses an existing estimate set.
CalibrationResult calibrate(const EstimateSet& estimates, double lambda);

/// Collision rates implied by stationarity: phi_k = -a_k + (lambda + sigma2_k) mu_k - rho_k.
std::vector<double> implied_phi(const ModelParams& params, std::span<const double> mu, std::span<const double> rho);
std::vector<double> implied_phi(const ModelParams& params, const StationaryMoments& moments);

struct FitReport {
  std::size_t top_n = 0;
  double lambda = 0.0;
  std::vector<double> mu_hat, phi_hat;
  std::vector<double> mu_model, phi_model;
  /// Path-wise standard errors of the Monte-Carlo quantities (0 for one path).
  std::vector<double> mu_stderr, phi_stderr;
  std::vector<double> norm_collision_err;  // (phi - phi_hat) / mu_hat
  std::vector<double> norm_cdc_err;        // (mu - mu_hat) / mu_hat
  double l2_collision = 0.0;               // over ranks 1..top_n
  double l2_cdc = 0.0;
  /// Leave-one-path-out jackknife standard errors of the two L2 sums.
  double l2_collision_se = 0.0;
  double l2_cdc_se = 0.0;
  /// (phi - phi_hat)/mu_hat - [(lambda + sigma2)(mu - mu_hat)/mu_hat - (rho - rho_hat)/mu_hat].
  std::vector<double> identity_residual;
  /// Error of the approximation that drops the rho term.
  std::vector<double> approximation_residual;

  double max_identity_residual() const;
  /// rank,mu_hat,mu_model,mu_stderr,phi_hat,phi_model,phi_stderr,norm_cdc_err,
  /// norm_collision_err,identity_residual,approximation_residual
  std::string to_csv() const;
  std::string to_json() const;
};

inline constexpr std::size_t kDefaultTopN = 1000;

/// Compares the calibrated panel estimates against Monte-Carlo moments of the
/// calibrated model. top_n is clamped to d.
FitReport fit_report(const CalibrationResult& result, const StationaryMoments& moments,
                     std::size_t top_n = kDefaultTopN);

struct SweepRow {
  double lambda = 0.0;
  bool ok = false;
  std::string error;
  double l2_collision = 0.0;
  double l2_cdc = 0.0;
  double l2_collision_se = 0.0;
  double l2_cdc_se = 0.0;
  double max_identity_residual = 0.0;
  bool feller_satisfied = false;
};

struct SweepDiagnostics {
  /// Consecutive pairs of successful rows (sorted by lambda) where l2_cdc
  /// increases / l2_collision decreases by more than `tolerance_se` combined
  /// standard errors.
  std::size_t cdc_increases = 0;
  std::size_t collision_decreases = 0;
  bool cdc_non_increasing = true;
  bool collision_non_decreasing = true;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  std::size_t top_n = 0;
  std::vector<FitReport> reports;  // one per successful row, in row order

  SweepDiagnostics diagnostics(double tolerance_se = 2.0) const;
  std::string to_csv() const;
  std::string to_json() const;
};

/// 21 points on [0, 0.25] in steps of 0.0125, with 0.1125 replaced by 0.11.
std::vector<double> default_lambda_grid();

struct SweepOptions {
  EstimatorOptions estimator;
  SimConfig sim = moment_config();
  std::size_t top_n = kDefaultTopN;
  MomentMode mode = MomentMode::tail_average;
  double tail_fraction = 0.5;
  /// Starting point of the Monte-Carlo paths; empty uses mu_hat.
  std::vector<double> x0;
};

/// For each lambda: calibrate -> stationary_moments -> fit_report. Every grid
/// point uses the same seed. Failures are recorded in the row; the sweep goes on.
SweepTable lambda_sweep(const PanelData& panel, std::span<const double> grid, const SweepOptions& options);
SweepTable lambda_sweep(const EstimateSet& estimates, std::span<const double> grid, const SweepOptions& options);

/// out_k = in_k + (phi_hat_in_k - phi_hat_out_k) / mu_hat_in_k.
std::vector<double> out_of_sample_errors(std::span<const double> in_errors, std::span<const double> phi_hat_in,
                                         std::span<const double> phi_hat_out, std::span<const double> mu_hat_in);

/// mu_hat renormalized and floored so it can start a simulation.
std::vector<double> interior_start(std::span<const double> mu_hat);

}  // namespace rankvol
