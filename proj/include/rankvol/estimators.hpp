#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rankvol/panel.hpp"

namespace rankvol {

/// What to do with an increment whose name is no longer in the panel on the
/// next date.
enum class DelistingPolicy {
  drop,    // skip the term and its elapsed time
  strict,  // raise a data_quality error
};

inline constexpr std::size_t kDefaultSmoothingWindow = 15;
/// Share of skipped increments at a rank above which a warning is recorded.
inline constexpr double kSkipWarningShare = 0.20;

struct EstimatorOptions {
  std::size_t smoothing_window = kDefaultSmoothingWindow;
  DelistingPolicy delisting = DelistingPolicy::drop;
};

struct Sigma2Estimate {
  std::vector<double> raw;
  std::vector<double> smoothed;
  std::vector<std::size_t> skipped;  // per rank
  std::vector<std::size_t> used;     // per rank
  std::vector<std::string> warnings;
};

/// Name-based volatility estimator: squared log increments of the asset that
/// holds rank k at t_i, followed to t_{i+1}, over sum_i Δt_i / X_(k)(t_i).
Sigma2Estimate sigma2_hat(const PanelData& panel, std::size_t smoothing_window = kDefaultSmoothingWindow,
                          DelistingPolicy policy = DelistingPolicy::drop);

/// Same denominator, but the numerator uses ranked increments
/// log S_(k)(t_{i+1}) - log S_(k)(t_i). Downward biased when ranks switch.
std::vector<double> sigma2_hat_ranked_variant(const PanelData& panel,
                                              DelistingPolicy policy = DelistingPolicy::drop);

/// Share of increments at each rank whose occupant changes between t_i and
/// t_{i+1}.
std::vector<double> name_change_share(const PanelData& panel);

/// Centered uniform moving average; the window shrinks symmetrically near the
/// ends (width min(window, 2 * distance_to_edge + 1)).
std::vector<double> smooth_uniform(std::span<const double> v, std::size_t window);

struct PhibarEstimate {
  std::vector<double> phibar;
  std::vector<std::size_t> skipped;
};

/// Collision-sum estimator built from the leakage of the top-k buy-and-hold
/// portfolio. The last entry is 0 by construction.
PhibarEstimate phibar_hat(const PanelData& panel, DelistingPolicy policy = DelistingPolicy::drop);

/// Successive differences of phibar (phibar.back() must be 0).
std::vector<double> phi_hat(std::span<const double> phibar);

struct RankMoments {
  std::vector<double> mu;
  std::vector<double> rho;
};

/// Time averages of X_(k) and X_(k) * sum_j sigma2_j X_(j) over dates 0..N-1.
RankMoments moment_hats(const PanelData& panel, std::span<const double> sigma2);

struct LambdaEstimate {
  double arithmetic = 0.0;  // mean of dS̄/S̄ per unit time
  double log_growth = 0.0;  // log(S̄(T)/S̄(0)) / T
};

LambdaEstimate lambda_hat(const PanelData& panel);

/// a_k = lambda mu_k + sigma2_k mu_k - rho_k - phi_k. Throws
/// inconsistent_inputs if the entries do not sum to lambda within 1e-12.
std::vector<double> a_hat(std::span<const double> mu, std::span<const double> rho, std::span<const double> phi,
                          std::span<const double> sigma2, double lambda);

struct LeakageCheck {
  /// Per-unit-time relative wealth of the top-k cap-weighted portfolio with the
  /// remainder in the market, net of the change in the top-k weight.
  double lhs = 0.0;
  /// -phibar_k.
  double rhs = 0.0;
  /// (sum_{j<=k} X_(j)(T) - sum_{j<=k} X_(j)(0)) / T.
  double boundary = 0.0;
  /// (W(T) - S̄(T)) / (S̄(T) T) = lhs + boundary.
  double relative_wealth_drift = 0.0;
};

/// Discrete wealth recursion of the top-k large-cap portfolio against the
/// collision estimator (k is 1-based, 1 <= k < d).
LeakageCheck leakage_check(const PanelData& panel, std::size_t k);

/// Everything estimated from one panel.
struct EstimateSet {
  std::size_t d = 0;
  std::vector<double> sigma2_raw;
  std::vector<double> sigma2;
  std::vector<double> phibar;
  std::vector<double> phi;
  std::vector<double> mu;
  std::vector<double> rho;
  LambdaEstimate lambda_hat;
  std::optional<std::vector<double>> a;
  std::optional<double> lambda;

  std::size_t smoothing_window = kDefaultSmoothingWindow;
  DelistingPolicy delisting = DelistingPolicy::drop;
  std::vector<std::size_t> sigma2_skipped;
  std::vector<std::size_t> phibar_skipped;
  std::vector<std::string> warnings;
  std::string first_date, last_date;
  double span_years = 0.0;

  /// CSV with columns rank,sigma2_raw,sigma2,phibar,phi,mu,rho,a.
  std::string to_csv() const;
  /// Metadata header (lambda variants, span, d, window, policy, skip counts).
  std::string header_json() const;
};

/// Runs every estimator except a_hat (which needs a chosen lambda).
EstimateSet estimate_all(const PanelData& panel, const EstimatorOptions& options = {});

}  // namespace rankvol
