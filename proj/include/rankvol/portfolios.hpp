#pragma once

#include <span>
#include <string>
#include <vector>

#include "rankvol/market_model.hpp"
#include "rankvol/simulator.hpp"

namespace rankvol {

enum class RuleKind { market, diversity, growth_closed, growth_open, large_cap };

inline constexpr double kDefaultDiversityP = 0.8;
/// Largest tolerated |sum - 1| of a closed-form growth allocation before
/// renormalization.
inline constexpr double kAllocationTolerance = 1e-8;

struct PortfolioRule {
  RuleKind kind = RuleKind::market;
  double p = kDefaultDiversityP;  // diversity
  std::size_t n_open = 0;         // growth_open
  std::size_t k_top = 0;          // large_cap

  static PortfolioRule market() { return {}; }
  static PortfolioRule diversity(double p) { return {RuleKind::diversity, p, 0, 0}; }
  static PortfolioRule growth_closed() { return {RuleKind::growth_closed, kDefaultDiversityP, 0, 0}; }
  static PortfolioRule growth_open(std::size_t n) { return {RuleKind::growth_open, kDefaultDiversityP, n, 0}; }
  static PortfolioRule large_cap(std::size_t k) { return {RuleKind::large_cap, kDefaultDiversityP, 0, k}; }

  bool needs_params() const { return kind == RuleKind::growth_closed || kind == RuleKind::growth_open; }
  /// Checks the parameter ranges against d.
  void validate(std::size_t d) const;
  std::string name() const;

  /// {"kind": "market" | "diversity" | "growth_closed" | "growth_open" |
  /// "large_cap", "p": .., "N": .., "k": ..}
  static PortfolioRule from_json(const std::string& text);
  std::string to_json() const;
};

/// Portfolio weights by name for interior market weights x. Growth rules need
/// params (may be null otherwise).
std::vector<double> weights(const PortfolioRule& rule, std::span<const double> x, const ModelParams* params = nullptr);

/// Closed-form growth-optimal weights in rank coordinates over ranks 1..n
/// (zero beyond), before renormalization. ranked_x must be descending.
std::vector<double> growth_optimal_ranked(std::span<const double> ranked_x, std::span<const double> a,
                                          std::span<const double> sigma2, std::size_t n);

/// Numerical maximizer of sum_k (a_k/X_(k)) pi_k - (sigma2_k / 2X_(k)) pi_k^2
/// subject to sum pi_k = 1 over ranks 1..n: the constraint is eliminated and
/// the reduced normal equations are solved directly. Rank coordinates; any
/// d >= 1.
std::vector<double> growth_optimal_qp_ranked(std::span<const double> ranked_x, std::span<const double> a,
                                             std::span<const double> sigma2, std::size_t n);

/// Name-coordinate wrapper of the oracle; n = 0 means the closed market.
std::vector<double> growth_optimal_qp_oracle(std::span<const double> x, const ModelParams& params, std::size_t n = 0);

/// D_p(x) = (sum x_i^p)^(1/p).
double diversity_function(std::span<const double> x, double p);

/// gamma*(x): rank k carries sigma2[k].
double excess_growth_rate(std::span<const double> x, std::span<const double> sigma2, double p);

/// sum_{k>=2} of the descending order statistics of sigma2, over 2 d^(1-p).
double excess_growth_lower_bound(std::span<const double> sigma2, double p);

/// Horizon beyond which the diversity-p portfolio outperforms the market.
/// Throws undefined_horizon when the tail volatility sum is 0.
double t_star(std::span<const double> x0, double p, std::span<const double> sigma2);

enum class WealthScheme {
  arithmetic,  // W(t_{i+1}) = W(t_i) (1 + sum_i pi_i R_i)
  log_euler,   // d log W = sum pi d log S + (1/2) sum pi (1 - pi) sigma2 / X dt
};

struct WealthPath {
  std::vector<double> times;
  std::vector<double> log_wealth;    // log W, W(0) = 1
  std::vector<double> log_relative;  // log W - log(S̄(t)/S̄(0))
  std::vector<double> weights_sampled;  // n_samples x d by name, when requested
  WealthScheme scheme = WealthScheme::arithmetic;
  /// Largest |sum_i pi_i R_i| over all steps.
  double max_abs_step_return = 0.0;

  std::string to_csv() const;
};

/// Wealth of `rule` along a trajectory. Throws bankruptcy (with the step index
/// in the message) when a step return is <= -1.
WealthPath wealth_path(const Trajectory& traj, const PortfolioRule& rule, const ModelParams* params,
                       WealthScheme scheme = WealthScheme::arithmetic, bool keep_weights = false);

enum class GeneratorKind { diversity, growth_closed, growth_open };

struct FgpDecomposition {
  std::vector<double> times;
  std::vector<double> log_relative;
  std::vector<double> log_g_change;  // log G(X(t)) - log G(X(0))
  std::vector<double> gamma;
  std::vector<double> residual;      // log V - (log_g_change + gamma)
  /// True when gamma is the master-formula residual (rank-based generators),
  /// in which case `residual` is 0 by definition.
  bool gamma_is_residual = false;

  double final_residual() const { return residual.back(); }
  std::string to_csv() const;
};

/// log G of a generator at x (p from the rule for diversity, n from the rule
/// for growth_open).
double log_generator(GeneratorKind g, const PortfolioRule& rule, std::span<const double> x, const ModelParams* params);

/// Master-formula decomposition of the rule's relative wealth. For D_p the
/// drift accumulates the second-order term with realized cross-increment
/// products of the sampled weights; for the rank-based generators it is the
/// residual log V - Δlog G.
FgpDecomposition fgp_decompose(const Trajectory& traj, const PortfolioRule& rule, GeneratorKind generator,
                               const ModelParams* params);

/// Weight snapshot CSV: rank,name,x,weight (rank order).
std::string weights_csv(std::span<const double> x, std::span<const double> pi);

}  // namespace rankvol
