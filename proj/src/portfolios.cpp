#include "rankvol/portfolios.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "binary_io.hpp"

namespace rankvol {

namespace {

const ModelParams& need_params(const PortfolioRule& rule, const ModelParams* params, std::size_t d) {
  if (params == nullptr) fail(ErrorCode::invalid_input, rule.name() + " needs model parameters");
  require(params->d() == d, rule.name() + ": parameter dimension does not match the weight vector");
  return *params;
}

std::size_t open_size(const PortfolioRule& rule, std::size_t d) {
  return rule.kind == RuleKind::growth_open ? rule.n_open : d;
}

}  // namespace

void PortfolioRule::validate(std::size_t d) const {
  switch (kind) {
    case RuleKind::market:
    case RuleKind::growth_closed:
      break;
    case RuleKind::diversity:
      require(p > 0.0 && p < 1.0, "diversity portfolio: p must lie in (0, 1)");
      break;
    case RuleKind::growth_open:
      require(n_open >= 1 && n_open <= d, "open-market portfolio: N must lie in [1, d]");
      break;
    case RuleKind::large_cap:
      require(k_top >= 1 && k_top + 1 <= d, "large-cap portfolio: k must lie in [1, d - 1]");
      break;
  }
}

std::string PortfolioRule::name() const {
  std::ostringstream s;
  switch (kind) {
    case RuleKind::market: return "market";
    case RuleKind::diversity: s << "diversity(p=" << p << ")"; return s.str();
    case RuleKind::growth_closed: return "growth_closed";
    case RuleKind::growth_open: s << "growth_open(N=" << n_open << ")"; return s.str();
    case RuleKind::large_cap: s << "large_cap(k=" << k_top << ")"; return s.str();
  }
  return "unknown";
}

PortfolioRule PortfolioRule::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::invalid_input, std::string("portfolio rule: ") + e.what());
  }
  require(j.is_object() && j.contains("kind") && j["kind"].is_string(), "portfolio rule: missing \"kind\"");
  const std::string kind = j["kind"];
  auto number = [&](const char* key) {
    require(j.contains(key) && j[key].is_number(), std::string("portfolio rule: \"") + key + "\" required for " + kind);
    return j[key].get<double>();
  };
  auto count = [&](const char* key) {
    require(j.contains(key) && j[key].is_number_integer() && j[key].get<long long>() > 0,
            std::string("portfolio rule: positive integer \"") + key + "\" required for " + kind);
    return static_cast<std::size_t>(j[key].get<long long>());
  };
  if (kind == "market") return market();
  if (kind == "diversity") return diversity(j.contains("p") ? number("p") : kDefaultDiversityP);
  if (kind == "growth_closed") return growth_closed();
  if (kind == "growth_open") return growth_open(count("N"));
  if (kind == "large_cap") return large_cap(count("k"));
  fail(ErrorCode::invalid_input, "portfolio rule: unknown kind \"" + kind + "\"");
}

std::string PortfolioRule::to_json() const {
  nlohmann::ordered_json j;
  switch (kind) {
    case RuleKind::market: j["kind"] = "market"; break;
    case RuleKind::diversity: j["kind"] = "diversity"; j["p"] = p; break;
    case RuleKind::growth_closed: j["kind"] = "growth_closed"; break;
    case RuleKind::growth_open: j["kind"] = "growth_open"; j["N"] = n_open; break;
    case RuleKind::large_cap: j["kind"] = "large_cap"; j["k"] = k_top; break;
  }
  return j.dump();
}

std::vector<double> growth_optimal_ranked(std::span<const double> ranked_x, std::span<const double> a,
                                          std::span<const double> sigma2, std::size_t n) {
  const std::size_t d = ranked_x.size();
  require(a.size() == d && sigma2.size() == d && n >= 1 && n <= d, "growth_optimal_ranked: bad dimensions");
  double ratio_sum = 0.0, inv_sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    ratio_sum += a[k] / sigma2[k];
    inv_sum += ranked_x[k] / sigma2[k];
  }
  std::vector<double> pi(d, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    pi[k] = a[k] / sigma2[k] - (ratio_sum - 1.0) * (ranked_x[k] / sigma2[k]) / inv_sum;
  return pi;
}

std::vector<double> growth_optimal_qp_ranked(std::span<const double> ranked_x, std::span<const double> a,
                                             std::span<const double> sigma2, std::size_t n) {
  const std::size_t d = ranked_x.size();
  require(a.size() == d && sigma2.size() == d && n >= 1 && n <= d, "growth_optimal_qp: bad dimensions");
  std::vector<double> pi(d, 0.0);
  if (n == 1) {
    pi[0] = 1.0;
    return pi;
  }
  // Objective sum c_k pi_k - q_k pi_k^2 / 2. Substituting
  // pi_n = 1 - sum_{k<n} pi_k gives an unconstrained concave quadratic in
  // y = (pi_1..pi_{n-1}) with Hessian -(diag(q) + q_n 11^T).
  const std::size_t m = n - 1;
  Eigen::VectorXd c(n), q(n);
  for (std::size_t k = 0; k < n; ++k) {
    c(static_cast<Eigen::Index>(k)) = a[k] / ranked_x[k];
    q(static_cast<Eigen::Index>(k)) = sigma2[k] / ranked_x[k];
  }
  const auto mi = static_cast<Eigen::Index>(m);
  const double qn = q(mi), cn = c(mi);
  Eigen::MatrixXd h = Eigen::MatrixXd::Constant(mi, mi, qn);
  h.diagonal() += q.head(mi);
  const Eigen::VectorXd rhs = c.head(mi).array() - cn + qn;
  const Eigen::VectorXd y = h.ldlt().solve(rhs);
  double rest = 1.0;
  for (Eigen::Index k = 0; k < mi; ++k) {
    pi[static_cast<std::size_t>(k)] = y(k);
    rest -= y(k);
  }
  pi[m] = rest;
  return pi;
}

std::vector<double> growth_optimal_qp_oracle(std::span<const double> x, const ModelParams& params, std::size_t n) {
  validate_interior(x, "growth_optimal_qp_oracle");
  const std::size_t d = x.size();
  require(params.d() == d, "growth_optimal_qp_oracle: parameter dimension does not match the weight vector");
  if (n == 0) n = d;
  const RankedView view = rank_names(x);
  const auto ranked = growth_optimal_qp_ranked(view.ranked, params.a(), params.sigma2(), n);
  std::vector<double> pi(d);
  for (std::size_t k = 0; k < d; ++k) pi[view.name_of_rank[k]] = ranked[k];
  return pi;
}

std::vector<double> weights(const PortfolioRule& rule, std::span<const double> x, const ModelParams* params) {
  validate_interior(x, "portfolio weights");
  const std::size_t d = x.size();
  rule.validate(d);
  std::vector<double> pi(d);
  switch (rule.kind) {
    case RuleKind::market:
      std::copy(x.begin(), x.end(), pi.begin());
      renormalize(pi);
      return pi;
    case RuleKind::diversity: {
      for (std::size_t i = 0; i < d; ++i) pi[i] = std::pow(x[i], rule.p);
      renormalize(pi);
      return pi;
    }
    case RuleKind::large_cap: {
      const RankedView view = rank_names(x);
      double top = 0.0;
      for (std::size_t k = 0; k < rule.k_top; ++k) top += view.ranked[k];
      std::fill(pi.begin(), pi.end(), 0.0);
      for (std::size_t k = 0; k < rule.k_top; ++k) pi[view.name_of_rank[k]] = view.ranked[k] / top;
      return pi;
    }
    case RuleKind::growth_closed:
    case RuleKind::growth_open: {
      const ModelParams& prm = need_params(rule, params, d);
      const RankedView view = rank_names(x);
      const auto ranked = growth_optimal_ranked(view.ranked, prm.a(), prm.sigma2(), open_size(rule, d));
      double scale = 1.0;
      for (double v : ranked) scale = std::max(scale, std::abs(v));
      const double sum = std::accumulate(ranked.begin(), ranked.end(), 0.0);
      if (std::abs(sum - 1.0) > kAllocationTolerance * scale)
        fail(ErrorCode::numerical_blowup, rule.name() + ": closed-form weights sum to " + std::to_string(sum));
      for (std::size_t k = 0; k < d; ++k) pi[view.name_of_rank[k]] = ranked[k] / sum;
      return pi;
    }
  }
  return pi;
}

double diversity_function(std::span<const double> x, double p) {
  require(p > 0.0 && p < 1.0, "diversity function: p must lie in (0, 1)");
  double s = 0.0;
  for (double v : x) s += std::pow(v, p);
  return std::pow(s, 1.0 / p);
}

double excess_growth_rate(std::span<const double> x, std::span<const double> sigma2, double p) {
  validate_interior(x, "excess_growth_rate");
  require(sigma2.size() == x.size(), "excess_growth_rate: sigma2 length must equal d");
  require(p > 0.0 && p < 1.0, "excess_growth_rate: p must lie in (0, 1)");
  const RankedView view = rank_names(x);
  double s = 0.0, first = 0.0, second = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xk = view.ranked[k];
    s += std::pow(xk, p);
    first += std::pow(xk, p - 1.0) * sigma2[k];
    second += std::pow(xk, 2.0 * p - 1.0) * sigma2[k];
  }
  return first / (2.0 * s) - second / (2.0 * s * s);
}

namespace {

double tail_volatility_sum(std::span<const double> sigma2) {
  require(!sigma2.empty(), "empty volatility vector");
  const double total = std::accumulate(sigma2.begin(), sigma2.end(), 0.0);
  return total - *std::max_element(sigma2.begin(), sigma2.end());
}

}  // namespace

double excess_growth_lower_bound(std::span<const double> sigma2, double p) {
  require(p > 0.0 && p < 1.0, "excess_growth_lower_bound: p must lie in (0, 1)");
  return tail_volatility_sum(sigma2) / (2.0 * std::pow(static_cast<double>(sigma2.size()), 1.0 - p));
}

double t_star(std::span<const double> x0, double p, std::span<const double> sigma2) {
  validate_interior(x0, "t_star");
  require(sigma2.size() == x0.size(), "t_star: sigma2 length must equal d");
  require(p > 0.0 && p < 1.0, "t_star: p must lie in (0, 1)");
  const double tail = tail_volatility_sum(sigma2);
  if (!(tail > 0.0)) fail(ErrorCode::undefined_horizon, "t_star: volatilities beyond the largest sum to 0");
  const double d = static_cast<double>(x0.size());
  return 2.0 * std::log(diversity_function(x0, p)) * std::pow(d, 1.0 - p) / ((1.0 - p) * tail);
}

WealthPath wealth_path(const Trajectory& traj, const PortfolioRule& rule, const ModelParams* params,
                       WealthScheme scheme, bool keep_weights) {
  const std::size_t d = traj.d;
  const std::size_t n = traj.n_samples();
  require(n >= 1, "wealth_path: empty trajectory");
  rule.validate(d);
  if (scheme == WealthScheme::log_euler)
    require(params != nullptr && params->d() == d, "wealth_path: the log-Euler scheme needs model parameters of dimension d");

  WealthPath w;
  w.scheme = scheme;
  w.times = traj.times;
  w.log_wealth.assign(n, 0.0);
  w.log_relative.assign(n, 0.0);
  if (keep_weights) w.weights_sampled.assign(n * d, 0.0);

  std::vector<double> r(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = traj.sample(i);
    const auto pi = weights(rule, x, params);
    if (keep_weights) std::copy(pi.begin(), pi.end(), w.weights_sampled.begin() + static_cast<std::ptrdiff_t>(i * d));
    if (i + 1 == n) break;
    const auto xn = traj.sample(i + 1);
    const double dlog_cap = traj.log_total_cap[i + 1] - traj.log_total_cap[i];
    double rel = 0.0;
    if (scheme == WealthScheme::arithmetic) {
      // 1 + sum pi R = exp(Δlog S̄) sum pi x'/x. The market term goes through
      // the same expression so the market portfolio cancels exactly.
      const auto market = weights(PortfolioRule::market(), x);
      double port = 0.0, mkt = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        r[j] = xn[j] / x[j];
        port += pi[j] * r[j];
        mkt += market[j] * r[j];
      }
      const double step_return = std::exp(dlog_cap) * port - 1.0;
      w.max_abs_step_return = std::max(w.max_abs_step_return, std::abs(step_return));
      if (!(port > 0.0)) {
        std::ostringstream msg;
        msg << rule.name() << ": wealth wiped out at step " << i << " (t = " << traj.times[i + 1]
            << ", step return " << step_return << ")";
        fail(ErrorCode::bankruptcy, msg.str());
      }
      rel = std::log(port) - std::log(mkt);
    } else {
      const double dt = traj.times[i + 1] - traj.times[i];
      const RankedView view = rank_names(x);
      double drift = 0.0, gain = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const std::size_t j = view.name_of_rank[k];
        gain += pi[j] * (std::log(xn[j]) - std::log(x[j]));
        drift += 0.5 * pi[j] * (1.0 - pi[j]) * params->sigma2(k) / x[j] * dt;
      }
      rel = gain + drift;
      w.max_abs_step_return = std::max(w.max_abs_step_return, std::abs(std::expm1(rel + dlog_cap)));
    }
    w.log_relative[i + 1] = w.log_relative[i] + rel;
    w.log_wealth[i + 1] = w.log_relative[i + 1] + (traj.log_total_cap[i + 1] - traj.log_total_cap[0]);
  }
  return w;
}

std::string WealthPath::to_csv() const {
  using detail::format_double;
  std::ostringstream out;
  out << "time,log_wealth,log_relative\n";
  for (std::size_t i = 0; i < times.size(); ++i)
    out << format_double(times[i]) << ',' << format_double(log_wealth[i]) << ',' << format_double(log_relative[i])
        << '\n';
  return out.str();
}

double log_generator(GeneratorKind g, const PortfolioRule& rule, std::span<const double> x,
                     const ModelParams* params) {
  double v = 0.0;
  if (g == GeneratorKind::diversity) {
    v = std::log(diversity_function(x, rule.p));
  } else {
    const std::size_t d = x.size();
    const ModelParams& prm = need_params(rule, params, d);
    const std::size_t n = g == GeneratorKind::growth_open ? rule.n_open : d;
    require(n >= 1 && n <= d, "log_generator: open-market size must lie in [1, d]");
    const RankedView view = rank_names(x);
    double ratio_sum = 0.0, inv_sum = 0.0, logs = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double e = prm.a(k) / prm.sigma2(k);
      ratio_sum += e;
      inv_sum += view.ranked[k] / prm.sigma2(k);
      logs += e * std::log(view.ranked[k]);
    }
    v = logs - (ratio_sum - 1.0) * std::log(inv_sum);
  }
  if (!std::isfinite(v)) fail(ErrorCode::invalid_input, "generator is not positive and finite at this state");
  return v;
}

FgpDecomposition fgp_decompose(const Trajectory& traj, const PortfolioRule& rule, GeneratorKind generator,
                               const ModelParams* params) {
  const bool match = (generator == GeneratorKind::diversity && rule.kind == RuleKind::diversity) ||
                     (generator == GeneratorKind::growth_closed && rule.kind == RuleKind::growth_closed) ||
                     (generator == GeneratorKind::growth_open && rule.kind == RuleKind::growth_open);
  require(match, "fgp_decompose: generator does not generate " + rule.name());
  const WealthPath w = wealth_path(traj, rule, params);
  const std::size_t n = traj.n_samples();
  const std::size_t d = traj.d;

  FgpDecomposition f;
  f.times = traj.times;
  f.log_relative = w.log_relative;
  f.log_g_change.assign(n, 0.0);
  f.gamma.assign(n, 0.0);
  f.residual.assign(n, 0.0);
  f.gamma_is_residual = generator != GeneratorKind::diversity;

  const double g0 = log_generator(generator, rule, traj.sample(0), params);
  for (std::size_t i = 1; i < n; ++i) f.log_g_change[i] = log_generator(generator, rule, traj.sample(i), params) - g0;

  if (f.gamma_is_residual) {
    for (std::size_t i = 0; i < n; ++i) f.gamma[i] = f.log_relative[i] - f.log_g_change[i];
    return f;
  }
  // -sum_ij ∂_ij D_p / (2 D_p) ΔX_i ΔX_j at the left point
  // = (1-p)/2 [sum x^(p-2) ΔX^2 / s - (sum x^(p-1) ΔX)^2 / s^2], s = sum x^p.
  const double p = rule.p;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto x = traj.sample(i);
    const auto xn = traj.sample(i + 1);
    double s = 0.0, diag = 0.0, lin = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double dx = xn[j] - x[j];
      const double xp = std::pow(x[j], p);
      s += xp;
      diag += xp / (x[j] * x[j]) * dx * dx;
      lin += xp / x[j] * dx;
    }
    f.gamma[i + 1] = f.gamma[i] + 0.5 * (1.0 - p) * (diag / s - lin * lin / (s * s));
  }
  for (std::size_t i = 0; i < n; ++i) f.residual[i] = f.log_relative[i] - (f.log_g_change[i] + f.gamma[i]);
  return f;
}

std::string FgpDecomposition::to_csv() const {
  using detail::format_double;
  std::ostringstream out;
  out << "time,log_relative,log_g_change,gamma,residual\n";
  for (std::size_t i = 0; i < times.size(); ++i)
    out << format_double(times[i]) << ',' << format_double(log_relative[i]) << ',' << format_double(log_g_change[i])
        << ',' << format_double(gamma[i]) << ',' << format_double(residual[i]) << '\n';
  return out.str();
}

std::string weights_csv(std::span<const double> x, std::span<const double> pi) {
  using detail::format_double;
  const RankedView view = rank_names(x);
  std::ostringstream out;
  out << "rank,name,x,weight\n";
  for (std::size_t k = 0; k < x.size(); ++k) {
    const std::size_t j = view.name_of_rank[k];
    out << (k + 1) << ',' << j << ',' << format_double(x[j]) << ',' << format_double(pi[j]) << '\n';
  }
  return out.str();
}

}  // namespace rankvol
