// Acceptance checks: one PASS/FAIL line per criterion. Optional arguments
// select criteria by number.
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rankvol/calibration.hpp"
#include "rankvol/estimators.hpp"
#include "rankvol/market_model.hpp"
#include "rankvol/panel.hpp"
#include "rankvol/portfolios.hpp"
#include "rankvol/simulator.hpp"

using namespace rankvol;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<double> uniform(std::size_t d) { return std::vector<double>(d, 1.0 / static_cast<double>(d)); }

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t d) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> x(d);
  double s = 0.0;
  for (auto& v : x) s += (v = e(rng) + 1e-12);
  for (auto& v : x) v /= s;
  return x;
}

// Growth linear in rank, summing to lambda, with the given volatilities.
ModelParams linear_growth(double lambda, std::vector<double> sigma2) {
  const std::size_t d = sigma2.size();
  const double w = static_cast<double>(d * (d + 1)) / 2.0;
  std::vector<double> a(d);
  for (std::size_t k = 0; k < d; ++k) a[k] = lambda * static_cast<double>(k + 1) / w;
  return ModelParams(std::move(a), std::move(sigma2));
}

// Ground truth for the round trip, the sweep and the arbitrage bound: growth
// rising from 0.03 to 0.07 across ranks (lambda = 0.5), volatility from 0.005
// to 0.014. The Feller margin at the bottom rank is several times sigma2 / 2.
ModelParams ground_truth() {
  std::vector<double> a(10), s2(10);
  for (std::size_t k = 0; k < 10; ++k) {
    a[k] = 0.05 * (0.6 + 0.8 * static_cast<double>(k) / 9.0);
    s2[k] = 0.005 + 0.001 * static_cast<double>(k);
  }
  return ModelParams(a, s2);
}

PanelData simulated_panel(const ModelParams& params, double years, std::uint64_t seed) {
  SimConfig cfg;
  cfg.horizon = years;
  cfg.seed = seed;
  return panel_from_trajectory(simulate_path(params, uniform(params.d()), cfg), 1e9);
}

// Panel of a larger universe with names entering and leaving the top d.
PanelData churning_panel(std::uint64_t seed, std::size_t d, std::size_t names, std::size_t dates) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 0.02);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto labels = weekday_labels("2001-01-02", dates);
  std::vector<double> log_cap(names);
  for (auto& v : log_cap) v = 3.0 * u(rng);
  std::vector<RawRow> rows;
  std::size_t line = 2;
  for (std::size_t i = 0; i < dates; ++i) {
    for (std::size_t j = 0; j < names; ++j) {
      log_cap[j] += z(rng);
      if (i > 0 && u(rng) < 0.01) continue;
      rows.push_back({labels[i], "N" + std::to_string(j), std::exp(log_cap[j]), line++});
    }
  }
  IngestOptions opt;
  opt.d = d;
  return ingest_panel(rows, opt);
}

// 1: exact identities on any panel.
Outcome identities() {
  std::vector<PanelData> panels;
  panels.push_back(simulated_panel(ground_truth(), 10.0, 11));
  panels.push_back(churning_panel(12, 10, 30, 1500));
  double worst_mu = 0.0, worst_rho = 0.0, worst_phibar = 0.0, worst_phi = 0.0, worst_a = 0.0, worst_res = 0.0;
  for (const PanelData& panel : panels) {
    const EstimateSet est = estimate_all(panel);
    worst_mu = std::max(worst_mu, std::abs(sum(est.mu) - 1.0));
    double rho = 0.0;
    for (std::size_t k = 0; k < est.d; ++k) rho += est.sigma2[k] * est.mu[k];
    worst_rho = std::max(worst_rho, std::abs(sum(est.rho) - rho) / rho);
    worst_phibar = std::max(worst_phibar, std::abs(est.phibar.back()));
    worst_phi = std::max(worst_phi, std::abs(sum(est.phi)));
    for (double lambda : {0.0, 0.11, 0.2}) {
      const CalibrationResult cal = calibrate(est, lambda);
      worst_a = std::max(worst_a, std::abs(sum(*cal.estimates.a) - lambda));
      SimConfig cfg = moment_config();
      cfg.n_paths = 8;
      cfg.horizon = 5.0;
      cfg.seed = 5;
      const auto moments = stationary_moments(cal.params, cfg, interior_start(est.mu), MomentMode::tail_average);
      worst_res = std::max(worst_res, fit_report(cal, moments).max_identity_residual());
    }
  }
  const double tol = 1e-12;
  const bool pass = worst_mu <= tol && worst_rho <= tol && worst_phibar == 0.0 && worst_phi <= tol &&
                    worst_a <= tol && worst_res <= tol;
  std::ostringstream s;
  s << "max |sum mu-1| " << worst_mu << ", rel |sum rho - sum s2 mu| " << worst_rho << ", |phibar_d| "
    << worst_phibar << ", |sum phi| " << worst_phi << ", |sum a - lambda| " << worst_a << ", residual " << worst_res
    << " (tol 1e-12)";
  return {pass, s.str()};
}

// 2: calibration round trip on a 50-year daily panel.
Outcome round_trip() {
  const ModelParams truth = ground_truth();
  if (!feller_check(truth).satisfied) return {false, "ground truth violates the Feller condition"};
  const PanelData panel = simulated_panel(truth, 50.0, 21);
  const CalibrationResult cal = calibrate(panel, truth.lambda());
  const auto& est = cal.estimates;
  const std::size_t d = truth.d();
  std::size_t s2_ok = 0, a_checked = 0, a_ok = 0;
  double worst_s2 = 0.0, worst_a = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double e = std::abs(est.sigma2_raw[k] - truth.sigma2(k)) / truth.sigma2(k);
    worst_s2 = std::max(worst_s2, e);
    if (e <= 0.10) ++s2_ok;
    if (est.mu[k] >= 1e-3) {
      ++a_checked;
      const double ea = std::abs((*est.a)[k] - truth.a(k)) / std::abs(truth.a(k));
      worst_a = std::max(worst_a, ea);
      if (ea <= 0.25) ++a_ok;
    }
  }
  const bool pass = static_cast<double>(s2_ok) >= 0.95 * static_cast<double>(d) && a_ok == a_checked && a_checked > 0;
  std::ostringstream s;
  s << "sigma2 within 10% at " << s2_ok << "/" << d << " ranks (worst " << fmt("%.3f", worst_s2) << "); a within 25% at "
    << a_ok << "/" << a_checked << " ranks with mu>=1e-3 (worst " << fmt("%.3f", worst_a) << ")";
  return {pass, s.str()};
}

// 3: ranked increments underestimate volatility where names switch often.
Outcome volatility_bias() {
  std::vector<double> s2(10);
  for (std::size_t k = 0; k < 10; ++k) s2[k] = 0.10 + 0.002 * static_cast<double>(k);
  const ModelParams params = linear_growth(1.0, s2);
  const PanelData panel = simulated_panel(params, 20.0, 31);
  const auto raw = sigma2_hat(panel).raw;
  const auto ranked = sigma2_hat_ranked_variant(panel);
  const auto share = name_change_share(panel);
  std::size_t busy = 0, ordered = 0;
  double bias = 0.0;
  for (std::size_t k = 0; k < params.d(); ++k) {
    if (share[k] < 0.05) continue;
    ++busy;
    if (ranked[k] <= raw[k]) ++ordered;
    bias += (raw[k] - ranked[k]) / raw[k];
  }
  if (busy == 0) return {false, "no rank has 5% name-change increments"};
  bias /= static_cast<double>(busy);
  const bool pass = ordered == busy && bias >= 0.02;
  std::ostringstream s;
  s << "variant <= raw at " << ordered << "/" << busy << " ranks with >=5% name changes; mean downward bias "
    << fmt("%.4f", bias) << " (need >= 0.02)";
  return {pass, s.str()};
}

// Independent growth-optimal oracle: the full KKT system over ranks 1..n.
std::vector<double> kkt_oracle(std::span<const double> x, const ModelParams& params, std::size_t n) {
  const std::size_t d = x.size();
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] > x[j]; });
  const auto m = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
  Eigen::VectorXd rhs(m + 1);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto r = static_cast<std::size_t>(k);
    const double xk = x[order[r]];
    kkt(k, k) = params.sigma2(r) / xk;
    kkt(k, m) = 1.0;
    kkt(m, k) = 1.0;
    rhs(k) = params.a(r) / xk;
  }
  rhs(m) = 1.0;
  const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
  std::vector<double> pi(d, 0.0);
  for (Eigen::Index k = 0; k < m; ++k) pi[order[static_cast<std::size_t>(k)]] = sol(k);
  return pi;
}

// 4: closed forms against the quadratic-program oracle.
Outcome qp_oracle() {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> ua(-0.05, 0.15), us(0.02, 0.4);
  double worst = 0.0;
  std::size_t instances = 0;
  for (std::size_t d : {2u, 5u, 8u}) {
    std::uniform_int_distribution<std::size_t> un(1, d);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> a(d), s2(d);
      for (std::size_t k = 0; k < d; ++k) {
        a[k] = ua(rng);
        s2[k] = us(rng);
      }
      const ModelParams params(a, s2);
      const auto x = random_simplex(rng, d);
      const std::size_t n = un(rng);
      const auto closed = weights(PortfolioRule::growth_closed(), x, &params);
      const auto open = weights(PortfolioRule::growth_open(n), x, &params);
      const auto kc = kkt_oracle(x, params, d), ko = kkt_oracle(x, params, n);
      for (std::size_t i = 0; i < d; ++i) {
        worst = std::max(worst, std::abs(closed[i] - kc[i]));
        worst = std::max(worst, std::abs(open[i] - ko[i]));
      }
      ++instances;
    }
  }
  return {worst <= 1e-8, std::to_string(instances) + " instances (closed and open), max |diff| " +
                             fmt("%.3e", worst) + " (tol 1e-8)"};
}

// 5: master-formula residual of the diversity portfolio under step refinement.
Outcome master_formula() {
  const ModelParams params = ground_truth();
  const std::size_t d = params.d();
  SimConfig fine;
  fine.dt = 1.0 / 1008.0;
  fine.substeps_per_sample = 1;
  fine.horizon = 5.0;
  const auto dw = brownian_increments(51, 0, d, fine.n_steps(), fine.dt);
  SimConfig coarse = fine;
  coarse.dt = 1.0 / 504.0;
  const auto dwc = coarsen_increments(dw, d, 2);
  const auto rule = PortfolioRule::diversity(0.8);
  const Trajectory tf = simulate_driven(params, uniform(d), fine, dw);
  const Trajectory tc = simulate_driven(params, uniform(d), coarse, dwc);
  // A clamped weight makes the drift term meaningless; such a run cannot pass.
  const std::size_t clamps = tf.clamp_events + tc.clamp_events;
  const double rf = std::abs(fgp_decompose(tf, rule, GeneratorKind::diversity, nullptr).final_residual());
  const double rc = std::abs(fgp_decompose(tc, rule, GeneratorKind::diversity, nullptr).final_residual());
  const double ratio = rc / rf;
  return {clamps == 0 && ratio >= 1.7, "|residual| at T=5: dt 1/504 " + fmt("%.3e", rc) + ", dt 1/1008 " +
                                           fmt("%.3e", rf) + ", ratio " + fmt("%.2f", ratio) +
                                           " (need >= 1.7), clamp events " + std::to_string(clamps)};
}

// 6: pathwise relative-arbitrage bound and the worked horizon.
Outcome arbitrage_bound() {
  const ModelParams params = ground_truth();
  const std::size_t d = params.d();
  const double p = 0.8;
  const auto x0 = uniform(d);
  SimConfig cfg;
  cfg.horizon = 30.0;
  cfg.n_paths = 50;
  cfg.seed = 61;
  const auto paths = simulate_paths(params, x0, cfg);
  const double sample_dt = cfg.dt * static_cast<double>(cfg.substeps_per_sample);
  const double rate = (1.0 - p) * excess_growth_lower_bound(params.sigma2(), p);
  const double log_d0 = std::log(diversity_function(x0, p));
  std::size_t violations = 0;
  double worst_margin = 1e300;
  for (const Trajectory& t : paths) {
    const WealthPath w = wealth_path(t, PortfolioRule::diversity(p), nullptr);
    for (std::size_t i = 0; i < w.times.size(); ++i) {
      const double slack = 3.0 * sample_dt * rate;
      const double margin = w.log_relative[i] - (-log_d0 + rate * w.times[i]);
      worst_margin = std::min(worst_margin, margin);
      if (margin < -slack) ++violations;
    }
  }
  const std::vector<double> s2 = {0.04, 0.09, 0.16};
  const double ts = t_star(uniform(3), p, s2);
  const bool pass = violations == 0 && std::abs(ts - 26.32) <= 0.01;
  std::ostringstream s;
  s << violations << " violations over 50 paths x " << paths.front().n_samples() << " samples (min margin "
    << fmt("%.4f", worst_margin) << "); T* worked example " << fmt("%.4f", ts) << " (26.32 +- 0.01)";
  return {pass, s.str()};
}

// 7: excess growth rate lower bound on random interior points.
Outcome gamma_bound() {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> us(0.01, 0.5), up(0.05, 0.95);
  std::size_t violations = 0, draws = 0;
  for (std::size_t d : {2u, 5u, 50u}) {
    std::vector<double> s2(d);
    for (int trial = 0; trial < 1000000; ++trial) {
      if (trial % 1000 == 0)
        for (auto& v : s2) v = us(rng);
      const double p = up(rng);
      const auto x = random_simplex(rng, d);
      if (excess_growth_rate(x, s2, p) < excess_growth_lower_bound(s2, p)) ++violations;
      ++draws;
    }
  }
  return {violations == 0, std::to_string(violations) + " violations in " + std::to_string(draws) +
                               " draws (1e6 each at d=2,5,50)"};
}

// 8: weights stay off the boundary under the Feller condition.
Outcome boundary() {
  SimConfig cfg;
  cfg.dt = 1.0 / 2520.0;
  cfg.substeps_per_sample = 2520;
  cfg.horizon = 50.0;
  cfg.n_paths = 100;
  cfg.seed = 81;
  const ModelParams good = linear_growth(0.3, std::vector<double>(5, 0.1));
  const ModelParams bad({0.4, 0.0, 0.0, 0.0, -0.1}, std::vector<double>(5, 0.1));
  if (!feller_check(good).satisfied || feller_check(bad).satisfied)
    return {false, "parameter sets do not straddle the Feller condition"};
  auto clean_paths = [&](const ModelParams& params) {
    std::size_t clean = 0;
    for (const Trajectory& t : simulate_paths(params, uniform(5), cfg))
      if (t.clamp_events == 0) ++clean;
    return clean;
  };
  const std::size_t good_clean = clean_paths(good);
  const std::size_t bad_clamped = cfg.n_paths - clean_paths(bad);
  const bool pass = good_clean >= 95 && bad_clamped >= 50;
  return {pass, "Feller: " + std::to_string(good_clean) + "/100 paths without clamps (need >= 95); violating: " +
                    std::to_string(bad_clamped) + "/100 paths with clamps (need >= 50)"};
}

// 9: l2 trade-off across lambda.
Outcome tradeoff() {
  const ModelParams truth = ground_truth();
  const PanelData panel = simulated_panel(truth, 50.0, 91);
  const double lt = truth.lambda();
  const std::vector<double> grid = {0.0, lt, 2.0 * lt};
  SweepOptions opt;
  opt.sim.seed = 92;
  const SweepTable table = lambda_sweep(panel, grid, opt);
  double worst_res = 0.0;
  std::size_t ok = 0;
  std::ostringstream rows;
  for (const SweepRow& r : table.rows) {
    if (!r.ok) continue;
    ++ok;
    worst_res = std::max(worst_res, r.max_identity_residual);
    rows << " [" << r.lambda << ": cdc " << fmt("%.3e", r.l2_cdc) << "+-" << fmt("%.1e", r.l2_cdc_se) << ", coll "
         << fmt("%.3e", r.l2_collision) << "+-" << fmt("%.1e", r.l2_collision_se) << "]";
  }
  const SweepDiagnostics diag = table.diagnostics(2.0);
  const bool pass =
      ok == grid.size() && diag.cdc_non_increasing && diag.collision_non_decreasing && worst_res <= 1e-12;
  std::ostringstream s;
  s << ok << "/3 rows fitted, cdc non-increasing " << diag.cdc_non_increasing << ", collision non-decreasing "
    << diag.collision_non_decreasing << " (2 SE), max residual " << worst_res << rows.str();
  return {pass, s.str()};
}

// 10: growth-optimal weights at mu_hat do not depend on lambda.
Outcome lambda_invariance() {
  const PanelData panel = simulated_panel(ground_truth(), 20.0, 101);
  const EstimateSet est = estimate_all(panel);
  std::vector<std::vector<double>> pis;
  for (double lambda : {0.0, 0.11, 0.2}) {
    const CalibrationResult cal = calibrate(est, lambda);
    pis.push_back(weights(PortfolioRule::growth_closed(), est.mu, &cal.params));
  }
  double worst = 0.0;
  for (std::size_t j = 1; j < pis.size(); ++j)
    for (std::size_t i = 0; i < est.d; ++i) worst = std::max(worst, std::abs(pis[j][i] - pis[0][i]));
  return {worst <= 1e-10, "max |pi(lambda) - pi(0)| over lambda in {0.11, 0.2}: " + fmt("%.3e", worst) +
                              " (tol 1e-10)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"exact identities", identities},
      {"calibration round trip", round_trip},
      {"volatility bias of ranked increments", volatility_bias},
      {"growth-optimal QP oracle", qp_oracle},
      {"master formula convergence", master_formula},
      {"relative arbitrage bound", arbitrage_bound},
      {"excess growth lower bound", gamma_bound},
      {"boundary non-attainment", boundary},
      {"lambda trade-off", tradeoff},
      {"lambda invariance of growth weights", lambda_invariance},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::strtoul(argv[i], nullptr, 10));
  int failed = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    if (!selected.empty() && !selected.count(c + 1)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[c].second();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s [%zu] %s: %s (%.1fs)\n", out.pass ? "PASS" : "FAIL", c + 1, criteria[c].first,
                out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
