#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "rankvol/calibration.hpp"
#include "rankvol/portfolios.hpp"

using namespace rankvol;

namespace {

// Growth-optimal allocation from the full KKT system
//   [diag(q) 1; 1^T 0] [pi; nu] = [c; 1]
// over ranks 1..n, solved with full-pivoting LU.
std::vector<double> kkt_oracle(std::span<const double> x, const ModelParams& params, std::size_t n) {
  const std::size_t d = x.size();
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] > x[j]; });
  const auto m = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
  Eigen::VectorXd rhs(m + 1);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double xk = x[order[static_cast<std::size_t>(k)]];
    kkt(k, k) = params.sigma2(static_cast<std::size_t>(k)) / xk;
    kkt(k, m) = 1.0;
    kkt(m, k) = 1.0;
    rhs(k) = params.a(static_cast<std::size_t>(k)) / xk;
  }
  rhs(m) = 1.0;
  const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
  std::vector<double> pi(d, 0.0);
  for (Eigen::Index k = 0; k < m; ++k) pi[order[static_cast<std::size_t>(k)]] = sol(k);
  return pi;
}

ModelParams random_params(std::mt19937_64& rng, std::size_t d) {
  std::uniform_real_distribution<double> a(-0.05, 0.15), s(0.02, 0.4);
  std::vector<double> av(d), sv(d);
  for (std::size_t k = 0; k < d; ++k) {
    av[k] = a(rng);
    sv[k] = s(rng);
  }
  return ModelParams(av, sv);
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<PortfolioRule> all_rules(std::size_t d) {
  return {PortfolioRule::market(), PortfolioRule::diversity(0.8), PortfolioRule::diversity(0.3),
          PortfolioRule::growth_closed(), PortfolioRule::growth_open(std::max<std::size_t>(1, d / 2)),
          PortfolioRule::large_cap(d - 1)};
}

}  // namespace

TEST_CASE("diversity weights: worked example and the p -> 1 limit") {
  const std::vector<double> x{0.7, 0.2, 0.1};
  const auto pi = weights(PortfolioRule::diversity(0.5), x);
  CHECK(pi[0] == doctest::Approx(0.52288).epsilon(1e-5));
  CHECK(pi[1] == doctest::Approx(0.27949).epsilon(1e-5));
  CHECK(pi[2] == doctest::Approx(0.19763).epsilon(1e-5));
  const auto near_market = weights(PortfolioRule::diversity(1.0 - 1e-9), x);
  CHECK(max_diff(near_market, x) <= 1e-8);
  CHECK(kDefaultDiversityP == 0.8);
}

TEST_CASE("growth_closed with unit volatility ratio sum is equal-weighted") {
  const ModelParams params({0.5, 0.5}, {1.0, 1.0});
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = testutil::random_simplex(rng, 2);
    const auto pi = weights(PortfolioRule::growth_closed(), x, &params);
    CHECK(pi[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(pi[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(max_diff(kkt_oracle(x, params, 2), pi) <= 1e-12);
  }
}

TEST_CASE("closed-form growth weights match the KKT oracle") {
  std::mt19937_64 rng(52);
  SUBCASE("closed market, d=5") {
    for (int trial = 0; trial < 100; ++trial) {
      const ModelParams params = random_params(rng, 5);
      const auto x = testutil::random_simplex(rng, 5);
      const auto pi = weights(PortfolioRule::growth_closed(), x, &params);
      CHECK(max_diff(pi, kkt_oracle(x, params, 5)) <= 1e-8);
      CHECK(max_diff(pi, growth_optimal_qp_oracle(x, params)) <= 1e-8);
    }
  }
  SUBCASE("open market, d=6, N=3") {
    for (int trial = 0; trial < 100; ++trial) {
      const ModelParams params = random_params(rng, 6);
      const auto x = testutil::random_simplex(rng, 6);
      const auto pi = weights(PortfolioRule::growth_open(3), x, &params);
      CHECK(max_diff(pi, kkt_oracle(x, params, 3)) <= 1e-8);
      CHECK(max_diff(pi, growth_optimal_qp_oracle(x, params, 3)) <= 1e-8);
    }
  }
}

TEST_CASE("library QP oracle agrees with the KKT oracle") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 2 + trial % 8;
    const std::size_t n = 1 + trial % d;
    const ModelParams params = random_params(rng, d);
    const auto x = testutil::random_simplex(rng, d);
    CHECK(max_diff(growth_optimal_qp_oracle(x, params, n), kkt_oracle(x, params, n)) <= 1e-9);
  }
}

TEST_CASE("one-asset QP is the whole allocation") {
  const std::vector<double> one{1.0}, a{0.1}, s{0.2};
  CHECK(growth_optimal_qp_ranked(one, a, s, 1) == std::vector<double>{1.0});
  const std::vector<double> x{0.6, 0.4}, a2{0.3, -0.1}, s2{0.1, 0.2};
  CHECK(growth_optimal_qp_ranked(x, a2, s2, 1) == std::vector<double>{1.0, 0.0});
}

TEST_CASE("growth_open(d) equals growth_closed and ranks beyond N hold nothing") {
  std::mt19937_64 rng(54);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + trial % 7;
    const ModelParams params = random_params(rng, d);
    const auto x = testutil::random_simplex(rng, d);
    CHECK(weights(PortfolioRule::growth_open(d), x, &params) == weights(PortfolioRule::growth_closed(), x, &params));
    const std::size_t n = 1 + trial % d;
    const auto pi = weights(PortfolioRule::growth_open(n), x, &params);
    const RankedView v = rank_names(x);
    for (std::size_t k = n; k < d; ++k) CHECK(pi[v.name_of_rank[k]] == 0.0);
  }
}

TEST_CASE("large_cap holds the top k at market proportions") {
  const std::vector<double> x{0.1, 0.4, 0.2, 0.3};
  const auto pi = weights(PortfolioRule::large_cap(2), x);
  CHECK(pi[0] == 0.0);
  CHECK(pi[2] == 0.0);
  CHECK(pi[1] == doctest::Approx(4.0 / 7.0).epsilon(1e-15));
  CHECK(pi[3] == doctest::Approx(3.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("rule properties: completeness, long-only, permutation equivariance") {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 2 + trial % 9;
    const ModelParams params = random_params(rng, d);
    auto x = testutil::random_simplex(rng, d);
    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> xp(d);
    for (std::size_t i = 0; i < d; ++i) xp[i] = x[perm[i]];
    for (const auto& rule : all_rules(d)) {
      const auto pi = weights(rule, x, &params);
      double scale = 1.0;
      for (double v : pi) scale = std::max(scale, std::abs(v));
      CHECK(std::abs(testutil::sum(pi) - 1.0) <= 1e-14 * scale * static_cast<double>(d));
      if (!rule.needs_params())
        for (double v : pi) CHECK(v >= 0.0);
      const auto pp = weights(rule, xp, &params);
      for (std::size_t i = 0; i < d; ++i) CHECK(std::abs(pp[i] - pi[perm[i]]) <= 1e-13 * scale);
    }
  }
}

TEST_CASE("rule validation and JSON") {
  const std::vector<double> x{0.5, 0.3, 0.2};
  CHECK_THROWS_AS(weights(PortfolioRule::diversity(1.0), x), Error);
  CHECK_THROWS_AS(weights(PortfolioRule::growth_open(4), x, nullptr), Error);
  CHECK_THROWS_AS(weights(PortfolioRule::large_cap(3), x), Error);
  CHECK_THROWS_AS(weights(PortfolioRule::growth_closed(), x, nullptr), Error);
  CHECK_THROWS_AS(weights(PortfolioRule::market(), std::vector<double>{0.0, 1.0}), Error);
  for (const auto& rule : all_rules(4)) {
    const PortfolioRule back = PortfolioRule::from_json(rule.to_json());
    CHECK(back.to_json() == rule.to_json());
  }
  CHECK(PortfolioRule::from_json("{\"kind\":\"diversity\"}").p == 0.8);
  CHECK_THROWS_AS(PortfolioRule::from_json("{\"kind\":\"growth_open\"}"), Error);
  CHECK_THROWS_AS(PortfolioRule::from_json("{\"kind\":\"momentum\"}"), Error);
  CHECK_THROWS_AS(PortfolioRule::from_json("[1]"), Error);
}

TEST_CASE("diversity function is at least 1 on the simplex") {
  std::mt19937_64 rng(56);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 2 + trial % 20;
    const double p = 0.05 + 0.9 * static_cast<double>(trial % 10) / 10.0;
    CHECK(diversity_function(testutil::random_simplex(rng, d), p) >= 1.0);
  }
  const std::vector<double> vertex{1.0 - 2e-15, 1e-15, 1e-15};
  CHECK(diversity_function(vertex, 0.8) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(diversity_function(testutil::uniform(3), 0.8) == doctest::Approx(std::pow(3.0, 0.25)).epsilon(1e-15));
}

TEST_CASE("excess growth rate at the uniform vector") {
  for (std::size_t d : {2u, 3u, 10u, 50u})
    for (double s : {0.01, 0.2})
      for (double p : {0.2, 0.8}) {
        const std::vector<double> s2(d, s);
        CHECK(excess_growth_rate(testutil::uniform(d), s2, p) ==
              doctest::Approx(s * static_cast<double>(d - 1) / 2.0).epsilon(1e-13));
      }
}

TEST_CASE("excess growth rate stays above its lower bound") {
  std::mt19937_64 rng(57);
  std::uniform_real_distribution<double> s(0.001, 1.0), pu(0.05, 0.95);
  for (std::size_t d : {2u, 5u, 50u}) {
    int violations = 0;
    for (int trial = 0; trial < 5000; ++trial) {
      std::vector<double> s2(d);
      for (auto& v : s2) v = s(rng);
      const double p = pu(rng);
      const auto x = testutil::random_simplex(rng, d);
      if (excess_growth_rate(x, s2, p) < excess_growth_lower_bound(s2, p)) ++violations;
    }
    CHECK(violations == 0);
  }
  const std::vector<double> s2{0.04, 0.16, 0.09};
  CHECK(excess_growth_lower_bound(s2, 0.8) == doctest::Approx(0.13 / (2.0 * std::pow(3.0, 0.2))).epsilon(1e-15));
}

TEST_CASE("t_star worked example and limits") {
  const std::vector<double> s2{0.04, 0.09, 0.16};
  const double t = t_star(testutil::uniform(3), 0.8, s2);
  // 2 log(3^0.25) 3^0.2 / (0.2 * 0.13)
  CHECK(t == doctest::Approx(2.0 * 0.25 * std::log(3.0) * std::pow(3.0, 0.2) / (0.2 * 0.13)).epsilon(1e-14));
  CHECK(std::abs(t - 26.32) <= 0.01);
  CHECK(t_star(std::vector<double>{1.0 - 2e-12, 1e-12, 1e-12}, 0.8, s2) < 1e-6);
  try {
    t_star(testutil::uniform(3), 0.8, std::vector<double>{0.1, 0.0, 0.0});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::undefined_horizon);
  }
}

TEST_CASE("wealth_path: market rule has zero relative wealth") {
  const ModelParams params = testutil::feller_params(5, 0.3, 0.1);
  SimConfig cfg;
  cfg.horizon = 3.0;
  cfg.seed = 58;
  const Trajectory t = simulate_path(params, testutil::uniform(5), cfg);
  const WealthPath w = wealth_path(t, PortfolioRule::market(), nullptr);
  for (std::size_t i = 0; i < w.times.size(); ++i) {
    CHECK(w.log_relative[i] == 0.0);
    CHECK(w.log_wealth[i] == doctest::Approx(t.log_total_cap[i] - t.log_total_cap[0]).epsilon(1e-12));
  }
}

TEST_CASE("wealth_path follows the arithmetic recursion with reconstructed prices") {
  const ModelParams params = testutil::feller_params(4, 0.3, 0.1);
  SimConfig cfg;
  cfg.horizon = 1.0;
  cfg.seed = 59;
  const Trajectory t = simulate_path(params, testutil::uniform(4), cfg);
  for (const auto& rule : all_rules(4)) {
    const WealthPath w = wealth_path(t, rule, &params, WealthScheme::arithmetic, true);
    double log_w = 0.0;
    for (std::size_t i = 0; i + 1 < t.n_samples(); ++i) {
      const auto x = t.sample(i), xn = t.sample(i + 1);
      const auto pi = weights(rule, x, &params);
      double ret = 0.0;
      for (std::size_t j = 0; j < 4; ++j) {
        const double s0 = x[j] * std::exp(t.log_total_cap[i]);
        const double s1 = xn[j] * std::exp(t.log_total_cap[i + 1]);
        ret += pi[j] * (s1 - s0) / s0;
      }
      log_w += std::log1p(ret);
      CHECK(w.log_wealth[i + 1] == doctest::Approx(log_w).epsilon(1e-9));
      CHECK(w.log_relative[i + 1] ==
            doctest::Approx(w.log_wealth[i + 1] - (t.log_total_cap[i + 1] - t.log_total_cap[0])).epsilon(1e-9));
    }
    CHECK(w.log_wealth[0] == 0.0);
    CHECK(w.weights_sampled.size() == t.n_samples() * 4);
  }
}

TEST_CASE("wealth_path on a constant trajectory") {
  const Trajectory t = testutil::trajectory_from_rows({{0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}}, 0.1,
                                                      {0.0, 0.05, 0.1});
  const ModelParams params = testutil::feller_params(3, 0.2, 0.1);
  for (const auto& rule : all_rules(3)) {
    const WealthPath w = wealth_path(t, rule, &params);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::abs(w.log_relative[i]) <= 1e-15);
      CHECK(w.log_wealth[i] == doctest::Approx(0.05 * static_cast<double>(i)).epsilon(1e-14));
    }
  }
}

TEST_CASE("leveraged rule goes bankrupt under a coarse jump; log-Euler does not") {
  const ModelParams params({2.0, -1.9}, {0.01, 0.01});
  const Trajectory t = testutil::trajectory_from_rows({{0.6, 0.4}, {0.4, 0.6}}, 0.01);
  try {
    wealth_path(t, PortfolioRule::growth_closed(), &params);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::bankruptcy);
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
  CHECK_NOTHROW(wealth_path(t, PortfolioRule::growth_closed(), &params, WealthScheme::log_euler));
  CHECK_THROWS_AS(wealth_path(t, PortfolioRule::market(), nullptr, WealthScheme::log_euler), Error);
}

TEST_CASE("fgp_decompose: constant path is all zeros") {
  const Trajectory t = testutil::trajectory_from_rows({{0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}}, 0.1);
  const FgpDecomposition f = fgp_decompose(t, PortfolioRule::diversity(0.8), GeneratorKind::diversity, nullptr);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(f.log_relative[i] == 0.0);
    CHECK(f.log_g_change[i] == 0.0);
    CHECK(f.gamma[i] == 0.0);
    CHECK(f.residual[i] == 0.0);
  }
  CHECK_FALSE(f.gamma_is_residual);
  CHECK_THROWS_AS(fgp_decompose(t, PortfolioRule::market(), GeneratorKind::diversity, nullptr), Error);
}

TEST_CASE("fgp_decompose: diversity residual shrinks as the step halves on one Brownian path") {
  const ModelParams params = testutil::feller_params(5, 0.3, 0.1);
  double coarse_total = 0.0, fine_total = 0.0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    SimConfig fine;
    fine.dt = 1.0 / 1008.0;
    fine.substeps_per_sample = 1;
    fine.horizon = 2.0;
    const auto dw = brownian_increments(60 + seed, 0, 5, fine.n_steps(), fine.dt);
    SimConfig coarse = fine;
    coarse.dt = 1.0 / 504.0;
    const auto dwc = coarsen_increments(dw, 5, 2);
    const auto rule = PortfolioRule::diversity(0.8);
    const auto ff = fgp_decompose(simulate_driven(params, testutil::uniform(5), fine, dw), rule,
                                  GeneratorKind::diversity, nullptr);
    const auto fc = fgp_decompose(simulate_driven(params, testutil::uniform(5), coarse, dwc), rule,
                                  GeneratorKind::diversity, nullptr);
    fine_total += std::abs(ff.final_residual());
    coarse_total += std::abs(fc.final_residual());
  }
  MESSAGE("mean |residual| coarse ", coarse_total / 4, " fine ", fine_total / 4);
  CHECK(fine_total < coarse_total);
}

TEST_CASE("fgp_decompose: rank-based generators report gamma as the residual") {
  const ModelParams params = testutil::feller_params(4, 0.3, 0.1);
  SimConfig cfg;
  cfg.horizon = 1.0;
  cfg.seed = 61;
  const Trajectory t = simulate_path(params, testutil::uniform(4), cfg);
  const FgpDecomposition f = fgp_decompose(t, PortfolioRule::growth_closed(), GeneratorKind::growth_closed, &params);
  CHECK(f.gamma_is_residual);
  for (std::size_t i = 0; i < t.n_samples(); ++i) {
    CHECK(f.residual[i] == 0.0);
    CHECK(f.gamma[i] == f.log_relative[i] - f.log_g_change[i]);
  }
  const FgpDecomposition o =
      fgp_decompose(t, PortfolioRule::growth_open(2), GeneratorKind::growth_open, &params);
  CHECK(o.gamma_is_residual);
}

TEST_CASE("growth generators produce their portfolios") {
  // pi_k = x_k d/dx_k log G, checked by central differences in rank order.
  const ModelParams params = testutil::feller_params(4, 0.3, 0.1);
  std::mt19937_64 rng(62);
  for (const auto& rule : {PortfolioRule::growth_closed(), PortfolioRule::growth_open(2)}) {
    const GeneratorKind g = rule.kind == RuleKind::growth_closed ? GeneratorKind::growth_closed
                                                                 : GeneratorKind::growth_open;
    for (int trial = 0; trial < 20; ++trial) {
      const auto x = testutil::random_simplex(rng, 4);
      const auto pi = weights(rule, x, &params);
      for (std::size_t i = 0; i < 4; ++i) {
        const double h = 1e-7 * x[i];
        auto up = x, dn = x;
        up[i] += h;
        dn[i] -= h;
        const double grad = (log_generator(g, rule, up, &params) - log_generator(g, rule, dn, &params)) / (2.0 * h);
        CHECK(x[i] * grad == doctest::Approx(pi[i]).epsilon(1e-5).scale(1.0));
      }
    }
  }
}

TEST_CASE("growth weights at mu_hat do not depend on lambda") {
  SimConfig cfg;
  cfg.horizon = 10.0;
  cfg.seed = 63;
  const ModelParams truth = testutil::feller_params(6, 0.3, 0.1);
  const EstimateSet es = estimate_all(panel_from_trajectory(simulate_path(truth, testutil::uniform(6), cfg)));
  const auto x = interior_start(es.mu);
  std::vector<std::vector<double>> closed, open;
  for (double lambda : {0.0, 0.11, 0.2}) {
    const CalibrationResult r = calibrate(es, lambda);
    closed.push_back(weights(PortfolioRule::growth_closed(), x, &r.params));
    open.push_back(weights(PortfolioRule::growth_open(3), x, &r.params));
  }
  for (std::size_t i = 1; i < 3; ++i) {
    CHECK(max_diff(closed[i], closed[0]) <= 1e-10);
    CHECK(max_diff(open[i], open[0]) <= 1e-10);
  }
}

TEST_CASE("weight snapshot CSV lists ranks") {
  const std::vector<double> x{0.2, 0.5, 0.3};
  const auto csv = weights_csv(x, weights(PortfolioRule::market(), x));
  CHECK(csv.rfind("rank,name,x,weight\n1,1,0.5,0.5\n", 0) == 0);
}
