#include "rankvol/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"

namespace rankvol {

namespace {

using detail::format_double;

std::string lambda_label(double lambda) { return "lambda=" + format_double(lambda); }

// Columns of one value per rank; header "rank,<names...>".
std::string rank_table(const std::vector<std::string>& names, const std::vector<std::vector<double>>& columns,
                       std::size_t rows) {
  std::ostringstream out;
  out << "rank";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t k = 0; k < rows; ++k) {
    out << (k + 1);
    for (const auto& c : columns) out << ',' << (k < c.size() ? format_double(c[k]) : std::string());
    out << '\n';
  }
  return out.str();
}

std::vector<double> cumulative(std::vector<double> v) {
  for (std::size_t k = 1; k < v.size(); ++k) v[k] += v[k - 1];
  return v;
}

}  // namespace

std::vector<ReportFile> build_report(const PanelData& in_sample, const PanelData* out_of_sample,
                                     const ReportOptions& options) {
  require(!options.lambdas.empty(), "report: at least one lambda is required");
  if (out_of_sample) require(out_of_sample->d == in_sample.d, "report: out-of-sample panel must have the same d");
  const std::size_t d = in_sample.d;
  const EstimateSet es = estimate_all(in_sample, options.sweep.estimator);
  std::vector<ReportFile> files;

  // Volatility estimates and the two-estimator comparison.
  files.push_back({"fig1_sigma2.csv", rank_table({"sigma2_raw", "sigma2_smoothed"}, {es.sigma2_raw, es.sigma2}, d)});
  files.push_back({"fig2_collisions.csv", rank_table({"phibar", "phi"}, {es.phibar, es.phi}, d)});
  files.push_back({"figB1_volatility_bias.csv",
                   rank_table({"name_based", "ranked_increments", "name_change_share"},
                              {es.sigma2_raw, sigma2_hat_ranked_variant(in_sample, options.sweep.estimator.delisting),
                               name_change_share(in_sample)},
                              d)});

  // Growth parameters per lambda and the Feller comparison.
  {
    std::vector<std::string> names, fnames;
    std::vector<std::vector<double>> cols, fcols;
    for (double lambda : options.lambdas) {
      const CalibrationResult cal = calibrate(es, lambda);
      names.push_back("a_" + lambda_label(lambda));
      cols.push_back(cal.params.a());
      std::vector<double> tail(d, 0.0);
      double s = 0.0;
      for (std::size_t k = d; k-- > 0;) tail[k] = (s += cal.params.a(k));
      fnames.push_back("tail_sum_a_" + lambda_label(lambda));
      fcols.push_back(std::move(tail));
    }
    std::vector<double> tail_max(d, 0.0);
    double m = 0.0;
    for (std::size_t k = d; k-- > 0;) tail_max[k] = 0.5 * (m = std::max(m, es.sigma2[k]));
    fnames.push_back("half_tail_max_sigma2");
    fcols.push_back(std::move(tail_max));
    files.push_back({"fig3_growth.csv", rank_table(names, cols, d)});
    files.push_back({"fig3_feller.csv", rank_table(fnames, fcols, d)});
  }

  // Lambda sweep; the per-lambda fit reports feed the rank-by-rank tables.
  std::vector<double> grid = options.grid;
  grid.insert(grid.end(), options.lambdas.begin(), options.lambdas.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const SweepTable sweep = lambda_sweep(es, grid, options.sweep);
  files.push_back({"fig4_lambda_l2.csv", sweep.to_csv()});

  std::vector<std::string> mu_names{"mu_hat"}, err_names, out_names;
  std::vector<std::vector<double>> mu_cols{es.mu}, err_cols, out_cols;
  std::vector<double> phi_out;
  if (out_of_sample) phi_out = estimate_all(*out_of_sample, options.sweep.estimator).phi;
  {
    std::size_t report_index = 0;
    for (const SweepRow& row : sweep.rows) {
      if (!row.ok) continue;
      const FitReport& fr = sweep.reports[report_index++];
      if (std::find(options.lambdas.begin(), options.lambdas.end(), row.lambda) == options.lambdas.end()) continue;
      mu_names.push_back("mu_" + lambda_label(row.lambda));
      mu_cols.push_back(fr.mu_model);
      mu_names.push_back("mu_stderr_" + lambda_label(row.lambda));
      mu_cols.push_back(fr.mu_stderr);
      err_names.push_back(lambda_label(row.lambda));
      err_cols.push_back(fr.norm_collision_err);
      if (out_of_sample) {
        out_names.push_back(lambda_label(row.lambda));
        out_cols.push_back(out_of_sample_errors(fr.norm_collision_err, es.phi, phi_out, es.mu));
      }
    }
  }
  files.push_back({"fig5_capital_distribution.csv", rank_table(mu_names, mu_cols, d)});
  files.push_back({"fig6_collision_errors_in.csv", rank_table(err_names, err_cols, d)});
  if (out_of_sample) files.push_back({"fig7_collision_errors_out.csv", rank_table(out_names, out_cols, d)});

  // Sample paths of the calibrated models next to the historical ranked weights.
  {
    std::vector<std::size_t> ranks;
    for (std::size_t r : options.tracked_ranks)
      if (r >= 1 && r <= d) ranks.push_back(r);
    std::ostringstream out;
    out << "source,time,rank,weight\n";
    auto emit_panel = [&](const PanelData& panel, double offset) {
      for (std::size_t i = 0; i < panel.n_dates(); ++i) {
        const auto x = panel.ranked_weights(i);
        const std::string t = format_double(panel.times[i] - panel.times.front() + offset);
        for (std::size_t r : ranks) out << "historical," << t << ',' << r << ',' << format_double(x[r - 1]) << '\n';
      }
    };
    emit_panel(in_sample, 0.0);
    double horizon = in_sample.span_years();
    if (out_of_sample) {
      const double gap = in_sample.n_dates() >= 2
                             ? (in_sample.times.back() - in_sample.times.front()) /
                                   static_cast<double>(in_sample.n_dates() - 1)
                             : 0.0;
      emit_panel(*out_of_sample, horizon + gap);
      horizon += gap + out_of_sample->span_years();
    }
    SimConfig cfg = options.sweep.sim;
    cfg.n_paths = 1;
    cfg.top_m.reset();
    cfg.horizon = std::round(horizon / cfg.dt) * cfg.dt;
    const auto x0 = interior_start(in_sample.ranked_weights(0));
    for (double lambda : options.lambdas) {
      try {
        const CalibrationResult cal = calibrate(es, lambda);
        const Trajectory traj = simulate_path(cal.params, x0, cfg);
        for (std::size_t i = 0; i < traj.n_samples(); ++i) {
          const std::string t = format_double(traj.times[i]);
          for (std::size_t r : ranks)
            out << lambda_label(lambda) << ',' << t << ',' << r << ',' << format_double(traj.ranked_weight(i, r - 1))
                << '\n';
        }
      } catch (const Error&) {
        // A failing model simply has no path in the table; the sweep records why.
      }
    }
    files.push_back({"fig8_sample_paths.csv", out.str()});
  }

  // Portfolio weights at the average capital distribution curve.
  const double lambda_ref = options.lambdas[options.lambdas.size() / 2];
  const CalibrationResult ref = calibrate(es, lambda_ref);
  const auto mu_x = interior_start(es.mu);
  const std::size_t n_open = std::clamp<std::size_t>(options.n_open, 1, d);
  const auto div = weights(PortfolioRule::diversity(options.p), mu_x);
  const auto open = weights(PortfolioRule::growth_open(n_open), mu_x, &ref.params);
  const auto closed = weights(PortfolioRule::growth_closed(), mu_x, &ref.params);
  {
    const RankedView view = rank_names(mu_x);
    auto by_rank = [&](const std::vector<double>& pi) {
      std::vector<double> r(d);
      for (std::size_t k = 0; k < d; ++k) r[k] = pi[view.name_of_rank[k]];
      return r;
    };
    const auto dr = by_rank(div), orr = by_rank(open), cr = by_rank(closed);
    files.push_back({"fig9_portfolio_weights.csv",
                     rank_table({"diversity", "diversity_cumulative", "growth_open", "growth_open_cumulative",
                                 "growth_closed", "growth_closed_cumulative"},
                                {dr, cumulative(dr), orr, cumulative(orr), cr, cumulative(cr)},
                                std::min(options.weight_ranks, d))});
  }

  // Summary.
  double gamma_avg = 0.0;
  for (std::size_t i = 0; i < in_sample.n_dates(); ++i)
    gamma_avg += excess_growth_rate(in_sample.ranked_weights(i), es.sigma2, options.p);
  gamma_avg /= static_cast<double>(in_sample.n_dates());
  nlohmann::ordered_json j;
  j["estimates"] = nlohmann::ordered_json::parse(es.header_json());
  j["lambdas"] = options.lambdas;
  j["sweep"] = nlohmann::ordered_json::parse(sweep.to_json());
  j["portfolio_lambda"] = lambda_ref;
  j["portfolio_mu_source"] = "smoothed sigma2";
  j["diversity_p"] = options.p;
  j["open_market_n"] = n_open;
  j["excess_growth_rate_panel_average"] = gamma_avg;
  j["excess_growth_rate_lower_bound"] = excess_growth_lower_bound(es.sigma2, options.p);
  try {
    j["t_star_years"] = t_star(in_sample.ranked_weights(0), options.p, es.sigma2);
  } catch (const Error& e) {
    j["t_star_years"] = nullptr;
    j["t_star_error"] = e.what();
  }
  j["out_of_sample"] = out_of_sample != nullptr;
  files.push_back({"report.json", j.dump(2) + "\n"});
  return files;
}

}  // namespace rankvol
