#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rankvol/market_model.hpp"
#include "rankvol/panel.hpp"
#include "rankvol/simulator.hpp"

namespace testutil {

// caps[i][j]: capitalization of asset j on date i (<= 0 means not quoted).
inline rankvol::PanelData panel_from_caps(const std::vector<std::vector<double>>& caps, std::size_t d,
                                          const std::vector<std::string>& ids = {}) {
  const auto dates = rankvol::weekday_labels("2001-01-02", caps.size());
  std::vector<rankvol::RawRow> rows;
  std::size_t line = 2;
  for (std::size_t i = 0; i < caps.size(); ++i)
    for (std::size_t j = 0; j < caps[i].size(); ++j)
      if (caps[i][j] > 0.0)
        rows.push_back({dates[i], ids.empty() ? "N" + std::to_string(j) : ids[j], caps[i][j], line++});
  rankvol::IngestOptions opt;
  opt.d = d;
  return rankvol::ingest_panel(rows, opt);
}

// Trajectory from explicit weight rows (by name), with rank orders filled in.
inline rankvol::Trajectory trajectory_from_rows(const std::vector<std::vector<double>>& x, double dt,
                                                const std::vector<double>& log_caps = {}) {
  rankvol::Trajectory t;
  t.d = x.front().size();
  t.dt = dt;
  for (std::size_t i = 0; i < x.size(); ++i) {
    t.times.push_back(static_cast<double>(i) * dt);
    t.weights.insert(t.weights.end(), x[i].begin(), x[i].end());
    t.log_total_cap.push_back(log_caps.empty() ? 0.0 : log_caps[i]);
    const auto view = rankvol::rank_names(x[i]);
    for (std::size_t k = 0; k < t.d; ++k) t.name_of_rank.push_back(static_cast<std::uint32_t>(view.name_of_rank[k]));
  }
  t.source_names.resize(t.d);
  for (std::size_t i = 0; i < t.d; ++i) t.source_names[i] = i;
  t.steps = x.size() - 1;
  return t;
}

// Uniform draw from the simplex interior (normalized exponentials).
inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t d) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> x(d);
  double s = 0.0;
  for (auto& v : x) s += (v = e(rng) + 1e-12);
  for (auto& v : x) v /= s;
  return x;
}

inline double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

inline std::vector<double> uniform(std::size_t d) { return std::vector<double>(d, 1.0 / static_cast<double>(d)); }

// Feller-satisfying parameters: positive growth at the bottom, modest volatility.
inline rankvol::ModelParams feller_params(std::size_t d, double lambda, double sigma2) {
  std::vector<double> a(d, 0.0), s2(d, sigma2);
  // Growth rises linearly with rank and sums to lambda.
  double w = 0.0;
  for (std::size_t k = 0; k < d; ++k) w += static_cast<double>(k + 1);
  for (std::size_t k = 0; k < d; ++k) a[k] = lambda * static_cast<double>(k + 1) / w;
  return rankvol::ModelParams(a, s2);
}

}  // namespace testutil
