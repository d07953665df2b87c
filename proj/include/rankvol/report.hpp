#pragma once

#include <string>
#include <vector>

#include "rankvol/calibration.hpp"
#include "rankvol/panel.hpp"
#include "rankvol/portfolios.hpp"

namespace rankvol {

struct ReportOptions {
  /// Models compared rank by rank.
  std::vector<double> lambdas{0.0, 0.11, 0.2};
  /// Extra points for the lambda trade-off table (merged with `lambdas`).
  std::vector<double> grid;
  /// Estimator settings, Monte-Carlo config and L2 cutoff.
  SweepOptions sweep;
  double p = kDefaultDiversityP;
  std::size_t n_open = 100;       // clamped to d
  std::size_t weight_ranks = 100;  // ranks listed in the portfolio weight table
  std::vector<std::size_t> tracked_ranks{1, 10, 100};
};

struct ReportFile {
  std::string name;
  std::string content;
};

/// Figure-data tables (CSV) plus report.json, computed from module outputs
/// only. `out_of_sample` may be null; when given it must have the same d.
std::vector<ReportFile> build_report(const PanelData& in_sample, const PanelData* out_of_sample,
                                     const ReportOptions& options);

}  // namespace rankvol
