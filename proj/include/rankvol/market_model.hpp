#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rankvol/error.hpp"

namespace rankvol {

/// Absolute tolerance for the simplex constraint on returned weight vectors.
inline constexpr double kSimplexTolerance = 1e-12;
/// Deviation from the simplex beyond which an input is treated as a logic error
/// rather than float drift.
inline constexpr double kSimplexHardLimit = 1e-9;

/// Per-rank parameters of the rank volatility stabilized model. Index k is the
/// 0-based rank (rank 1 in file formats is index 0 here). The market growth
/// rate lambda is always the sum of the growth vector.
class ModelParams {
 public:
  ModelParams(std::vector<double> a, std::vector<double> sigma2);

  std::size_t d() const noexcept { return a_.size(); }
  const std::vector<double>& a() const noexcept { return a_; }
  const std::vector<double>& sigma2() const noexcept { return sigma2_; }
  double a(std::size_t k) const { return a_[k]; }
  double sigma2(std::size_t k) const { return sigma2_[k]; }
  double lambda() const noexcept;

  /// Model restricted to the top m ranks.
  ModelParams truncated(std::size_t m) const;

  std::string to_json() const;
  static ModelParams from_json(const std::string& text);
  static ModelParams load(const std::string& path);
  void save(const std::string& path) const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  std::vector<double> a_;
  std::vector<double> sigma2_;
};

struct MarketState {
  double t = 0.0;
  std::vector<double> x;
  double log_total_cap = 0.0;
};

/// Descending order statistics of a weight vector together with the name/rank
/// permutations. Ties go to the lower index.
struct RankedView {
  std::vector<double> ranked;
  std::vector<std::size_t> name_of_rank;
  std::vector<std::size_t> rank_of_name;
};

struct FellerReport {
  /// margins[j] belongs to rank k = j + 2 (1-based), i.e. k = 2..d.
  std::vector<double> margins;
  bool satisfied = true;
};

RankedView rank_names(std::span<const double> x);

/// Fills `order` with the names sorted by descending weight (ties: lower index
/// first). `order` may hold a previous ordering; an insertion sort from there
/// runs in linear time when ranks barely change between calls.
void update_rank_order(std::span<const double> x, std::vector<std::size_t>& order);

FellerReport feller_check(const ModelParams& params);

double market_spot_variance(std::span<const double> x, const ModelParams& params);

/// Rejects vectors that are not strictly inside the simplex (entries > 0,
/// |sum - 1| <= kSimplexHardLimit).
void validate_interior(std::span<const double> x, const char* what);

/// Divides by the sum. Throws if the pre-normalization sum is off by more than
/// kSimplexHardLimit when `strict` is set.
void renormalize(std::span<double> x, bool strict = false);

}  // namespace rankvol
