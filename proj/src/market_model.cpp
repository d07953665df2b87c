#include "rankvol/market_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace rankvol {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid input";
    case ErrorCode::numerical_blowup: return "numerical blowup";
    case ErrorCode::data_quality: return "data quality";
    case ErrorCode::inconsistent_inputs: return "inconsistent inputs";
    case ErrorCode::undefined_horizon: return "undefined horizon";
    case ErrorCode::bankruptcy: return "wealth bankruptcy";
    case ErrorCode::io: return "i/o";
  }
  return "unknown";
}

ModelParams::ModelParams(std::vector<double> a, std::vector<double> sigma2)
    : a_(std::move(a)), sigma2_(std::move(sigma2)) {
  require(a_.size() >= 2, "ModelParams: need d >= 2 ranks");
  require(a_.size() == sigma2_.size(), "ModelParams: a and sigma2 differ in length");
  for (std::size_t k = 0; k < a_.size(); ++k) {
    require(std::isfinite(a_[k]), "ModelParams: non-finite growth rate at rank " + std::to_string(k + 1));
    require(std::isfinite(sigma2_[k]) && sigma2_[k] > 0.0,
            "ModelParams: sigma2 must be positive at rank " + std::to_string(k + 1));
  }
}

double ModelParams::lambda() const noexcept { return std::accumulate(a_.begin(), a_.end(), 0.0); }

ModelParams ModelParams::truncated(std::size_t m) const {
  require(m >= 2 && m <= d(), "ModelParams::truncated: need 2 <= m <= d");
  return ModelParams({a_.begin(), a_.begin() + static_cast<std::ptrdiff_t>(m)},
                     {sigma2_.begin(), sigma2_.begin() + static_cast<std::ptrdiff_t>(m)});
}

std::string ModelParams::to_json() const {
  nlohmann::ordered_json j;
  j["d"] = d();
  j["a"] = a_;
  j["sigma2"] = sigma2_;
  return j.dump(2);
}

ModelParams ModelParams::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::invalid_input, std::string("ModelParams: malformed JSON: ") + e.what());
  }
  require(j.is_object() && j.contains("a") && j.contains("sigma2"),
          "ModelParams: JSON needs keys \"a\" and \"sigma2\"");
  std::vector<double> a, s2;
  try {
    a = j.at("a").get<std::vector<double>>();
    s2 = j.at("sigma2").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::invalid_input, std::string("ModelParams: ") + e.what());
  }
  if (j.contains("d")) {
    require(j["d"].is_number_integer() && j["d"].get<std::size_t>() == a.size(),
            "ModelParams: \"d\" does not match the vector lengths");
  }
  return ModelParams(std::move(a), std::move(s2));
}

ModelParams ModelParams::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open params file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void ModelParams::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write params file " + path);
  out << to_json() << '\n';
}

namespace {

// Rank order: larger weight first, then smaller index.
inline bool ranks_before(std::span<const double> x, std::size_t i, std::size_t j) {
  return x[i] > x[j] || (x[i] == x[j] && i < j);
}

}  // namespace

void update_rank_order(std::span<const double> x, std::vector<std::size_t>& order) {
  const std::size_t d = x.size();
  if (order.size() != d) {
    order.resize(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  for (std::size_t k = 1; k < d; ++k) {
    const std::size_t name = order[k];
    std::size_t j = k;
    while (j > 0 && ranks_before(x, name, order[j - 1])) {
      order[j] = order[j - 1];
      --j;
    }
    order[j] = name;
  }
}

RankedView rank_names(std::span<const double> x) {
  require(x.size() >= 1, "rank_names: empty weight vector");
  for (double v : x) require(std::isfinite(v), "rank_names: non-finite weight");
  RankedView view;
  view.name_of_rank.resize(x.size());
  std::iota(view.name_of_rank.begin(), view.name_of_rank.end(), std::size_t{0});
  std::stable_sort(view.name_of_rank.begin(), view.name_of_rank.end(),
                   [&](std::size_t i, std::size_t j) { return x[i] > x[j]; });
  view.ranked.resize(x.size());
  view.rank_of_name.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    view.ranked[k] = x[view.name_of_rank[k]];
    view.rank_of_name[view.name_of_rank[k]] = k;
  }
  return view;
}

FellerReport feller_check(const ModelParams& params) {
  const std::size_t d = params.d();
  FellerReport report;
  report.margins.resize(d - 1);
  double tail_sum = 0.0;
  double tail_max = 0.0;
  // Walk from the bottom rank up; margins[k-1] belongs to 0-based rank k.
  for (std::size_t k = d; k-- > 1;) {
    tail_sum += params.a(k);
    tail_max = std::max(tail_max, 0.5 * params.sigma2(k));
    report.margins[k - 1] = tail_sum - tail_max;
  }
  report.satisfied = std::all_of(report.margins.begin(), report.margins.end(),
                                 [](double m) { return m >= 0.0; });
  return report;
}

double market_spot_variance(std::span<const double> x, const ModelParams& params) {
  require(x.size() == params.d(), "market_spot_variance: dimension mismatch");
  const RankedView view = rank_names(x);
  double v = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) v += params.sigma2(k) * view.ranked[k];
  return v;
}

void validate_interior(std::span<const double> x, const char* what) {
  double sum = 0.0;
  for (double v : x) {
    if (!std::isfinite(v) || v <= 0.0)
      fail(ErrorCode::invalid_input, std::string(what) + ": weights must be finite and strictly positive");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexHardLimit)
    fail(ErrorCode::invalid_input, std::string(what) + ": weights do not sum to one");
}

void renormalize(std::span<double> x, bool strict) {
  double sum = 0.0;
  for (double v : x) sum += v;
  if (strict && std::abs(sum - 1.0) > kSimplexHardLimit)
    fail(ErrorCode::inconsistent_inputs, "weight vector left the simplex before renormalization");
  for (double& v : x) v /= sum;
}

}  // namespace rankvol
