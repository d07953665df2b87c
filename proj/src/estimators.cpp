#include "rankvol/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"

namespace rankvol {

namespace {

constexpr std::int32_t kAbsent = -1;

void require_dates(const PanelData& panel, const char* what) {
  if (panel.n_dates() < 2) fail(ErrorCode::invalid_input, std::string(what) + ": panel needs at least 2 dates");
}

// Rank position of each id on one date; reused across dates by clearing only
// the entries that were set.
class RankLookup {
 public:
  explicit RankLookup(std::size_t n_ids) : pos_(n_ids, kAbsent) {}

  void load(const PanelData& panel, std::size_t i) {
    clear(panel);
    date_ = i;
    for (std::size_t k = 0; k < panel.d; ++k) pos_[panel.member(i, k)] = static_cast<std::int32_t>(k);
    loaded_ = true;
  }

  std::int32_t operator[](std::uint32_t id) const { return pos_[id]; }

 private:
  void clear(const PanelData& panel) {
    if (!loaded_) return;
    for (std::size_t k = 0; k < panel.d; ++k) pos_[panel.member(date_, k)] = kAbsent;
  }

  std::vector<std::int32_t> pos_;
  std::size_t date_ = 0;
  bool loaded_ = false;
};

[[noreturn]] void delisted(const PanelData& panel, std::size_t i, std::size_t k, const char* what) {
  fail(ErrorCode::data_quality, std::string(what) + ": asset " + panel.id_names[panel.member(i, k)] + " at rank " +
                                    std::to_string(k + 1) + " on " + panel.date_labels[i] + " is absent on " +
                                    panel.date_labels[i + 1]);
}

// Shared loop of the two volatility estimators.
template <class Numerator>
std::vector<double> sigma2_sums(const PanelData& panel, DelistingPolicy policy, const char* what,
                                std::vector<std::size_t>& skipped, std::vector<std::size_t>& used, Numerator numerator) {
  const std::size_t d = panel.d;
  std::vector<double> num(d, 0.0), den(d, 0.0);
  skipped.assign(d, 0);
  used.assign(d, 0);
  RankLookup next(panel.id_names.size());
  for (std::size_t i = 0; i + 1 < panel.n_dates(); ++i) {
    next.load(panel, i + 1);
    const double dt = panel.times[i + 1] - panel.times[i];
    const double total = panel.total_cap(i);
    for (std::size_t k = 0; k < d; ++k) {
      const std::int32_t at = next[panel.member(i, k)];
      if (at == kAbsent) {
        if (policy == DelistingPolicy::strict) delisted(panel, i, k, what);
        ++skipped[k];
        continue;
      }
      ++used[k];
      const double inc = numerator(i, k, static_cast<std::size_t>(at));
      num[k] += inc * inc;
      den[k] += dt * total / panel.cap(i, k);
    }
  }
  std::vector<double> out(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) out[k] = den[k] > 0.0 ? num[k] / den[k] : 0.0;
  return out;
}

}  // namespace

std::vector<double> smooth_uniform(std::span<const double> v, std::size_t window) {
  require(window >= 1, "smoothing window must be at least 1");
  const std::size_t n = v.size();
  const std::size_t half = (window - 1) / 2;
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t reach = std::min({half, k, n - 1 - k});
    double s = 0.0;
    for (std::size_t j = k - reach; j <= k + reach; ++j) s += v[j];
    out[k] = s / static_cast<double>(2 * reach + 1);
  }
  return out;
}

Sigma2Estimate sigma2_hat(const PanelData& panel, std::size_t smoothing_window, DelistingPolicy policy) {
  require_dates(panel, "sigma2_hat");
  Sigma2Estimate est;
  est.raw = sigma2_sums(panel, policy, "sigma2_hat", est.skipped, est.used,
                        [&](std::size_t i, std::size_t k, std::size_t at) {
                          return std::log(panel.cap(i + 1, at)) - std::log(panel.cap(i, k));
                        });
  est.smoothed = smooth_uniform(est.raw, smoothing_window);
  for (std::size_t k = 0; k < panel.d; ++k) {
    const std::size_t n = est.skipped[k] + est.used[k];
    if (n > 0 && static_cast<double>(est.skipped[k]) > kSkipWarningShare * static_cast<double>(n)) {
      std::ostringstream msg;
      msg << "rank " << (k + 1) << ": " << est.skipped[k] << " of " << n
          << " increments skipped because the asset left the panel";
      est.warnings.push_back(msg.str());
    }
  }
  return est;
}

std::vector<double> sigma2_hat_ranked_variant(const PanelData& panel, DelistingPolicy policy) {
  require_dates(panel, "sigma2_hat_ranked_variant");
  std::vector<std::size_t> skipped, used;
  return sigma2_sums(panel, policy, "sigma2_hat_ranked_variant", skipped, used,
                     [&](std::size_t i, std::size_t k, std::size_t) {
                       return std::log(panel.cap(i + 1, k)) - std::log(panel.cap(i, k));
                     });
}

std::vector<double> name_change_share(const PanelData& panel) {
  require_dates(panel, "name_change_share");
  std::vector<double> share(panel.d, 0.0);
  const std::size_t steps = panel.n_dates() - 1;
  for (std::size_t i = 0; i < steps; ++i)
    for (std::size_t k = 0; k < panel.d; ++k)
      if (panel.member(i, k) != panel.member(i + 1, k)) share[k] += 1.0;
  for (double& s : share) s /= static_cast<double>(steps);
  return share;
}

namespace {

// Per-step quantities of the top-k buy-and-hold portfolio for every k at once.
// For step i and prefix k (0-based, holding ranks 0..k):
//   held[k] = sum of caps at t_{i+1} of the names ranked 0..k at t_i
//   top[k]  = sum of the k+1 largest caps at t_{i+1}
//   same[k] = the two name sets coincide
//   valid[k] = every name ranked 0..k at t_i is still in the panel at t_{i+1}
struct TopStep {
  std::vector<double> held, top;
  std::vector<char> same, valid;

  explicit TopStep(std::size_t d) : held(d), top(d), same(d), valid(d) {}

  void compute(const PanelData& panel, const RankLookup& next, std::size_t i) {
    double h = 0.0, t = 0.0;
    std::int32_t max_rank = -1;
    bool ok = true;
    for (std::size_t k = 0; k < panel.d; ++k) {
      const std::int32_t at = next[panel.member(i, k)];
      if (at == kAbsent) ok = false;
      else {
        h += panel.cap(i + 1, static_cast<std::size_t>(at));
        max_rank = std::max(max_rank, at);
      }
      t += panel.cap(i + 1, k);
      held[k] = h;
      top[k] = t;
      valid[k] = ok;
      same[k] = ok && max_rank == static_cast<std::int32_t>(k);
    }
  }
};

}  // namespace

PhibarEstimate phibar_hat(const PanelData& panel, DelistingPolicy policy) {
  require_dates(panel, "phibar_hat");
  const std::size_t d = panel.d;
  std::vector<double> sum(d, 0.0), elapsed(d, 0.0);
  PhibarEstimate est;
  est.skipped.assign(d, 0);
  RankLookup next(panel.id_names.size());
  TopStep step(d);
  for (std::size_t i = 0; i + 1 < panel.n_dates(); ++i) {
    next.load(panel, i + 1);
    step.compute(panel, next, i);
    const double dt = panel.times[i + 1] - panel.times[i];
    const double total = panel.total_cap(i);
    double top_cap = 0.0;
    for (std::size_t k = 0; k + 1 < d; ++k) {
      top_cap += panel.cap(i, k);
      if (!step.valid[k]) {
        if (policy == DelistingPolicy::strict) {
          for (std::size_t j = 0; j <= k; ++j)
            if (next[panel.member(i, j)] == kAbsent) delisted(panel, i, j, "phibar_hat");
        }
        ++est.skipped[k];
        continue;
      }
      elapsed[k] += dt;
      if (step.same[k]) continue;
      sum[k] += top_cap / total * std::log(step.top[k] / step.held[k]);
    }
  }
  est.phibar.assign(d, 0.0);
  for (std::size_t k = 0; k + 1 < d; ++k) est.phibar[k] = elapsed[k] > 0.0 ? sum[k] / elapsed[k] : 0.0;
  return est;
}

std::vector<double> phi_hat(std::span<const double> phibar) {
  require(!phibar.empty(), "phi_hat: empty input");
  require(phibar.back() == 0.0, "phi_hat: last collision sum must be 0");
  std::vector<double> phi(phibar.size());
  phi[0] = phibar[0];
  for (std::size_t k = 1; k < phibar.size(); ++k) phi[k] = phibar[k] - phibar[k - 1];
  return phi;
}

RankMoments moment_hats(const PanelData& panel, std::span<const double> sigma2) {
  require_dates(panel, "moment_hats");
  require(sigma2.size() == panel.d, "moment_hats: sigma2 length must equal d");
  const std::size_t d = panel.d;
  const std::size_t n = panel.n_dates() - 1;
  RankMoments m{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = panel.ranked_weights(i);
    double spot = 0.0;
    for (std::size_t j = 0; j < d; ++j) spot += sigma2[j] * x[j];
    for (std::size_t k = 0; k < d; ++k) {
      m.mu[k] += x[k];
      m.rho[k] += x[k] * spot;
    }
  }
  for (std::size_t k = 0; k < d; ++k) {
    m.mu[k] /= static_cast<double>(n);
    m.rho[k] /= static_cast<double>(n);
  }
  return m;
}

LambdaEstimate lambda_hat(const PanelData& panel) {
  require_dates(panel, "lambda_hat");
  const double span = panel.span_years();
  require(span > 0.0, "lambda_hat: panel spans zero time");
  double sum = 0.0;
  double prev = panel.total_cap(0);
  const double first = prev;
  for (std::size_t i = 1; i < panel.n_dates(); ++i) {
    const double cur = panel.total_cap(i);
    sum += (cur - prev) / prev;
    prev = cur;
  }
  return {sum / span, std::log(prev / first) / span};
}

std::vector<double> a_hat(std::span<const double> mu, std::span<const double> rho, std::span<const double> phi,
                          std::span<const double> sigma2, double lambda) {
  const std::size_t d = mu.size();
  require(rho.size() == d && phi.size() == d && sigma2.size() == d, "a_hat: vectors must share length d");
  require(std::isfinite(lambda), "a_hat: lambda must be finite");
  std::vector<double> a(d);
  double total = 0.0, scale = std::max(1.0, std::abs(lambda));
  for (std::size_t k = 0; k < d; ++k) {
    a[k] = lambda * mu[k] + sigma2[k] * mu[k] - rho[k] - phi[k];
    total += a[k];
    scale = std::max(scale, std::abs(lambda * mu[k]) + std::abs(sigma2[k] * mu[k]) + std::abs(rho[k]) +
                                std::abs(phi[k]));
  }
  if (std::abs(total - lambda) > 1e-12 * scale * static_cast<double>(std::max<std::size_t>(d, 1))) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "a_hat: entries sum to " << total << " but lambda is " << lambda
        << "; mu, rho, phi and sigma2 do not come from one panel";
    fail(ErrorCode::inconsistent_inputs, msg.str());
  }
  return a;
}

LeakageCheck leakage_check(const PanelData& panel, std::size_t k) {
  require_dates(panel, "leakage_check");
  require(k >= 1 && k < panel.d, "leakage_check: k must satisfy 1 <= k < d");
  const std::size_t kk = k - 1;
  const double span = panel.span_years();
  require(span > 0.0, "leakage_check: panel spans zero time");

  RankLookup next(panel.id_names.size());
  TopStep step(panel.d);
  double drift = 0.0;
  for (std::size_t i = 0; i + 1 < panel.n_dates(); ++i) {
    next.load(panel, i + 1);
    step.compute(panel, next, i);
    if (!step.valid[kk] || step.same[kk]) continue;
    drift -= (step.top[kk] - step.held[kk]) / panel.total_cap(i + 1);
  }
  auto top_weight = [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += panel.cap(i, j);
    return s / panel.total_cap(i);
  };

  LeakageCheck out;
  out.lhs = drift / span;
  out.rhs = -phibar_hat(panel).phibar[kk];
  out.boundary = (top_weight(panel.n_dates() - 1) - top_weight(0)) / span;
  out.relative_wealth_drift = out.lhs + out.boundary;
  return out;
}

EstimateSet estimate_all(const PanelData& panel, const EstimatorOptions& options) {
  panel.validate();
  EstimateSet es;
  es.d = panel.d;
  es.smoothing_window = options.smoothing_window;
  es.delisting = options.delisting;

  auto s2 = sigma2_hat(panel, options.smoothing_window, options.delisting);
  es.sigma2_raw = std::move(s2.raw);
  es.sigma2 = std::move(s2.smoothed);
  es.sigma2_skipped = std::move(s2.skipped);
  es.warnings = std::move(s2.warnings);

  auto pb = phibar_hat(panel, options.delisting);
  es.phibar = std::move(pb.phibar);
  es.phibar_skipped = std::move(pb.skipped);
  es.phi = phi_hat(es.phibar);

  auto m = moment_hats(panel, es.sigma2);
  es.mu = std::move(m.mu);
  es.rho = std::move(m.rho);
  es.lambda_hat = lambda_hat(panel);
  es.first_date = panel.date_labels.front();
  es.last_date = panel.date_labels.back();
  es.span_years = panel.span_years();
  return es;
}

std::string EstimateSet::to_csv() const {
  std::ostringstream out;
  out << "rank,sigma2_raw,sigma2,phibar,phi,mu,rho,a\n";
  using detail::format_double;
  for (std::size_t k = 0; k < d; ++k) {
    out << (k + 1) << ',' << format_double(sigma2_raw[k]) << ',' << format_double(sigma2[k]) << ','
        << format_double(phibar[k]) << ',' << format_double(phi[k]) << ',' << format_double(mu[k]) << ','
        << format_double(rho[k]) << ',';
    if (a) out << format_double((*a)[k]);
    out << '\n';
  }
  return out.str();
}

std::string EstimateSet::header_json() const {
  nlohmann::ordered_json j;
  j["d"] = d;
  j["first_date"] = first_date;
  j["last_date"] = last_date;
  j["span_years"] = span_years;
  j["lambda_hat_arithmetic"] = lambda_hat.arithmetic;
  j["lambda_hat_log_growth"] = lambda_hat.log_growth;
  if (lambda) j["lambda"] = *lambda;
  j["smoothing_window"] = smoothing_window;
  j["delisting_policy"] = delisting == DelistingPolicy::drop ? "drop" : "strict";
  j["sigma2_skipped"] = sigma2_skipped;
  j["phibar_skipped"] = phibar_skipped;
  j["warnings"] = warnings;
  return j.dump(2);
}

}  // namespace rankvol
