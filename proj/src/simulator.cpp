#include "rankvol/simulator.hpp"

#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include "parallel.hpp"

namespace rankvol {

void SimConfig::validate(std::size_t d) const {
  require(std::isfinite(dt) && dt > 0.0, "SimConfig: dt must be positive");
  require(substeps_per_sample >= 1, "SimConfig: substeps_per_sample must be >= 1");
  require(std::isfinite(horizon) && horizon >= 0.0, "SimConfig: horizon must be non-negative");
  require(n_paths >= 1, "SimConfig: n_paths must be >= 1");
  require(floor_eps > 0.0, "SimConfig: floor_eps must be positive");
  if (top_m) require(*top_m >= 2 && *top_m <= d, "SimConfig: top_m must satisfy 2 <= top_m <= d");
  const double dd = static_cast<double>(top_m ? *top_m : d);
  require(floor_eps < 1.0 / (dd * dd), "SimConfig: floor_eps must be below 1/d^2");
}

std::size_t SimConfig::n_steps() const { return static_cast<std::size_t>(std::llround(horizon / dt)); }

RankedView Trajectory::ranked(std::size_t i) const {
  RankedView v;
  v.ranked.resize(d);
  v.name_of_rank.resize(d);
  v.rank_of_name.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t name = name_at_rank(i, k);
    v.name_of_rank[k] = name;
    v.rank_of_name[name] = k;
    v.ranked[k] = weights[i * d + name];
  }
  return v;
}

double Trajectory::cap(std::size_t i, std::size_t name) const {
  return weights[i * d + name] * std::exp(log_total_cap[i]);
}

std::uint64_t path_seed(std::uint64_t master, std::uint64_t path_index) noexcept {
  std::uint64_t z = master + (path_index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void euler_increment(std::span<const double> x, const ModelParams& params, double dt, std::span<const double> dw,
                     std::span<const std::size_t> order, std::span<double> increment, double& log_cap_increment) {
  const std::size_t d = x.size();
  double spot = 0.0;
  double common = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t i = order[k];
    spot += params.sigma2(k) * x[i];
    common += std::sqrt(params.sigma2(k) * x[i]) * dw[i];
  }
  const double lambda = params.lambda();
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t i = order[k];
    const double drift = params.a(k) - lambda * x[i] - params.sigma2(k) * x[i] + x[i] * spot;
    increment[i] = drift * dt + std::sqrt(params.sigma2(k) * x[i]) * dw[i] - x[i] * common;
  }
  log_cap_increment = (lambda - 0.5 * spot) * dt + common;
}

std::size_t apply_increment(std::span<double> x, std::span<const double> increment, double floor_eps) {
  std::size_t clamped = 0;
  double free_mass = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] += increment[i];
    if (x[i] <= floor_eps) {
      x[i] = floor_eps;
      ++clamped;
    } else {
      free_mass += x[i];
    }
  }
  // Clamped entries stay at the floor exactly; the rest absorb the excess.
  const double scale = (1.0 - static_cast<double>(clamped) * floor_eps) / free_mass;
  for (double& v : x)
    if (v != floor_eps) v *= scale;
  return clamped;
}

MarketState step_weights(const MarketState& state, const ModelParams& params, double dt,
                         std::span<const double> noise, double floor_eps) {
  const std::size_t d = params.d();
  require(state.x.size() == d && noise.size() == d, "step_weights: dimension mismatch");
  require(dt > 0.0, "step_weights: dt must be positive");
  validate_interior(state.x, "step_weights");
  std::vector<std::size_t> order;
  update_rank_order(state.x, order);
  std::vector<double> dw(d), incr(d);
  const double sq = std::sqrt(dt);
  for (std::size_t i = 0; i < d; ++i) dw[i] = noise[i] * sq;
  double dlog = 0.0;
  euler_increment(state.x, params, dt, dw, order, incr, dlog);
  MarketState next{state.t + dt, state.x, state.log_total_cap + dlog};
  apply_increment(next.x, incr, floor_eps);
  for (double v : next.x)
    if (!std::isfinite(v)) throw NumericalBlowup(0, next.t, "step_weights: non-finite weight after step");
  if (!std::isfinite(next.log_total_cap)) throw NumericalBlowup(0, next.t, "step_weights: non-finite log cap");
  return next;
}

PathSummary run_path(const ModelParams& full_params, std::span<const double> x0, const SimConfig& config,
                     std::uint64_t path_index, std::span<const double> dw, const SampleObserver& observe) {
  require(x0.size() == full_params.d(), "simulate: x0 dimension does not match params");
  validate_interior(x0, "simulate: x0");
  config.validate(full_params.d());

  std::vector<double> x(x0.begin(), x0.end());
  std::optional<ModelParams> truncated;
  if (config.top_m && *config.top_m < full_params.d()) {
    const RankedView view = rank_names(x0);
    x.assign(view.ranked.begin(), view.ranked.begin() + static_cast<std::ptrdiff_t>(*config.top_m));
    renormalize(x);
    truncated = full_params.truncated(*config.top_m);
  }
  const ModelParams& params = truncated ? *truncated : full_params;
  const std::size_t d = params.d();
  const std::size_t n_steps = config.n_steps();
  require(dw.empty() || dw.size() == n_steps * d, "simulate: Brownian increments have the wrong size");

  std::mt19937_64 rng(path_seed(config.seed, path_index));
  std::normal_distribution<double> normal;
  const double sq = std::sqrt(config.dt);

  std::vector<std::size_t> order;
  update_rank_order(x, order);
  std::vector<double> step_dw(d), incr(d);
  double log_cap = 0.0;
  PathSummary summary;
  summary.steps = n_steps;
  std::size_t sample = 0;
  observe(sample++, 0.0, x, order, log_cap);

  for (std::size_t step = 1; step <= n_steps; ++step) {
    if (dw.empty()) {
      for (double& v : step_dw) v = normal(rng) * sq;
    } else {
      std::copy_n(dw.begin() + static_cast<std::ptrdiff_t>((step - 1) * d), d, step_dw.begin());
    }
    double dlog = 0.0;
    euler_increment(x, params, config.dt, step_dw, order, incr, dlog);
    summary.clamp_events += apply_increment(x, incr, config.floor_eps);
    log_cap += dlog;
    const double t = static_cast<double>(step) * config.dt;
    bool finite = std::isfinite(log_cap);
    for (double v : x) finite = finite && std::isfinite(v);
    if (!finite)
      throw NumericalBlowup(step, t, "simulate: non-finite state at step " + std::to_string(step) + " (t=" +
                                         std::to_string(t) + ")");
    update_rank_order(x, order);
    if (step % config.substeps_per_sample == 0 || step == n_steps) observe(sample++, t, x, order, log_cap);
  }
  return summary;
}

namespace {

Trajectory record_path(const ModelParams& params, std::span<const double> x0, const SimConfig& config,
                       std::uint64_t path_index, std::span<const double> dw) {
  Trajectory traj;
  const std::size_t n_samples_hint = config.n_steps() / config.substeps_per_sample + 2;
  const SampleObserver observe = [&](std::size_t, double t, std::span<const double> x,
                                     std::span<const std::size_t> order, double log_cap) {
    if (traj.d == 0) {
      traj.d = x.size();
      traj.times.reserve(n_samples_hint);
      traj.log_total_cap.reserve(n_samples_hint);
      traj.weights.reserve(n_samples_hint * x.size());
      traj.name_of_rank.reserve(n_samples_hint * x.size());
    }
    traj.times.push_back(t);
    traj.log_total_cap.push_back(log_cap);
    traj.weights.insert(traj.weights.end(), x.begin(), x.end());
    for (std::size_t name : order) traj.name_of_rank.push_back(static_cast<std::uint32_t>(name));
  };
  const PathSummary summary = run_path(params, x0, config, path_index, dw, observe);
  traj.dt = config.dt;
  traj.steps = summary.steps;
  traj.clamp_events = summary.clamp_events;
  if (config.top_m && *config.top_m < params.d()) {
    const RankedView view = rank_names(x0);
    traj.source_names.assign(view.name_of_rank.begin(),
                             view.name_of_rank.begin() + static_cast<std::ptrdiff_t>(*config.top_m));
  } else {
    traj.source_names.resize(params.d());
    for (std::size_t i = 0; i < params.d(); ++i) traj.source_names[i] = i;
  }
  return traj;
}

}  // namespace

Trajectory simulate_path(const ModelParams& params, std::span<const double> x0, const SimConfig& config,
                         std::uint64_t path_index) {
  return record_path(params, x0, config, path_index, {});
}

Trajectory simulate_driven(const ModelParams& params, std::span<const double> x0, const SimConfig& config,
                           std::span<const double> dw) {
  require(!dw.empty(), "simulate_driven: no Brownian increments supplied");
  return record_path(params, x0, config, 0, dw);
}

std::vector<double> brownian_increments(std::uint64_t seed, std::uint64_t path_index, std::size_t d,
                                        std::size_t n_steps, double dt) {
  std::mt19937_64 rng(path_seed(seed, path_index));
  std::normal_distribution<double> normal;
  const double sq = std::sqrt(dt);
  std::vector<double> dw(n_steps * d);
  for (double& v : dw) v = normal(rng) * sq;
  return dw;
}

std::vector<double> coarsen_increments(std::span<const double> dw, std::size_t d, std::size_t factor) {
  require(factor >= 1 && d >= 1, "coarsen_increments: bad factor");
  const std::size_t n_fine = dw.size() / d;
  require(n_fine % factor == 0, "coarsen_increments: step count not divisible by factor");
  std::vector<double> out((n_fine / factor) * d, 0.0);
  for (std::size_t s = 0; s < n_fine; ++s)
    for (std::size_t i = 0; i < d; ++i) out[(s / factor) * d + i] += dw[s * d + i];
  return out;
}

std::vector<Trajectory> simulate_paths(const ModelParams& params, std::span<const double> x0,
                                       const SimConfig& config) {
  std::vector<Trajectory> out(config.n_paths);
  detail::parallel_for(config.n_paths, [&](std::size_t p) { out[p] = simulate_path(params, x0, config, p); });
  return out;
}

StationaryMoments stationary_moments(const ModelParams& full_params, const SimConfig& config,
                                     std::span<const double> x0, MomentMode mode, double tail_fraction) {
  require(tail_fraction > 0.0 && tail_fraction <= 1.0, "stationary_moments: tail_fraction must be in (0, 1]");
  std::vector<double> uniform;
  if (x0.empty()) {
    uniform.assign(full_params.d(), 1.0 / static_cast<double>(full_params.d()));
    x0 = uniform;
  }
  const std::size_t d = (config.top_m && *config.top_m < full_params.d()) ? *config.top_m : full_params.d();
  const ModelParams params = d < full_params.d() ? full_params.truncated(d) : full_params;
  const std::size_t n = config.n_paths;
  const double tail_start = (1.0 - tail_fraction) * config.horizon;

  StationaryMoments m;
  m.n_paths = n;
  m.horizon = config.horizon;
  m.time_averaged = mode == MomentMode::tail_average;
  m.path_mu.assign(n * d, 0.0);
  m.path_rho.assign(n * d, 0.0);
  std::vector<std::size_t> clamps(n, 0);
  std::vector<char> failed(n, 0);
  std::vector<std::string> messages(n);

  detail::parallel_for(n, [&](std::size_t p) {
    std::span<double> mu_row(m.path_mu.data() + p * d, d);
    std::span<double> rho_row(m.path_rho.data() + p * d, d);
    std::size_t count = 0;
    const SampleObserver observe = [&](std::size_t, double t, std::span<const double> x,
                                       std::span<const std::size_t> order, double) {
      const bool terminal = std::abs(t - config.horizon) <= 0.5 * config.dt;
      if (mode == MomentMode::terminal ? !terminal : t < tail_start - 1e-12) return;
      if (mode == MomentMode::terminal) {
        std::fill(mu_row.begin(), mu_row.end(), 0.0);
        std::fill(rho_row.begin(), rho_row.end(), 0.0);
        count = 0;
      }
      double spot = 0.0;
      for (std::size_t k = 0; k < d; ++k) spot += params.sigma2(k) * x[order[k]];
      for (std::size_t k = 0; k < d; ++k) {
        mu_row[k] += x[order[k]];
        rho_row[k] += x[order[k]] * spot;
      }
      ++count;
    };
    try {
      clamps[p] = run_path(full_params, x0, config, p, {}, observe).clamp_events;
    } catch (const NumericalBlowup& e) {
      failed[p] = 1;
      messages[p] = e.what();
      return;
    }
    for (std::size_t k = 0; k < d; ++k) {
      mu_row[k] /= static_cast<double>(count);
      rho_row[k] /= static_cast<double>(count);
    }
  });

  std::vector<std::size_t> failed_paths;
  for (std::size_t p = 0; p < n; ++p)
    if (failed[p]) failed_paths.push_back(p);
  if (!failed_paths.empty()) {
    std::string msg = "stationary_moments: " + std::to_string(failed_paths.size()) + " path(s) failed:";
    for (std::size_t p : failed_paths) msg += " " + std::to_string(p);
    msg += " (first: " + messages[failed_paths.front()] + ")";
    throw PartialResultError(std::move(failed_paths), msg);
  }

  m.mu.assign(d, 0.0);
  m.rho.assign(d, 0.0);
  m.mu_stderr.assign(d, 0.0);
  m.rho_stderr.assign(d, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    m.clamp_events += clamps[p];
    for (std::size_t k = 0; k < d; ++k) {
      m.mu[k] += m.path_mu[p * d + k];
      m.rho[k] += m.path_rho[p * d + k];
    }
  }
  const double nn = static_cast<double>(n);
  for (std::size_t k = 0; k < d; ++k) {
    m.mu[k] /= nn;
    m.rho[k] /= nn;
  }
  if (n > 1) {
    for (std::size_t k = 0; k < d; ++k) {
      double vm = 0.0, vr = 0.0;
      for (std::size_t p = 0; p < n; ++p) {
        vm += std::pow(m.path_mu[p * d + k] - m.mu[k], 2);
        vr += std::pow(m.path_rho[p * d + k] - m.rho[k], 2);
      }
      m.mu_stderr[k] = std::sqrt(vm / (nn - 1.0) / nn);
      m.rho_stderr[k] = std::sqrt(vr / (nn - 1.0) / nn);
    }
  }
  return m;
}

std::size_t worker_count() {
  if (const char* env = std::getenv("RANKVOL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace rankvol
