#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rankvol/market_model.hpp"

namespace rankvol {

struct SimConfig {
  double dt = 1.0 / 2520.0;
  std::size_t substeps_per_sample = 10;
  double horizon = 1.0;
  std::size_t n_paths = 1;
  std::uint64_t seed = 0;
  double floor_eps = 1e-12;
  std::optional<std::size_t> top_m;

  void validate(std::size_t d) const;
  std::size_t n_steps() const;
};

/// Sampled path of the weight process. Weights are stored row-major
/// (sample-major); the ranking of each sample is cached as name_of_rank.
struct Trajectory {
  std::size_t d = 0;
  std::vector<double> times;
  std::vector<double> weights;
  std::vector<double> log_total_cap;
  std::vector<std::uint32_t> name_of_rank;
  /// Original name index of each simulated component (differs from the
  /// identity only in truncation mode).
  std::vector<std::size_t> source_names;
  double dt = 0.0;
  std::size_t steps = 0;
  std::size_t clamp_events = 0;

  std::size_t n_samples() const noexcept { return times.size(); }
  std::span<const double> sample(std::size_t i) const { return {weights.data() + i * d, d}; }
  std::size_t name_at_rank(std::size_t i, std::size_t k) const { return name_of_rank[i * d + k]; }
  double ranked_weight(std::size_t i, std::size_t k) const { return weights[i * d + name_at_rank(i, k)]; }
  RankedView ranked(std::size_t i) const;
  /// Capitalization S_i(t) = X_i(t) * exp(log S̄(t)).
  double cap(std::size_t i, std::size_t name) const;
};

struct StationaryMoments {
  std::vector<double> mu;
  std::vector<double> rho;
  std::vector<double> mu_stderr;
  std::vector<double> rho_stderr;
  /// Per-path statistics, n_paths x d row-major (terminal ranked weights, or
  /// their tail time averages).
  std::vector<double> path_mu;
  std::vector<double> path_rho;
  std::size_t n_paths = 0;
  double horizon = 0.0;
  bool time_averaged = false;
  std::size_t clamp_events = 0;
};

enum class MomentMode { terminal, tail_average };

/// Thrown when some Monte-Carlo paths fail; carries the failing path indices.
class PartialResultError : public Error {
 public:
  PartialResultError(std::vector<std::size_t> failed, const std::string& what)
      : Error(ErrorCode::numerical_blowup, what), failed_(std::move(failed)) {}
  const std::vector<std::size_t>& failed_paths() const noexcept { return failed_; }

 private:
  std::vector<std::size_t> failed_;
};

/// Seed of path `path_index`: splitmix64(master + (path_index + 1) * golden).
/// Each path owns an independent mt19937_64 stream seeded this way.
std::uint64_t path_seed(std::uint64_t master, std::uint64_t path_index) noexcept;

/// Euler increment of the weight SDE before clamping and renormalization.
/// `dw` holds Brownian increments (already scaled by sqrt(dt)); `order` must be
/// the current rank order of x. Returns the increment of log S̄ through
/// `log_cap_increment`.
void euler_increment(std::span<const double> x, const ModelParams& params, double dt, std::span<const double> dw,
                     std::span<const std::size_t> order, std::span<double> increment, double& log_cap_increment);

/// Adds `increment` to x, clamps entries below floor_eps at floor_eps and
/// renormalizes to the simplex. Returns the number of clamped entries.
std::size_t apply_increment(std::span<double> x, std::span<const double> increment, double floor_eps);

/// One Euler–Maruyama step driven by standard normal draws.
MarketState step_weights(const MarketState& state, const ModelParams& params, double dt,
                         std::span<const double> noise, double floor_eps = 1e-12);

/// Receives every sample of a running path: (sample index, time, weights,
/// rank order, log S̄).
using SampleObserver =
    std::function<void(std::size_t, double, std::span<const double>, std::span<const std::size_t>, double)>;

struct PathSummary {
  std::size_t steps = 0;
  std::size_t clamp_events = 0;
};

/// Streams a path driven by either an RNG (dw empty) or supplied Brownian
/// increments (dw of size n_steps * d). Trajectory-free core of the simulator.
PathSummary run_path(const ModelParams& params, std::span<const double> x0, const SimConfig& config,
                     std::uint64_t path_index, std::span<const double> dw, const SampleObserver& observe);

Trajectory simulate_path(const ModelParams& params, std::span<const double> x0, const SimConfig& config,
                         std::uint64_t path_index = 0);

/// Simulates with externally supplied Brownian increments (n_steps x d,
/// scaled by sqrt(dt)). Used for refinement studies on a fixed Brownian path.
Trajectory simulate_driven(const ModelParams& params, std::span<const double> x0, const SimConfig& config,
                           std::span<const double> dw);

/// Brownian increments of a path at step dt: n_steps x d, each N(0, dt).
std::vector<double> brownian_increments(std::uint64_t seed, std::uint64_t path_index, std::size_t d,
                                        std::size_t n_steps, double dt);

/// Sums consecutive groups of `factor` increments: the same Brownian path on a
/// grid `factor` times coarser.
std::vector<double> coarsen_increments(std::span<const double> dw, std::size_t d, std::size_t factor);

/// All config.n_paths paths, in path order, computed in parallel.
std::vector<Trajectory> simulate_paths(const ModelParams& params, std::span<const double> x0,
                                       const SimConfig& config);

inline constexpr std::size_t kMomentPaths = 50;
inline constexpr double kMomentHorizon = 100.0;

/// SimConfig defaults for stationary moments: 50 paths to 100 years.
inline SimConfig moment_config() {
  SimConfig c;
  c.n_paths = kMomentPaths;
  c.horizon = kMomentHorizon;
  return c;
}

/// Monte-Carlo moments of the stationary ranked weights. `x0` empty starts
/// every path at the uniform vector. tail_fraction applies to tail_average.
StationaryMoments stationary_moments(const ModelParams& params, const SimConfig& config,
                                     std::span<const double> x0 = {},
                                     MomentMode mode = MomentMode::terminal, double tail_fraction = 0.5);

/// Worker count: RANKVOL_THREADS if set, else hardware concurrency.
std::size_t worker_count();

}  // namespace rankvol
