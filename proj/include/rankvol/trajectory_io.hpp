#pragma once

#include <string>

#include "rankvol/simulator.hpp"

namespace rankvol {

/// Long CSV: time,rank,weight,log_total_cap with one row per (sample, rank).
std::string trajectory_csv(const Trajectory& traj);
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
/// Reads the CSV above. Names are lost, so weights come back in rank order.
Trajectory read_trajectory_csv(const std::string& path);

/// Little-endian binary: "RVSM", version u32, d u32, n_samples u64, then
/// n_samples x d f64 weights by name, n_samples f64 times, n_samples f64 log S̄.
void save_trajectory(const Trajectory& traj, const std::string& path);
/// Rank orders are rebuilt from the weights (ties to the lower index); step
/// counts and clamp counts are not stored.
Trajectory load_trajectory(const std::string& path);

}  // namespace rankvol
