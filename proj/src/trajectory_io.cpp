#include "rankvol/trajectory_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"

namespace rankvol {

namespace {

constexpr std::uint32_t kTrajectoryVersion = 1;

void rebuild_orders(Trajectory& traj) {
  traj.name_of_rank.assign(traj.n_samples() * traj.d, 0);
  for (std::size_t i = 0; i < traj.n_samples(); ++i) {
    const RankedView view = rank_names(traj.sample(i));
    for (std::size_t k = 0; k < traj.d; ++k) traj.name_of_rank[i * traj.d + k] = static_cast<std::uint32_t>(view.name_of_rank[k]);
  }
  traj.source_names.resize(traj.d);
  for (std::size_t i = 0; i < traj.d; ++i) traj.source_names[i] = i;
  if (traj.n_samples() >= 2) traj.dt = traj.times[1] - traj.times[0];
}

double parse_number(std::string_view field, const std::string& path, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    fail(ErrorCode::invalid_input, path + ":" + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  return v;
}

}  // namespace

std::string trajectory_csv(const Trajectory& traj) {
  using detail::format_double;
  std::ostringstream out;
  out << "time,rank,weight,log_total_cap\n";
  for (std::size_t i = 0; i < traj.n_samples(); ++i) {
    const std::string t = format_double(traj.times[i]);
    const std::string c = format_double(traj.log_total_cap[i]);
    for (std::size_t k = 0; k < traj.d; ++k)
      out << t << ',' << (k + 1) << ',' << format_double(traj.ranked_weight(i, k)) << ',' << c << '\n';
  }
  return out.str();
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << trajectory_csv(traj);
  if (!out) fail(ErrorCode::io, "write failed: " + path);
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line.rfind("time,rank,weight,log_total_cap", 0) != 0)
    fail(ErrorCode::invalid_input, path + ":1: expected header time,rank,weight,log_total_cap");
  Trajectory traj;
  std::size_t expected_rank = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view rest(line);
    std::string_view f[4];
    for (int c = 0; c < 4; ++c) {
      const auto comma = rest.find(',');
      if ((comma == std::string_view::npos) != (c == 3))
        fail(ErrorCode::invalid_input, path + ":" + std::to_string(line_no) + ": expected 4 fields");
      f[c] = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    const double t = parse_number(f[0], path, line_no);
    const auto rank = static_cast<std::size_t>(parse_number(f[1], path, line_no));
    if (rank == 1) {
      if (!traj.times.empty() && traj.d == 0) traj.d = expected_rank - 1;
      if (!traj.times.empty() && expected_rank - 1 != traj.d)
        fail(ErrorCode::invalid_input, path + ":" + std::to_string(line_no) + ": sample has the wrong number of ranks");
      traj.times.push_back(t);
      traj.log_total_cap.push_back(parse_number(f[3], path, line_no));
      expected_rank = 1;
    }
    if (rank != expected_rank || traj.times.empty())
      fail(ErrorCode::invalid_input, path + ":" + std::to_string(line_no) + ": ranks must run 1..d per sample");
    traj.weights.push_back(parse_number(f[2], path, line_no));
    ++expected_rank;
  }
  if (traj.times.empty()) fail(ErrorCode::invalid_input, path + ": no samples");
  if (traj.d == 0) traj.d = expected_rank - 1;
  if (traj.weights.size() != traj.d * traj.times.size())
    fail(ErrorCode::invalid_input, path + ": last sample has the wrong number of ranks");
  rebuild_orders(traj);
  return traj;
}

void save_trajectory(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out.write("RVSM", 4);
  detail::put(out, kTrajectoryVersion);
  detail::put(out, static_cast<std::uint32_t>(traj.d));
  detail::put(out, static_cast<std::uint64_t>(traj.n_samples()));
  detail::put_array(out, traj.weights);
  detail::put_array(out, traj.times);
  detail::put_array(out, traj.log_total_cap);
  if (!out) fail(ErrorCode::io, "write failed: " + path);
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  detail::expect_magic(in, "RVSM", path);
  const auto version = detail::get<std::uint32_t>(in);
  if (version != kTrajectoryVersion) fail(ErrorCode::io, path + ": unsupported trajectory version " + std::to_string(version));
  Trajectory traj;
  traj.d = detail::get<std::uint32_t>(in);
  const auto n = detail::get<std::uint64_t>(in);
  if (traj.d == 0 || n == 0 || n > (std::uint64_t{1} << 40) / traj.d) fail(ErrorCode::io, path + ": implausible header");
  traj.weights = detail::get_array<double>(in, n * traj.d);
  traj.times = detail::get_array<double>(in, n);
  traj.log_total_cap = detail::get_array<double>(in, n);
  rebuild_orders(traj);
  return traj;
}

}  // namespace rankvol
