#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rankvol/simulator.hpp"

namespace rankvol {

/// One parsed input row: ISO-8601 date, asset id, capitalization.
struct RawRow {
  std::string date;
  std::string id;
  double cap = 0.0;
  std::size_t line = 0;
};

/// How observation dates map to model time (years).
enum class PanelClock {
  trading_days,  // t_i = i / 252, one step per observed date
  calendar,      // t_i = (days since first date) / 365.25
};

/// Daily top-d capitalization panel. Cross-sections are stored in rank order:
/// entry (i, k) is the asset holding rank k (0-based) on date i, and caps are
/// non-increasing along k. Membership on date i > 0 is the d largest assets by
/// the previous date's caps.
struct PanelData {
  std::size_t d = 0;
  std::vector<double> times;
  std::vector<std::string> date_labels;
  std::vector<std::string> id_names;
  std::vector<std::uint32_t> members;
  std::vector<double> caps;
  std::size_t rejected_rows = 0;
  PanelClock clock = PanelClock::trading_days;

  std::size_t n_dates() const noexcept { return times.size(); }
  std::uint32_t member(std::size_t i, std::size_t k) const { return members[i * d + k]; }
  double cap(std::size_t i, std::size_t k) const { return caps[i * d + k]; }
  std::span<const double> caps_at(std::size_t i) const { return {caps.data() + i * d, d}; }
  double total_cap(std::size_t i) const;
  /// Ranked weights X_(k)(t_i).
  std::vector<double> ranked_weights(std::size_t i) const;
  double span_years() const { return times.back() - times.front(); }

  /// Checks every structural invariant; throws invalid_input on violation.
  void validate() const;

  void save(const std::string& path) const;
  static PanelData load(const std::string& path);
  /// Long-format CSV (date,id,cap), rank order within each date.
  void write_csv(const std::string& path) const;
  /// JSON sidecar describing the panel (d, span, counts).
  std::string sidecar_json() const;

  friend bool operator==(const PanelData&, const PanelData&) = default;
};

struct IngestOptions {
  std::size_t d = 0;
  PanelClock clock = PanelClock::trading_days;
};

/// Parses a CSV with header containing date,id,cap columns. Schema violations
/// raise invalid_input with the offending line number. Non-positive caps are
/// rejected rows: they are dropped and counted in `rejected`.
std::vector<RawRow> read_panel_csv(const std::string& path, std::size_t* rejected = nullptr);
std::vector<RawRow> parse_panel_csv(const std::string& text, std::size_t* rejected = nullptr);

/// Applies the previous-day top-d rule. Throws invalid_input on duplicate
/// (date, id) rows and on a date that cannot supply d members.
PanelData ingest_panel(std::span<const RawRow> rows, const IngestOptions& options);

/// Exports a trajectory as a panel: ids A0001.. are assigned by initial rank,
/// caps are X_i * exp(log S̄) * cap_scale, dates are consecutive weekdays from
/// 1990-01-02 and times are the trajectory sample times.
PanelData panel_from_trajectory(const Trajectory& traj, double cap_scale = 1.0);

/// Dates [first, last) of a panel; ids and clock are kept.
PanelData slice_panel(const PanelData& panel, std::size_t first, std::size_t last);

/// Weekday calendar used for synthetic panels: `count` ISO dates starting at
/// `first` (which must be a weekday).
std::vector<std::string> weekday_labels(const std::string& first, std::size_t count);

}  // namespace rankvol
