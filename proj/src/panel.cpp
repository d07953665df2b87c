#include "rankvol/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "binary_io.hpp"

namespace rankvol {

namespace detail {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

namespace {

constexpr std::uint32_t kPanelVersion = 1;

// Days since 1970-01-01 of a proleptic Gregorian date.
long days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

void civil_from_days(long z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<int>(yoe) + static_cast<int>(era) * 400 + (m <= 2);
}

bool parse_iso_date(const std::string& s, long& days) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  int y = 0;
  unsigned m = 0, d = 0;
  auto digits = [&](std::size_t pos, std::size_t len, auto& out) {
    const auto r = std::from_chars(s.data() + pos, s.data() + pos + len, out);
    return r.ec == std::errc() && r.ptr == s.data() + pos + len;
  };
  if (!digits(0, 4, y) || !digits(5, 2, m) || !digits(8, 2, d)) return false;
  if (m < 1 || m > 12 || d < 1 || d > 31) return false;
  days = days_from_civil(y, m, d);
  int yy;
  unsigned mm, dd;
  civil_from_days(days, yy, mm, dd);
  return yy == y && mm == m && dd == d;
}

std::string iso_from_days(long days) {
  int y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", y, m, d);
  return buf;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string line_error(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

}  // namespace

double PanelData::total_cap(std::size_t i) const {
  double s = 0.0;
  for (double c : caps_at(i)) s += c;
  return s;
}

std::vector<double> PanelData::ranked_weights(std::size_t i) const {
  const double total = total_cap(i);
  std::vector<double> x(d);
  for (std::size_t k = 0; k < d; ++k) x[k] = cap(i, k) / total;
  return x;
}

void PanelData::validate() const {
  require(d >= 1, "panel: d must be positive");
  const std::size_t n = n_dates();
  require(n >= 1, "panel: no dates");
  require(date_labels.size() == n, "panel: label count does not match date count");
  require(members.size() == n * d && caps.size() == n * d, "panel: every date needs exactly d entries");
  for (std::size_t i = 1; i < n; ++i) require(times[i] > times[i - 1], "panel: dates must be strictly increasing");
  std::vector<char> seen(id_names.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double c = cap(i, k);
      require(std::isfinite(c) && c > 0.0, "panel: capitalizations must be positive on " + date_labels[i]);
      if (k > 0) require(c <= cap(i, k - 1), "panel: cross-section not in rank order on " + date_labels[i]);
      require(member(i, k) < id_names.size(), "panel: unknown id index");
      require(!seen[member(i, k)], "panel: duplicate member on " + date_labels[i]);
      seen[member(i, k)] = 1;
    }
    for (std::size_t k = 0; k < d; ++k) seen[member(i, k)] = 0;
  }
}

// Layout (little-endian): "RVPN", version u32, d u32, n_dates u64, n_ids u64,
// clock u32, rejected_rows u64, times f64[n_dates], date labels, id names
// (each u32 length + bytes), members u32[n_dates*d], caps f64[n_dates*d].
void PanelData::save(const std::string& path) const {
  validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write panel file " + path);
  out.write("RVPN", 4);
  detail::put(out, kPanelVersion);
  detail::put(out, static_cast<std::uint32_t>(d));
  detail::put(out, static_cast<std::uint64_t>(n_dates()));
  detail::put(out, static_cast<std::uint64_t>(id_names.size()));
  detail::put(out, static_cast<std::uint32_t>(clock));
  detail::put(out, static_cast<std::uint64_t>(rejected_rows));
  detail::put_array(out, times);
  for (const auto& s : date_labels) detail::put_string(out, s);
  for (const auto& s : id_names) detail::put_string(out, s);
  detail::put_array(out, members);
  detail::put_array(out, caps);
  if (!out) fail(ErrorCode::io, "write failed for " + path);
}

PanelData PanelData::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open panel file " + path);
  detail::expect_magic(in, "RVPN", path);
  const auto version = detail::get<std::uint32_t>(in);
  if (version != kPanelVersion) fail(ErrorCode::io, path + ": unsupported panel version");
  PanelData p;
  p.d = detail::get<std::uint32_t>(in);
  const auto n = detail::get<std::uint64_t>(in);
  const auto n_ids = detail::get<std::uint64_t>(in);
  p.clock = static_cast<PanelClock>(detail::get<std::uint32_t>(in));
  p.rejected_rows = detail::get<std::uint64_t>(in);
  p.times = detail::get_array<double>(in, n);
  p.date_labels.resize(n);
  for (auto& s : p.date_labels) s = detail::get_string(in);
  p.id_names.resize(n_ids);
  for (auto& s : p.id_names) s = detail::get_string(in);
  p.members = detail::get_array<std::uint32_t>(in, n * p.d);
  p.caps = detail::get_array<double>(in, n * p.d);
  p.validate();
  return p;
}

void PanelData::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << "date,id,cap\n";
  for (std::size_t i = 0; i < n_dates(); ++i)
    for (std::size_t k = 0; k < d; ++k)
      out << date_labels[i] << ',' << id_names[member(i, k)] << ',' << detail::format_double(cap(i, k)) << '\n';
}

std::string PanelData::sidecar_json() const {
  nlohmann::ordered_json j;
  j["d"] = d;
  j["n_dates"] = n_dates();
  j["n_ids"] = id_names.size();
  j["first_date"] = date_labels.empty() ? "" : date_labels.front();
  j["last_date"] = date_labels.empty() ? "" : date_labels.back();
  j["span_years"] = times.empty() ? 0.0 : span_years();
  j["clock"] = clock == PanelClock::trading_days ? "trading_days" : "calendar";
  j["rejected_rows"] = rejected_rows;
  return j.dump(2);
}

std::vector<RawRow> parse_panel_csv(const std::string& text, std::size_t* rejected) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  int date_col = -1, id_col = -1, cap_col = -1;
  std::size_t n_cols = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto header = split_csv(line);
    n_cols = header.size();
    for (std::size_t c = 0; c < header.size(); ++c) {
      std::string h = header[c];
      std::transform(h.begin(), h.end(), h.begin(), [](unsigned char ch) { return std::tolower(ch); });
      if (h == "date") date_col = static_cast<int>(c);
      if (h == "id") id_col = static_cast<int>(c);
      if (h == "cap") cap_col = static_cast<int>(c);
    }
    break;
  }
  if (date_col < 0 || id_col < 0 || cap_col < 0)
    fail(ErrorCode::invalid_input, line_error(line_no, "header must name the columns date, id, cap"));

  std::vector<RawRow> rows;
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != n_cols)
      fail(ErrorCode::invalid_input, line_error(line_no, "expected " + std::to_string(n_cols) + " fields, got " +
                                                             std::to_string(fields.size())));
    RawRow row;
    row.line = line_no;
    row.date = fields[static_cast<std::size_t>(date_col)];
    row.id = fields[static_cast<std::size_t>(id_col)];
    long days = 0;
    if (!parse_iso_date(row.date, days))
      fail(ErrorCode::invalid_input, line_error(line_no, "date '" + row.date + "' is not ISO-8601 (YYYY-MM-DD)"));
    if (row.id.empty()) fail(ErrorCode::invalid_input, line_error(line_no, "empty id"));
    const std::string& cap_text = fields[static_cast<std::size_t>(cap_col)];
    const auto res = std::from_chars(cap_text.data(), cap_text.data() + cap_text.size(), row.cap);
    if (res.ec != std::errc() || res.ptr != cap_text.data() + cap_text.size() || !std::isfinite(row.cap))
      fail(ErrorCode::invalid_input, line_error(line_no, "cap '" + cap_text + "' is not a number"));
    if (row.cap <= 0.0) {
      ++dropped;
      continue;
    }
    rows.push_back(std::move(row));
  }
  if (rejected) *rejected = dropped;
  return rows;
}

std::vector<RawRow> read_panel_csv(const std::string& path, std::size_t* rejected) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_panel_csv(ss.str(), rejected);
}

PanelData ingest_panel(std::span<const RawRow> rows, const IngestOptions& options) {
  require(options.d >= 2, "ingest_panel: d must be at least 2");
  const std::size_t d = options.d;

  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (const auto& r : rows) {
    long days;
    require(parse_iso_date(r.date, days), line_error(r.line, "bad date '" + r.date + "'"));
    require(std::isfinite(r.cap) && r.cap > 0.0, line_error(r.line, "non-positive cap"));
    ids.push_back(r.id);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::unordered_map<std::string, std::uint32_t> id_index;
  for (std::size_t i = 0; i < ids.size(); ++i) id_index.emplace(ids[i], static_cast<std::uint32_t>(i));

  // date -> (id index, cap), ISO dates sort chronologically as strings.
  std::map<std::string, std::vector<std::pair<std::uint32_t, double>>> by_date;
  for (const auto& r : rows) by_date[r.date].emplace_back(id_index.at(r.id), r.cap);
  require(!by_date.empty(), "ingest_panel: no rows");

  std::vector<std::string> duplicates;
  for (auto& [date, entries] : by_date) {
    std::sort(entries.begin(), entries.end());
    for (std::size_t j = 1; j < entries.size(); ++j)
      if (entries[j].first == entries[j - 1].first) duplicates.push_back(date + "/" + ids[entries[j].first]);
  }
  if (!duplicates.empty()) {
    std::string msg = "ingest_panel: duplicate (date,id) rows:";
    for (std::size_t j = 0; j < duplicates.size() && j < 20; ++j) msg += " " + duplicates[j];
    if (duplicates.size() > 20) msg += " ...";
    fail(ErrorCode::invalid_input, msg);
  }

  PanelData panel;
  panel.d = d;
  panel.id_names = ids;
  panel.clock = options.clock;
  const std::size_t n = by_date.size();
  panel.times.reserve(n);
  panel.members.reserve(n * d);
  panel.caps.reserve(n * d);

  // Order by cap descending, then id ascending.
  const auto by_cap = [&](const std::pair<std::uint32_t, double>& l, const std::pair<std::uint32_t, double>& r) {
    return l.second > r.second || (l.second == r.second && l.first < r.first);
  };

  std::vector<double> cap_today(ids.size(), 0.0);  // 0 marks "not quoted today"
  const std::vector<std::pair<std::uint32_t, double>>* prev = nullptr;
  long first_day = 0;
  std::size_t i = 0;
  for (const auto& [date, entries] : by_date) {
    long day = 0;
    parse_iso_date(date, day);
    if (i == 0) first_day = day;
    for (const auto& [id, c] : entries) cap_today[id] = c;

    // First date ranks itself; later dates take the previous day's ranking
    // among assets still quoted today.
    std::vector<std::pair<std::uint32_t, double>> selection;
    if (prev == nullptr) {
      selection = entries;
    } else {
      for (const auto& e : *prev)
        if (cap_today[e.first] > 0.0) selection.push_back(e);
    }
    std::sort(selection.begin(), selection.end(), by_cap);
    if (selection.size() < d)
      fail(ErrorCode::invalid_input, "ingest_panel: date " + date + " has only " + std::to_string(selection.size()) +
                                         " eligible ids, need d=" + std::to_string(d));
    selection.resize(d);
    for (auto& e : selection) e.second = cap_today[e.first];
    std::sort(selection.begin(), selection.end(), by_cap);
    for (const auto& [id, c] : selection) {
      panel.members.push_back(id);
      panel.caps.push_back(c);
    }
    panel.date_labels.push_back(date);
    panel.times.push_back(options.clock == PanelClock::trading_days ? static_cast<double>(i) / 252.0
                                                                    : static_cast<double>(day - first_day) / 365.25);
    for (const auto& [id, c] : entries) cap_today[id] = 0.0;
    prev = &entries;
    ++i;
  }
  panel.validate();
  return panel;
}

std::vector<std::string> weekday_labels(const std::string& first, std::size_t count) {
  long day = 0;
  require(parse_iso_date(first, day), "weekday_labels: bad start date");
  std::vector<std::string> out;
  out.reserve(count);
  while (out.size() < count) {
    const long weekday = ((day % 7) + 7 + 3) % 7;  // 1970-01-01 was a Thursday; 0 = Monday
    if (weekday < 5) out.push_back(iso_from_days(day));
    ++day;
  }
  return out;
}

PanelData slice_panel(const PanelData& panel, std::size_t first, std::size_t last) {
  require(first < last && last <= panel.n_dates(), "slice_panel: need first < last <= number of dates");
  PanelData out;
  out.d = panel.d;
  out.clock = panel.clock;
  out.id_names = panel.id_names;
  const auto f = static_cast<std::ptrdiff_t>(first), l = static_cast<std::ptrdiff_t>(last);
  const auto w = static_cast<std::ptrdiff_t>(panel.d);
  out.times.assign(panel.times.begin() + f, panel.times.begin() + l);
  out.date_labels.assign(panel.date_labels.begin() + f, panel.date_labels.begin() + l);
  out.members.assign(panel.members.begin() + f * w, panel.members.begin() + l * w);
  out.caps.assign(panel.caps.begin() + f * w, panel.caps.begin() + l * w);
  return out;
}

PanelData panel_from_trajectory(const Trajectory& traj, double cap_scale) {
  require(traj.n_samples() >= 1 && traj.d >= 2, "panel_from_trajectory: empty trajectory");
  require(cap_scale > 0.0, "panel_from_trajectory: cap_scale must be positive");
  PanelData panel;
  panel.d = traj.d;
  panel.times = traj.times;
  // Daily sampling maps onto the trading-day clock exactly (t_i = i / 252).
  bool daily = true;
  for (std::size_t i = 1; i < traj.n_samples(); ++i)
    daily = daily && std::abs(traj.times[i] - traj.times[i - 1] - 1.0 / 252.0) < 1e-9;
  if (daily)
    for (std::size_t i = 0; i < traj.n_samples(); ++i) panel.times[i] = static_cast<double>(i) / 252.0;
  panel.date_labels = weekday_labels("1990-01-02", traj.n_samples());
  // Synthetic ids follow the initial ranking: A0001 is the largest at t=0.
  std::vector<std::uint32_t> id_of_name(traj.d);
  panel.id_names.resize(traj.d);
  for (std::size_t k = 0; k < traj.d; ++k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "A%04zu", k + 1);
    panel.id_names[k] = buf;
    id_of_name[traj.name_at_rank(0, k)] = static_cast<std::uint32_t>(k);
  }
  panel.members.resize(traj.n_samples() * traj.d);
  panel.caps.resize(traj.n_samples() * traj.d);
  for (std::size_t i = 0; i < traj.n_samples(); ++i) {
    const double scale = std::exp(traj.log_total_cap[i]) * cap_scale;
    for (std::size_t k = 0; k < traj.d; ++k) {
      const std::size_t name = traj.name_at_rank(i, k);
      panel.members[i * traj.d + k] = id_of_name[name];
      panel.caps[i * traj.d + k] = traj.weights[i * traj.d + name] * scale;
    }
  }
  panel.validate();
  return panel;
}

}  // namespace rankvol
