// rankvol command-line front end. Every subcommand maps onto one library
// operation, writes its outputs, and leaves a run manifest beside them.
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rankvol/rankvol.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitDataQuality = 4;

struct CliError {
  int code;
  std::string message;
};

[[noreturn]] void usage_error(const std::string& message) { throw CliError{kExitInput, message}; }

int exit_code(rv_status s) {
  switch (s) {
    case RV_OK: return kExitOk;
    case RV_ERR_INVALID_INPUT:
    case RV_ERR_INCONSISTENT:
    case RV_ERR_UNDEFINED_HORIZON:
    case RV_ERR_IO: return kExitInput;
    case RV_ERR_NUMERICAL:
    case RV_ERR_BANKRUPTCY: return kExitNumerical;
    case RV_ERR_DATA_QUALITY: return kExitDataQuality;
    case RV_ERR_INTERNAL: break;
  }
  return kExitInternal;
}

void check(rv_status s) {
  if (s != RV_OK) throw CliError{exit_code(s), std::string(rv_status_name(s)) + ": " + rv_last_error()};
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Params = std::unique_ptr<rv_params, Deleter<rv_params, rv_params_free>>;
using Trajectory = std::unique_ptr<rv_trajectory, Deleter<rv_trajectory, rv_trajectory_free>>;
using Moments = std::unique_ptr<rv_moments, Deleter<rv_moments, rv_moments_free>>;
using Panel = std::unique_ptr<rv_panel, Deleter<rv_panel, rv_panel_free>>;
using Estimates = std::unique_ptr<rv_estimates, Deleter<rv_estimates, rv_estimates_free>>;
using Calibration = std::unique_ptr<rv_calibration, Deleter<rv_calibration, rv_calibration_free>>;
using Sweep = std::unique_ptr<rv_sweep, Deleter<rv_sweep, rv_sweep_free>>;
using Wealth = std::unique_ptr<rv_wealth, Deleter<rv_wealth, rv_wealth_free>>;

std::string take(char* s) {
  std::string out = s ? s : "";
  rv_string_free(s);
  return out;
}

// ---- settings ----------------------------------------------------------------

enum class Kind { text, count, real, flag, list };

struct OptionSpec {
  const char* key;
  Kind kind;
  const char* help;
};

const std::vector<OptionSpec>& option_specs() {
  static const std::vector<OptionSpec> specs{
      {"input", Kind::text, "input file"},
      {"output", Kind::text, "output file (a directory for report)"},
      {"d", Kind::count, "number of ranks kept"},
      {"lambda", Kind::real, "market growth rate"},
      {"grid", Kind::list, "comma-separated lambda grid"},
      {"lambdas", Kind::list, "comma-separated lambdas compared rank by rank"},
      {"seed", Kind::count, "random seed (drawn and recorded when absent)"},
      {"dt", Kind::real, "Euler step in years"},
      {"substeps", Kind::count, "Euler steps per stored sample"},
      {"paths", Kind::count, "Monte-Carlo paths"},
      {"horizon", Kind::real, "simulated horizon in years"},
      {"top-m", Kind::count, "simulate only the top m ranks"},
      {"top-n", Kind::count, "ranks entering the L2 error sums"},
      {"window", Kind::count, "smoothing window for sigma2"},
      {"strict", Kind::flag, "fail on delisted top-d names"},
      {"kind", Kind::text, "portfolio rule: market|diversity|growth_closed|growth_open|large_cap"},
      {"p", Kind::real, "diversity exponent"},
      {"n-open", Kind::count, "open-market rank cutoff"},
      {"k-top", Kind::count, "large-cap rank cutoff"},
      {"clock", Kind::text, "panel clock: trading|calendar"},
      {"tail-fraction", Kind::real, "fraction of each path averaged for moments"},
      {"mode", Kind::text, "moment mode: tail|terminal"},
      {"moments", Kind::text, "moments CSV written by the moments command"},
      {"params", Kind::text, "model parameter JSON"},
      {"at", Kind::text, "portfolio evaluation point: last|first|mu"},
      {"trajectory", Kind::text, "simulated trajectory file"},
      {"out-of-sample", Kind::text, "out-of-sample panel file"},
      {"weight-ranks", Kind::count, "ranks listed in the portfolio weight table"},
  };
  return specs;
}

const OptionSpec& spec_of(const std::string& key) {
  for (const auto& s : option_specs())
    if (key == s.key) return s;
  throw CliError{kExitInternal, "unknown setting " + key};
}

std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      usage_error("--" + key + ": bad number '" + item + "'");
    }
  }
  if (out.empty()) usage_error("--" + key + ": empty list");
  return out;
}

json typed_value(const std::string& key, const std::string& text) {
  const OptionSpec& spec = spec_of(key);
  try {
    std::size_t used = 0;
    switch (spec.kind) {
      case Kind::text: return text;
      case Kind::flag: return true;
      case Kind::list: return parse_list(text, key);
      case Kind::count: {
        if (!text.empty() && text[0] == '-') throw std::invalid_argument(text);
        const unsigned long long v = std::stoull(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
      }
      case Kind::real: {
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
      }
    }
  } catch (const CliError&) {
    throw;
  } catch (const std::exception&) {
    usage_error("--" + key + ": bad value '" + text + "'");
  }
  return nullptr;
}

// Effective settings: flags over config file over defaults.
class Settings {
 public:
  Settings(json effective) : j_(std::move(effective)) {}

  bool has(const std::string& key) const { return j_.contains(key) && !j_[key].is_null(); }
  const json& all() const { return j_; }
  void set(const std::string& key, json v) { j_[key] = std::move(v); }

  std::string text(const std::string& key) const {
    require(key);
    return j_[key].get<std::string>();
  }
  double real(const std::string& key) const {
    require(key);
    return j_[key].get<double>();
  }
  std::uint64_t count(const std::string& key) const {
    require(key);
    return j_[key].get<std::uint64_t>();
  }
  bool flag(const std::string& key) const { return has(key) && j_[key].get<bool>(); }
  std::vector<double> list(const std::string& key) const {
    require(key);
    return j_[key].get<std::vector<double>>();
  }

 private:
  void require(const std::string& key) const {
    if (!has(key)) usage_error("missing required setting --" + key);
  }
  json j_;
};

json check_config_value(const std::string& key, const json& v) {
  const OptionSpec& spec = spec_of(key);
  const bool ok = (spec.kind == Kind::text && v.is_string()) ||
                  (spec.kind == Kind::count && v.is_number_unsigned()) ||
                  (spec.kind == Kind::real && v.is_number()) || (spec.kind == Kind::flag && v.is_boolean()) ||
                  (spec.kind == Kind::list && v.is_array());
  if (!ok) usage_error("config: wrong type for \"" + key + "\"");
  if (spec.kind == Kind::list) {
    for (const auto& e : v)
      if (!e.is_number()) usage_error("config: \"" + key + "\" must be a list of numbers");
  }
  if (spec.kind == Kind::real) return v.get<double>();
  return v;
}

// ---- files and manifest ----------------------------------------------------------

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{kExitInput, "cannot open " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw CliError{kExitInput, "cannot write " + path};
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Run {
 public:
  Run(std::string command, Settings settings) : command_(std::move(command)), settings_(std::move(settings)) {
    started_ = utc_now();
  }

  Settings& settings() { return settings_; }

  // Seed from the settings, or a fresh one that the manifest records.
  std::uint64_t seed() {
    if (!settings_.has("seed")) {
      std::random_device rd;
      const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
      settings_.set("seed", s);
      seed_drawn_ = true;
    }
    return settings_.count("seed");
  }

  std::string input(const std::string& key) {
    const std::string path = settings_.text(key);
    if (!fs::is_regular_file(path)) throw CliError{kExitInput, "input not found: " + path};
    inputs_.push_back(path);
    return path;
  }

  void output(const std::string& path) { outputs_.push_back(path); }

  void write_manifest(const std::string& path) const {
    json j;
    j["command"] = command_;
    j["tool_version"] = rv_version();
    j["config"] = settings_.all();
    j["config_hash"] = hex64(fnv1a(settings_.all().dump()));
    json in = json::array();
    for (const auto& p : inputs_) {
      const std::string bytes = read_file(p);
      in.push_back(json{{"path", p}, {"bytes", bytes.size()}, {"fnv1a64", hex64(fnv1a(bytes))}});
    }
    j["inputs"] = in;
    json out = json::array();
    for (const auto& p : outputs_) {
      const std::string bytes = read_file(p);
      out.push_back(json{{"path", p}, {"bytes", bytes.size()}, {"fnv1a64", hex64(fnv1a(bytes))}});
    }
    j["outputs"] = out;
    if (settings_.has("seed")) j["seed"] = settings_.count("seed");
    else j["seed"] = nullptr;
    j["seed_drawn"] = seed_drawn_;
    j["started_at"] = started_;
    j["finished_at"] = utc_now();
    write_file(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  Settings settings_;
  std::string started_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  bool seed_drawn_ = false;
};

// ---- shared helpers ----------------------------------------------------------------

rv_sim_config sim_config(Run& run, bool moments = false) {
  rv_sim_config cfg = moments ? rv_moment_config_default() : rv_sim_config_default();
  const Settings& s = run.settings();
  if (s.has("dt")) cfg.dt = s.real("dt");
  if (s.has("substeps")) cfg.substeps_per_sample = s.count("substeps");
  if (s.has("horizon")) cfg.horizon = s.real("horizon");
  if (s.has("paths")) cfg.n_paths = s.count("paths");
  if (s.has("top-m")) cfg.top_m = s.count("top-m");
  cfg.seed = run.seed();
  return cfg;
}

rv_delisting policy(const Settings& s) { return s.flag("strict") ? RV_DELISTING_STRICT : RV_DELISTING_DROP; }

std::size_t window(const Settings& s) { return s.has("window") ? s.count("window") : 15; }

Panel load_panel(const std::string& path) {
  rv_panel* p = nullptr;
  check(rv_panel_load(path.c_str(), &p));
  return Panel(p);
}

Params load_params(const std::string& path) {
  rv_params* p = nullptr;
  check(rv_params_load(path.c_str(), &p));
  return Params(p);
}

rv_moment_mode moment_mode(const Settings& s) {
  if (!s.has("mode")) return RV_MOMENTS_TAIL_AVERAGE;
  const std::string m = s.text("mode");
  if (m == "tail") return RV_MOMENTS_TAIL_AVERAGE;
  if (m == "terminal") return RV_MOMENTS_TERMINAL;
  usage_error("--mode must be tail or terminal");
}

double tail_fraction(const Settings& s) { return s.has("tail-fraction") ? s.real("tail-fraction") : 0.5; }

std::string moments_csv(const rv_moments* m) {
  const std::size_t d = rv_moments_d(m);
  std::vector<double> mu(d), rho(d), mu_se(d), rho_se(d);
  rv_moments_get(m, mu.data(), rho.data(), mu_se.data(), rho_se.data());
  std::ostringstream out;
  out.precision(17);
  out << "rank,mu,rho,mu_stderr,rho_stderr\n";
  for (std::size_t k = 0; k < d; ++k)
    out << (k + 1) << ',' << mu[k] << ',' << rho[k] << ',' << mu_se[k] << ',' << rho_se[k] << '\n';
  return out.str();
}

// Reads the rank,mu,rho,... table written by moments_csv.
void read_moments_csv(const std::string& path, std::vector<double>& mu, std::vector<double>& rho) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("rank,mu,rho", 0) != 0)
    usage_error(path + ": expected header rank,mu,rho,...");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = parse_list(line, "moments");
    if (fields.size() < 3 || fields[0] != static_cast<double>(mu.size() + 1))
      usage_error(path + ":" + std::to_string(line_no) + ": malformed row");
    mu.push_back(fields[1]);
    rho.push_back(fields[2]);
  }
}

std::string csv_row_table(const std::string& name, const std::vector<double>& v) {
  std::ostringstream out;
  out.precision(17);
  out << "rank," << name << '\n';
  for (std::size_t k = 0; k < v.size(); ++k) out << (k + 1) << ',' << v[k] << '\n';
  return out.str();
}

rv_rule rule_from_settings(const Settings& s) {
  const std::string kind = s.has("kind") ? s.text("kind") : "diversity";
  json j{{"kind", kind}};
  if (s.has("p")) j["p"] = s.real("p");
  if (s.has("n-open")) j["N"] = s.count("n-open");
  if (s.has("k-top")) j["k"] = s.count("k-top");
  rv_rule rule{};
  check(rv_rule_from_json(j.dump().c_str(), &rule));
  return rule;
}

// ---- subcommands ---------------------------------------------------------------------

void cmd_ingest(Run& run) {
  const Settings& s = run.settings();
  const std::string in = run.input("input");
  const std::string out = s.text("output");
  rv_clock clock = RV_CLOCK_TRADING_DAYS;
  if (s.has("clock")) {
    const std::string c = s.text("clock");
    if (c == "calendar") clock = RV_CLOCK_CALENDAR;
    else if (c != "trading") usage_error("--clock must be trading or calendar");
  }
  rv_panel* p = nullptr;
  check(rv_panel_ingest_csv(in.c_str(), s.count("d"), clock, &p));
  Panel panel(p);
  check(rv_panel_save(panel.get(), out.c_str()));
  run.output(out);
  char* side = nullptr;
  check(rv_panel_sidecar_json(panel.get(), &side));
  write_file(out + ".json", take(side) + "\n");
  run.output(out + ".json");
  run.write_manifest(out + ".manifest.json");
  std::cerr << "ingest: " << rv_panel_n_dates(panel.get()) << " dates, " << rv_panel_rejected_rows(panel.get())
            << " rejected rows\n";
}

void cmd_export(Run& run) {
  const std::string in = run.input("input");
  const std::string out = run.settings().text("output");
  Panel panel = load_panel(in);
  check(rv_panel_write_csv(panel.get(), out.c_str()));
  run.output(out);
  run.write_manifest(out + ".manifest.json");
}

void cmd_synth(Run& run) {
  const Settings& s = run.settings();
  Params params = load_params(run.input("input"));
  const std::string out = s.text("output");
  rv_sim_config cfg = sim_config(run);
  cfg.n_paths = 1;
  const std::size_t d = rv_params_d(params.get());
  const std::vector<double> x0(d, 1.0 / static_cast<double>(d));
  rv_trajectory* t = nullptr;
  check(rv_simulate_path(params.get(), x0.data(), &cfg, 0, &t));
  Trajectory traj(t);
  rv_panel* p = nullptr;
  check(rv_panel_from_trajectory(traj.get(), 1.0, &p));
  Panel panel(p);
  check(rv_panel_save(panel.get(), out.c_str()));
  run.output(out);
  char* side = nullptr;
  check(rv_panel_sidecar_json(panel.get(), &side));
  write_file(out + ".json", take(side) + "\n");
  run.output(out + ".json");
  if (s.has("trajectory")) {
    const std::string tp = s.text("trajectory");
    check(rv_trajectory_save(traj.get(), tp.c_str()));
    run.output(tp);
  }
  run.write_manifest(out + ".manifest.json");
}

void cmd_calibrate(Run& run) {
  const Settings& s = run.settings();
  Panel panel = load_panel(run.input("input"));
  const std::string out = s.text("output");
  rv_calibration* c = nullptr;
  check(rv_calibrate(panel.get(), s.real("lambda"), window(s), policy(s), &c));
  Calibration cal(c);
  rv_params* p = nullptr;
  check(rv_calibration_params(cal.get(), &p));
  Params params(p);
  check(rv_params_save(params.get(), out.c_str()));
  run.output(out);
  char* text = nullptr;
  check(rv_calibration_to_json(cal.get(), &text));
  write_file(out + ".calibration.json", take(text) + "\n");
  run.output(out + ".calibration.json");
  rv_estimates* e = nullptr;
  check(rv_calibration_estimates(cal.get(), &e));
  Estimates est(e);
  check(rv_estimates_to_csv(est.get(), &text));
  write_file(out + ".estimates.csv", take(text));
  run.output(out + ".estimates.csv");
  run.write_manifest(out + ".manifest.json");
  if (!rv_calibration_feller_satisfied(cal.get())) std::cerr << "calibrate: warning: Feller condition not satisfied\n";
}

void cmd_simulate(Run& run) {
  const Settings& s = run.settings();
  Params params = load_params(run.input("input"));
  const std::string out = s.text("output");
  const rv_sim_config cfg = sim_config(run);
  const std::size_t d = rv_params_d(params.get());
  const std::vector<double> x0(d, 1.0 / static_cast<double>(d));
  const bool as_csv = fs::path(out).extension() == ".csv";
  for (std::size_t i = 0; i < cfg.n_paths; ++i) {
    rv_trajectory* t = nullptr;
    check(rv_simulate_path(params.get(), x0.data(), &cfg, i, &t));
    Trajectory traj(t);
    std::string path = out;
    if (cfg.n_paths > 1) {
      const fs::path base(out);
      path = (base.parent_path() / (base.stem().string() + "_" + std::to_string(i) + base.extension().string()))
                 .string();
    }
    check(as_csv ? rv_trajectory_write_csv(traj.get(), path.c_str()) : rv_trajectory_save(traj.get(), path.c_str()));
    run.output(path);
  }
  run.write_manifest(out + ".manifest.json");
}

Moments simulate_moments(Run& run, const rv_params* params) {
  const rv_sim_config cfg = sim_config(run, true);
  rv_moments* m = nullptr;
  check(rv_stationary_moments(params, &cfg, nullptr, moment_mode(run.settings()), tail_fraction(run.settings()), &m));
  return Moments(m);
}

void cmd_moments(Run& run) {
  Params params = load_params(run.input("input"));
  const std::string out = run.settings().text("output");
  Moments m = simulate_moments(run, params.get());
  write_file(out, moments_csv(m.get()));
  run.output(out);
  run.write_manifest(out + ".manifest.json");
}

void cmd_implied(Run& run) {
  const Settings& s = run.settings();
  Params params = load_params(run.input("input"));
  const std::string out = s.text("output");
  std::vector<double> mu, rho;
  if (s.has("moments")) {
    read_moments_csv(run.input("moments"), mu, rho);
  } else {
    Moments m = simulate_moments(run, params.get());
    mu.resize(rv_moments_d(m.get()));
    rho.resize(mu.size());
    rv_moments_get(m.get(), mu.data(), rho.data(), nullptr, nullptr);
  }
  if (mu.size() != rv_params_d(params.get())) usage_error("moments and parameters have different d");
  std::vector<double> phi(mu.size());
  check(rv_implied_phi(params.get(), mu.data(), rho.data(), phi.data()));
  write_file(out, csv_row_table("phi", phi));
  run.output(out);
  run.write_manifest(out + ".manifest.json");
}

rv_sweep_options sweep_options(Run& run) {
  const Settings& s = run.settings();
  rv_sweep_options o = rv_sweep_options_default();
  o.sim = sim_config(run, true);
  o.smoothing_window = window(s);
  o.policy = policy(s);
  if (s.has("top-n")) o.top_n = s.count("top-n");
  o.mode = moment_mode(s);
  o.tail_fraction = tail_fraction(s);
  return o;
}

void cmd_sweep(Run& run) {
  const Settings& s = run.settings();
  Panel panel = load_panel(run.input("input"));
  const std::string out = s.text("output");
  std::vector<double> grid(21);
  if (s.has("grid")) grid = s.list("grid");
  else rv_default_lambda_grid(grid.data());
  const rv_sweep_options o = sweep_options(run);
  rv_sweep* sw = nullptr;
  check(rv_lambda_sweep(panel.get(), grid.data(), grid.size(), &o, &sw));
  Sweep sweep(sw);
  char* text = nullptr;
  check(rv_sweep_to_csv(sweep.get(), &text));
  write_file(out, take(text));
  run.output(out);
  check(rv_sweep_to_json(sweep.get(), &text));
  write_file(out + ".json", take(text) + "\n");
  run.output(out + ".json");
  run.write_manifest(out + ".manifest.json");
  for (std::size_t i = 0; i < rv_sweep_n_rows(sweep.get()); ++i) {
    rv_sweep_row row{};
    check(rv_sweep_row_get(sweep.get(), i, &row));
    if (!row.ok) std::cerr << "sweep: lambda=" << row.lambda << " failed: " << row.error << '\n';
  }
}

void cmd_portfolio(Run& run) {
  const Settings& s = run.settings();
  Panel panel = load_panel(run.input("input"));
  const std::string out = s.text("output");
  const rv_rule rule = rule_from_settings(s);
  rv_estimates* e = nullptr;
  check(rv_estimate(panel.get(), window(s), policy(s), &e));
  Estimates est(e);
  const std::size_t d = rv_estimates_d(est.get());
  std::vector<double> sigma2(d), mu(d);
  check(rv_estimates_get(est.get(), RV_FIELD_SIGMA2, sigma2.data()));
  check(rv_estimates_get(est.get(), RV_FIELD_MU, mu.data()));

  const std::string at = s.has("at") ? s.text("at") : "last";
  std::vector<double> x(d);
  if (at == "mu") x = mu;
  else if (at == "first") check(rv_panel_ranked_weights(panel.get(), 0, x.data()));
  else if (at == "last") check(rv_panel_ranked_weights(panel.get(), rv_panel_n_dates(panel.get()) - 1, x.data()));
  else usage_error("--at must be last, first or mu");

  Params params;
  Calibration cal;
  const bool growth = rule.kind == RV_RULE_GROWTH_CLOSED || rule.kind == RV_RULE_GROWTH_OPEN;
  if (s.has("params")) {
    params = load_params(run.input("params"));
  } else if (growth) {
    rv_calibration* c = nullptr;
    check(rv_calibrate_estimates(est.get(), s.real("lambda"), &c));
    cal.reset(c);
    rv_params* p = nullptr;
    check(rv_calibration_params(cal.get(), &p));
    params.reset(p);
  }

  std::vector<double> w(d);
  check(rv_portfolio_weights(&rule, x.data(), d, params.get(), w.data()));
  char* text = nullptr;
  check(rv_weights_csv(x.data(), w.data(), d, &text));
  write_file(out, take(text));
  run.output(out);

  json summary;
  check(rv_rule_to_json(&rule, &text));
  summary["rule"] = json::parse(take(text));
  summary["evaluated_at"] = at;
  const double p = rule.kind == RV_RULE_DIVERSITY ? rule.p : (s.has("p") ? s.real("p") : 0.8);
  summary["p"] = p;
  double value = 0.0;
  check(rv_diversity_function(x.data(), d, p, &value));
  summary["diversity_function"] = value;
  check(rv_excess_growth_rate(x.data(), sigma2.data(), d, p, &value));
  summary["excess_growth_rate"] = value;
  check(rv_excess_growth_lower_bound(sigma2.data(), d, p, &value));
  summary["excess_growth_lower_bound"] = value;
  const rv_status ts = rv_t_star(x.data(), d, p, sigma2.data(), &value);
  if (ts == RV_OK) {
    summary["t_star_years"] = value;
  } else {
    summary["t_star_years"] = nullptr;
    summary["t_star_error"] = rv_last_error();
    std::cerr << "portfolio: T* undefined: " << rv_last_error() << '\n';
  }

  if (s.has("trajectory")) {
    rv_trajectory* t = nullptr;
    check(rv_trajectory_load(run.input("trajectory").c_str(), &t));
    Trajectory traj(t);
    rv_wealth* wp = nullptr;
    check(rv_wealth_path(traj.get(), &rule, params.get(), RV_WEALTH_ARITHMETIC, &wp));
    Wealth wealth(wp);
    check(rv_wealth_to_csv(wealth.get(), &text));
    write_file(out + ".wealth.csv", take(text));
    run.output(out + ".wealth.csv");
  }
  write_file(out + ".json", summary.dump(2) + "\n");
  run.output(out + ".json");
  run.write_manifest(out + ".manifest.json");
}

void cmd_report(Run& run) {
  const Settings& s = run.settings();
  Panel in = load_panel(run.input("input"));
  Panel oos;
  if (s.has("out-of-sample")) oos = load_panel(run.input("out-of-sample"));
  const std::string dir = s.text("output");
  fs::create_directories(dir);
  rv_report_options o = rv_report_options_default();
  std::vector<double> lambdas, grid;
  if (s.has("lambdas")) {
    lambdas = s.list("lambdas");
    o.lambdas = lambdas.data();
    o.n_lambdas = lambdas.size();
  }
  if (s.has("grid")) {
    grid = s.list("grid");
    o.grid = grid.data();
    o.n_grid = grid.size();
  }
  o.sweep = sweep_options(run);
  if (s.has("p")) o.p = s.real("p");
  if (s.has("n-open")) o.n_open = s.count("n-open");
  if (s.has("weight-ranks")) o.weight_ranks = s.count("weight-ranks");
  char* names = nullptr;
  check(rv_report(in.get(), oos.get(), &o, dir.c_str(), &names));
  std::istringstream list(take(names));
  std::string name;
  while (std::getline(list, name))
    if (!name.empty()) run.output((fs::path(dir) / name).string());
  run.write_manifest((fs::path(dir) / "manifest.json").string());
}

struct Command {
  const char* name;
  const char* help;
  void (*run)(Run&);
  std::vector<std::string> keys;
  std::vector<std::string> required;
};

const std::vector<std::string> kSimKeys{"dt", "substeps", "horizon", "paths", "seed", "top-m"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<Command> commands() {
  return {
      {"ingest", "validate a date,id,cap CSV into a panel file", cmd_ingest, {"input", "output", "d", "clock"},
       {"input", "output", "d"}},
      {"export", "write a panel file back to CSV", cmd_export, {"input", "output"}, {"input", "output"}},
      {"synth", "simulate a path from parameters and store it as a panel", cmd_synth,
       with({"input", "output", "trajectory"}, kSimKeys), {"input", "output"}},
      {"calibrate", "estimate parameters from a panel at a given lambda", cmd_calibrate,
       {"input", "output", "lambda", "window", "strict"}, {"input", "output", "lambda"}},
      {"simulate", "simulate weight trajectories", cmd_simulate, with({"input", "output"}, kSimKeys),
       {"input", "output"}},
      {"moments", "Monte-Carlo rank moments of a model", cmd_moments,
       with({"input", "output", "mode", "tail-fraction"}, kSimKeys), {"input", "output"}},
      {"implied", "collision rates implied by a model and its moments", cmd_implied,
       with({"input", "output", "moments", "mode", "tail-fraction"}, kSimKeys), {"input", "output"}},
      {"sweep", "lambda trade-off table", cmd_sweep,
       with({"input", "output", "grid", "window", "strict", "top-n", "mode", "tail-fraction"}, kSimKeys),
       {"input", "output"}},
      {"portfolio", "portfolio weights, excess growth and T*", cmd_portfolio,
       {"input", "output", "kind", "p", "n-open", "k-top", "lambda", "params", "window", "strict", "at", "trajectory"},
       {"input", "output"}},
      {"report", "figure-data tables for a panel", cmd_report,
       with({"input", "output", "out-of-sample", "lambdas", "grid", "window", "strict", "top-n", "mode",
             "tail-fraction", "p", "n-open", "weight-ranks"},
            kSimKeys),
       {"input", "output"}},
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rankvol: rank volatility stabilized market models"};
  app.set_version_flag("--version", std::string(rv_version()));
  app.require_subcommand(1);

  const auto cmds = commands();
  struct Bound {
    CLI::App* sub;
    std::map<std::string, std::string> raw;
    std::map<std::string, bool> flags;
    std::string config;
  };
  std::vector<Bound> bound(cmds.size());
  for (std::size_t c = 0; c < cmds.size(); ++c) {
    Bound& b = bound[c];
    b.sub = app.add_subcommand(cmds[c].name, cmds[c].help);
    b.sub->add_option("--config", b.config, "JSON config file; flags take precedence");
    for (const auto& key : cmds[c].keys) {
      const OptionSpec& spec = spec_of(key);
      const std::string flag = "--" + key;
      if (spec.kind == Kind::flag) b.sub->add_flag(flag, b.flags[key], spec.help);
      else b.sub->add_option(flag, b.raw[key], spec.help);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  for (std::size_t c = 0; c < cmds.size(); ++c) {
    Bound& b = bound[c];
    if (!b.sub->parsed()) continue;
    try {
      json effective = json::object();
      if (!b.config.empty()) {
        json cfg;
        try {
          cfg = json::parse(read_file(b.config));
        } catch (const json::exception& e) {
          usage_error("config " + b.config + ": " + e.what());
        }
        if (!cfg.is_object()) usage_error("config " + b.config + ": expected a JSON object");
        for (const auto& [key, value] : cfg.items()) {
          if (std::find(cmds[c].keys.begin(), cmds[c].keys.end(), key) == cmds[c].keys.end())
            usage_error("config " + b.config + ": unknown key \"" + key + "\" for " + cmds[c].name);
          effective[key] = check_config_value(key, value);
        }
      }
      for (const auto& key : cmds[c].keys) {
        const CLI::Option* opt = b.sub->get_option("--" + key);
        if (opt->count() == 0) continue;
        effective[key] = spec_of(key).kind == Kind::flag ? json(b.flags[key]) : typed_value(key, b.raw[key]);
      }
      Settings settings(effective);
      for (const auto& key : cmds[c].required)
        if (!settings.has(key)) usage_error("missing required --" + key);
      Run run(cmds[c].name, settings);
      cmds[c].run(run);
      return kExitOk;
    } catch (const CliError& e) {
      std::cerr << "rankvol " << cmds[c].name << ": " << e.message << '\n';
      return e.code;
    } catch (const std::exception& e) {
      std::cerr << "rankvol " << cmds[c].name << ": internal error: " << e.what() << '\n';
      return kExitInternal;
    }
  }
  return kExitInput;
}
