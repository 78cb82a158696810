#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "incentive_mpc/ev/ev_lompc.hpp"

namespace incentive_mpc::ev {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& msg)
      : std::runtime_error(key.empty() ? msg : key + ": " + msg), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct IsoConfig {
  // fractions of B unless noted
  double x_max = 0.3;
  double ug_max = 1.0;
  double ub_max = 0.3;
  double x0 = 0.15;
  double cg = 1e-3;  // c^g B^1.7
  double gamma = 5.0;
  std::size_t horizon_r = 1;
};

struct DemandConfig {
  std::string source = "synthetic";  // or a CSV path
  double scale_divisor = 1.0;
  double peak_hour = 17.0;
  double trough_hour = 4.0;
  double peak = 0.85;  // fraction of B
  double trough = 0.55;
  double start_hour = 0.0;
};

struct SolverConfig {
  double eps_tol = 1e-3;
  double eps_scale = 0.01;
  int max_iter = 500;
  double lambda_cap = 1e6;
  bool regularize = true;
  double member_tol = 1e-8;
};

struct ScenarioConfig {
  std::vector<EVClassConfig> classes;
  std::size_t horizon = 12;
  std::size_t steps = 48;
  double soc_init_lo = 0.3;
  double soc_init_hi = 0.5;
  // an EV within this margin of y_max departs and is replaced by a fresh arrival
  double full_charge_margin = 0.01;
  IsoConfig iso;
  DemandConfig demand;
  SolverConfig solver;
  std::uint64_t seed = 42;
  std::string base_dir;  // demand paths resolve against this

  double normalization_b() const {
    double b = 0.0;
    for (const auto& c : classes) b += double(c.count) * c.capacity_kwh;
    return b;
  }
  std::size_t population() const {
    std::size_t m = 0;
    for (const auto& c : classes) m += c.count;
    return m;
  }

  void validate() const;
};

inline ScenarioConfig default_scenario() {
  ScenarioConfig s;
  EVClassConfig small;
  small.name = "small";
  small.count = 500;
  small.capacity_kwh = 10.0;
  small.w_max = 0.25;
  EVClassConfig large;
  large.name = "large";
  large.count = 500;
  large.capacity_kwh = 50.0;
  large.w_max = 0.15;
  s.classes = {small, large};
  return s;
}

inline void ScenarioConfig::validate() const {
  if (classes.empty()) throw ConfigError("classes", "at least one EV class is required");
  if (horizon < 1) throw ConfigError("horizon", "must be at least 1");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto& c = classes[i];
    const std::string p = "classes[" + std::to_string(i) + "].";
    if (c.count == 0) throw ConfigError(p + "count", "must be positive");
    if (!(c.capacity_kwh > 0.0)) throw ConfigError(p + "capacity_kwh", "must be positive");
    if (!(c.w_max > 0.0 && c.w_max <= 1.0)) throw ConfigError(p + "w_max", "must lie in (0, 1]");
    if (!(c.y_max > 0.0 && c.y_max <= 1.0)) throw ConfigError(p + "y_max", "must lie in (0, 1]");
    if (!(c.delta > 0.0)) throw ConfigError(p + "delta", "must be positive");
    if (c.battery_c1 < 0.0) throw ConfigError(p + "battery_c1", "must be nonnegative");
    if (c.battery_c2 < 0.0) throw ConfigError(p + "battery_c2", "must be nonnegative");
    if (c.battery_knee_frac < 0.0 || c.battery_knee_frac > 1.0) throw ConfigError(p + "battery_knee_frac", "must lie in [0, 1]");
    if (c.partitions < 1) throw ConfigError(p + "partitions", "must be at least 1");
    if (!(soc_init_hi <= c.y_max)) throw ConfigError("soc_init_hi", "must not exceed " + p + "y_max");
    // the configured modulus 2 delta Theta^2 may not overstate the base cost's true modulus
    const double lmin = cumulative_sum_gram_spectrum(Eigen::Index(horizon)).minCoeff();
    if (c.battery_c1 + c.delta * lmin < c.delta * (1.0 - 1e-12)) {
      throw ConfigError(p + "battery_c1", "too small: strong modulus 2 delta capacity^2 is not attained");
    }
  }
  if (!(full_charge_margin >= 0.0)) throw ConfigError("full_charge_margin", "must be nonnegative");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (!(soc_init_hi < classes[i].y_max - full_charge_margin)) {
      throw ConfigError("full_charge_margin", "fresh arrivals must start below classes[" + std::to_string(i) + "].y_max - full_charge_margin");
    }
  }
  if (!(soc_init_lo >= 0.0 && soc_init_lo <= soc_init_hi)) throw ConfigError("soc_init_lo", "must satisfy 0 <= soc_init_lo <= soc_init_hi");
  if (!(iso.x_max > 0.0)) throw ConfigError("iso.x_max", "must be positive");
  if (!(iso.ug_max > 0.0)) throw ConfigError("iso.ug_max", "must be positive");
  if (!(iso.ub_max > 0.0)) throw ConfigError("iso.ub_max", "must be positive");
  if (!(iso.x0 >= 0.0 && iso.x0 <= iso.x_max)) throw ConfigError("iso.x0", "must lie in [0, iso.x_max]");
  if (!(iso.cg > 0.0)) throw ConfigError("iso.cg", "must be positive");
  if (!(iso.gamma > 1.0)) throw ConfigError("iso.gamma", "must exceed 1");
  if (iso.horizon_r < 1 || iso.horizon_r > horizon) throw ConfigError("iso.horizon_r", "must lie in [1, horizon]");
  if (!(demand.scale_divisor > 0.0)) throw ConfigError("demand.scale_divisor", "must be positive");
  if (demand.source == "synthetic") {
    if (!(demand.trough >= 0.0 && demand.trough <= demand.peak)) throw ConfigError("demand.trough", "must satisfy 0 <= trough <= peak");
    if (demand.peak_hour == demand.trough_hour) throw ConfigError("demand.peak_hour", "must differ from demand.trough_hour");
  }
  if (!(solver.eps_tol > 0.0)) throw ConfigError("solver.eps_tol", "must be positive");
  if (!(solver.eps_scale > 0.0)) throw ConfigError("solver.eps_scale", "must be positive");
  if (solver.max_iter < 1) throw ConfigError("solver.max_iter", "must be at least 1");
  if (!(solver.lambda_cap > 0.0)) throw ConfigError("solver.lambda_cap", "must be positive");
  if (!(solver.member_tol > 0.0)) throw ConfigError("solver.member_tol", "must be positive");
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "expected a nonnegative integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

inline void assign_class_key(EVClassConfig& c, const std::string& field, const std::string& key, const std::string& v) {
  if (field == "name") c.name = v;
  else if (field == "count") c.count = parse_uint(key, v);
  else if (field == "capacity_kwh") c.capacity_kwh = parse_double(key, v);
  else if (field == "w_max") c.w_max = parse_double(key, v);
  else if (field == "y_max") c.y_max = parse_double(key, v);
  else if (field == "delta") c.delta = parse_double(key, v);
  else if (field == "battery_c1") c.battery_c1 = parse_double(key, v);
  else if (field == "battery_c2") c.battery_c2 = parse_double(key, v);
  else if (field == "battery_knee_frac") c.battery_knee_frac = parse_double(key, v);
  else if (field == "partitions") c.partitions = parse_uint(key, v);
  else throw ConfigError(key, "unknown key");
}

inline void assign_key(ScenarioConfig& s, const std::string& key, const std::string& v) {
  static const std::regex class_key(R"(classes\[(\d+)\]\.([a-z_0-9]+))");
  std::smatch m;
  if (std::regex_match(key, m, class_key)) {
    const std::size_t idx = std::stoul(m[1].str());
    if (idx > 64) throw ConfigError(key, "class index too large");
    if (idx >= s.classes.size()) s.classes.resize(idx + 1);
    assign_class_key(s.classes[idx], m[2].str(), key, v);
    return;
  }
  if (key == "horizon") s.horizon = parse_uint(key, v);
  else if (key == "steps") s.steps = parse_uint(key, v);
  else if (key == "soc_init_lo") s.soc_init_lo = parse_double(key, v);
  else if (key == "soc_init_hi") s.soc_init_hi = parse_double(key, v);
  else if (key == "seed") s.seed = parse_uint(key, v);
  else if (key == "full_charge_margin") s.full_charge_margin = parse_double(key, v);
  else if (key == "iso.x_max") s.iso.x_max = parse_double(key, v);
  else if (key == "iso.ug_max") s.iso.ug_max = parse_double(key, v);
  else if (key == "iso.ub_max") s.iso.ub_max = parse_double(key, v);
  else if (key == "iso.x0") s.iso.x0 = parse_double(key, v);
  else if (key == "iso.cg") s.iso.cg = parse_double(key, v);
  else if (key == "iso.gamma") s.iso.gamma = parse_double(key, v);
  else if (key == "iso.horizon_r") s.iso.horizon_r = parse_uint(key, v);
  else if (key == "demand.source") s.demand.source = v;
  else if (key == "demand.scale_divisor") s.demand.scale_divisor = parse_double(key, v);
  else if (key == "demand.peak_hour") s.demand.peak_hour = parse_double(key, v);
  else if (key == "demand.trough_hour") s.demand.trough_hour = parse_double(key, v);
  else if (key == "demand.peak") s.demand.peak = parse_double(key, v);
  else if (key == "demand.trough") s.demand.trough = parse_double(key, v);
  else if (key == "demand.start_hour") s.demand.start_hour = parse_double(key, v);
  else if (key == "solver.eps_tol") s.solver.eps_tol = parse_double(key, v);
  else if (key == "solver.eps_scale") s.solver.eps_scale = parse_double(key, v);
  else if (key == "solver.max_iter") s.solver.max_iter = int(parse_uint(key, v));
  else if (key == "solver.lambda_cap") s.solver.lambda_cap = parse_double(key, v);
  else if (key == "solver.regularize") s.solver.regularize = parse_bool(key, v);
  else if (key == "solver.member_tol") s.solver.member_tol = parse_double(key, v);
  else throw ConfigError(key, "unknown key");
}

}  // namespace detail

// Flat "key = value" lines; '#' starts a comment. Keys absent from the text keep defaults,
// except that any classes[...] key replaces the default class list.
inline ScenarioConfig parse_scenario(std::istream& in, const std::string& base_dir = "") {
  ScenarioConfig s = default_scenario();
  s.base_dir = base_dir;
  bool classes_seen = false;
  std::map<std::string, int> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("", "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(lineno) + ": empty key");
    if (value.empty()) throw ConfigError(key, "missing value");
    if (seen[key]++) throw ConfigError(key, "duplicate key");
    if (!classes_seen && key.rfind("classes[", 0) == 0) {
      s.classes.clear();
      classes_seen = true;
    }
    detail::assign_key(s, key, value);
  }
  for (std::size_t i = 0; i < s.classes.size(); ++i) {
    if (s.classes[i].name.empty()) s.classes[i].name = "class" + std::to_string(i);
  }
  s.validate();
  return s;
}

inline ScenarioConfig parse_scenario_text(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open scenario file " + path);
  const auto slash = path.find_last_of('/');
  return parse_scenario(in, slash == std::string::npos ? "" : path.substr(0, slash));
}

// Echo in the same key = value format.
inline std::vector<std::pair<std::string, std::string>> scenario_entries(const ScenarioConfig& s) {
  std::vector<std::pair<std::string, std::string>> out;
  auto num = [](double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ec == std::errc() ? p : buf);
  };
  for (std::size_t i = 0; i < s.classes.size(); ++i) {
    const auto& c = s.classes[i];
    const std::string p = "classes[" + std::to_string(i) + "].";
    out.push_back({p + "name", c.name});
    out.push_back({p + "count", std::to_string(c.count)});
    out.push_back({p + "capacity_kwh", num(c.capacity_kwh)});
    out.push_back({p + "w_max", num(c.w_max)});
    out.push_back({p + "y_max", num(c.y_max)});
    out.push_back({p + "delta", num(c.delta)});
    out.push_back({p + "battery_c1", num(c.battery_c1)});
    out.push_back({p + "battery_c2", num(c.battery_c2)});
    out.push_back({p + "battery_knee_frac", num(c.battery_knee_frac)});
    out.push_back({p + "partitions", std::to_string(c.partitions)});
  }
  out.push_back({"horizon", std::to_string(s.horizon)});
  out.push_back({"steps", std::to_string(s.steps)});
  out.push_back({"soc_init_lo", num(s.soc_init_lo)});
  out.push_back({"soc_init_hi", num(s.soc_init_hi)});
  out.push_back({"seed", std::to_string(s.seed)});
  out.push_back({"full_charge_margin", num(s.full_charge_margin)});
  out.push_back({"iso.x_max", num(s.iso.x_max)});
  out.push_back({"iso.ug_max", num(s.iso.ug_max)});
  out.push_back({"iso.ub_max", num(s.iso.ub_max)});
  out.push_back({"iso.x0", num(s.iso.x0)});
  out.push_back({"iso.cg", num(s.iso.cg)});
  out.push_back({"iso.gamma", num(s.iso.gamma)});
  out.push_back({"iso.horizon_r", std::to_string(s.iso.horizon_r)});
  out.push_back({"demand.source", s.demand.source});
  out.push_back({"demand.scale_divisor", num(s.demand.scale_divisor)});
  out.push_back({"demand.peak_hour", num(s.demand.peak_hour)});
  out.push_back({"demand.trough_hour", num(s.demand.trough_hour)});
  out.push_back({"demand.peak", num(s.demand.peak)});
  out.push_back({"demand.trough", num(s.demand.trough)});
  out.push_back({"demand.start_hour", num(s.demand.start_hour)});
  out.push_back({"solver.eps_tol", num(s.solver.eps_tol)});
  out.push_back({"solver.eps_scale", num(s.solver.eps_scale)});
  out.push_back({"solver.max_iter", std::to_string(s.solver.max_iter)});
  out.push_back({"solver.lambda_cap", num(s.solver.lambda_cap)});
  out.push_back({"solver.regularize", s.solver.regularize ? "true" : "false"});
  out.push_back({"solver.member_tol", num(s.solver.member_tol)});
  return out;
}

}  // namespace incentive_mpc::ev
