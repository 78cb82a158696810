#pragma once

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "incentive_mpc/ev/config.hpp"

namespace incentive_mpc::ev {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class NegativeDemand : public std::runtime_error {
 public:
  NegativeDemand(int line, double value)
      : std::runtime_error("line " + std::to_string(line) + ": negative demand " + std::to_string(value)),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// kWh per step
struct DemandProfile {
  std::vector<double> values;

  double at(std::size_t k) const { return values.at(k); }
  Vector window(std::size_t start, std::size_t N) const {
    if (start + N > values.size()) throw std::out_of_range("DemandProfile: window past the end");
    Vector v = Vector::Zero(Eigen::Index(N));
    for (std::size_t k = 0; k < N; ++k) v[Eigen::Index(k)] = values[start + k];
    return v;
  }
};

// Periodic extension to at least `length` entries.
inline DemandProfile tile(const std::vector<double>& base, std::size_t length) {
  if (base.empty()) throw std::invalid_argument("tile: empty demand");
  DemandProfile p;
  p.values.reserve(std::max(length, base.size()));
  for (std::size_t k = 0; k < std::max(length, base.size()); ++k) p.values.push_back(base[k % base.size()]);
  return p;
}

// Half-cosine rise from the trough hour to the peak hour and fall back, period 24 h.
inline double synthetic_demand_at(double hour, double trough_hour, double peak_hour, double trough, double peak) {
  const double period = 24.0;
  const double rise = std::fmod(peak_hour - trough_hour + period, period);
  const double since = std::fmod(std::fmod(hour - trough_hour, period) + period, period);
  double phase;  // 0 at trough, 1 at peak
  if (since <= rise) {
    phase = since / rise;
  } else {
    phase = 1.0 - (since - rise) / (period - rise);
  }
  return trough + (peak - trough) * 0.5 * (1.0 - std::cos(std::numbers::pi * phase));
}

inline DemandProfile synthetic_demand(const DemandConfig& d, double b_kwh, std::size_t length) {
  DemandProfile p;
  p.values.resize(length);
  for (std::size_t k = 0; k < length; ++k) {
    p.values[k] = b_kwh * synthetic_demand_at(d.start_hour + double(k), d.trough_hour, d.peak_hour, d.trough, d.peak);
  }
  return p;
}

// Two columns (hour, kWh); an optional non-numeric header line; '#' comments and blank lines skipped.
inline std::vector<double> parse_demand_csv(std::istream& in, double scale_divisor = 1.0) {
  if (!(scale_divisor > 0.0)) throw std::invalid_argument("parse_demand_csv: scale divisor must be positive");
  std::vector<double> out;
  std::string line;
  int lineno = 0;
  bool header_allowed = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(lineno, "expected two comma-separated columns");
    if (line.find(',', comma + 1) != std::string::npos) throw ParseError(lineno, "expected exactly two columns");
    const std::string hour = detail::trim(line.substr(0, comma));
    const std::string kwh = detail::trim(line.substr(comma + 1));
    double h = 0.0, v = 0.0;
    try {
      h = detail::parse_double("hour", hour);
      v = detail::parse_double("kWh", kwh);
    } catch (const ConfigError& e) {
      if (header_allowed) {
        header_allowed = false;
        continue;
      }
      throw ParseError(lineno, e.what());
    }
    (void)h;
    header_allowed = false;
    if (v < 0.0) throw NegativeDemand(lineno, v);
    out.push_back(v / scale_divisor);
  }
  if (out.empty()) throw ParseError(lineno, "no demand rows");
  return out;
}

inline DemandProfile ingest_demand(const ScenarioConfig& s, std::size_t length) {
  if (s.demand.source == "synthetic") return synthetic_demand(s.demand, s.normalization_b(), length);
  std::string path = s.demand.source;
  if (!path.empty() && path[0] != '/' && !s.base_dir.empty()) path = s.base_dir + "/" + path;
  std::ifstream in(path);
  if (!in) throw ConfigError("demand.source", "cannot open " + path);
  return tile(parse_demand_csv(in, s.demand.scale_divisor), length);
}

}  // namespace incentive_mpc::ev
