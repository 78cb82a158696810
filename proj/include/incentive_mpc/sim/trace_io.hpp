#pragma once

#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "incentive_mpc/sim/closed_loop.hpp"

namespace incentive_mpc::sim {

class TraceSchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One row per (step, group); step-level columns repeat on every row of the step.
// Vector columns are ';'-joined. Energies are fractions of B.
inline const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> cols{
      "step",  "x0",       "x_next",     "ug0",       "demand0",     "ev_plan0",    "ev_real0", "ub0",
      "delta", "bimpc_outer", "bimpc_retried", "full_charged", "x_pred", "u_plan", "group", "cls",
      "slot",  "count",    "center",     "dy0",       "mean_y0",     "weight",      "radius",   "err",
      "first_err", "iterations", "converged", "regularized", "cap_hit", "price_before", "price_after",
      "w_plan", "w_real",  "lambda",     "dd_actual", "dd_surrogate"};
  return cols;
}

namespace detail {

inline std::string num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("trace: number formatting failed");
  return std::string(buf, p);
}

template <class It>
std::string join(It b, It e) {
  std::string out;
  for (It i = b; i != e; ++i) {
    if (i != b) out += ';';
    out += num(double(*i));
  }
  return out;
}

inline std::string join(const Vector& v) { return join(v.data(), v.data() + v.size()); }

inline double to_num(const std::string& s, const std::string& col, std::size_t line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw TraceSchemaError("trace line " + std::to_string(line) + ": column " + col + " is not a number: '" + s + "'");
  }
  return v;
}

inline std::vector<double> to_list(const std::string& s, const std::string& col, std::size_t line) {
  std::vector<double> out;
  if (s.empty()) return out;
  std::size_t b = 0;
  while (true) {
    const auto e = s.find(';', b);
    out.push_back(to_num(s.substr(b, e == std::string::npos ? std::string::npos : e - b), col, line));
    if (e == std::string::npos) break;
    b = e + 1;
  }
  return out;
}

inline Vector to_vector(const std::vector<double>& v) {
  Vector out(Eigen::Index(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[Eigen::Index(i)] = v[i];
  return out;
}

inline std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::size_t b = 0;
  while (true) {
    const auto e = line.find(',', b);
    out.push_back(line.substr(b, e == std::string::npos ? std::string::npos : e - b));
    if (e == std::string::npos) break;
    b = e + 1;
  }
  return out;
}

}  // namespace detail

inline void write_trace_csv(std::ostream& out, const ClosedLoopTrace& tr) {
  const auto& cols = trace_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  using detail::join;
  using detail::num;
  for (const auto& s : tr.steps) {
    const std::string head = std::to_string(s.t) + ',' + num(s.x0) + ',' + num(s.x_next) + ',' + num(s.ug0) + ',' +
                             num(s.demand0) + ',' + num(s.ev_plan0) + ',' + num(s.ev_real0) + ',' + num(s.ub0) +
                             ',' + num(s.delta) + ',' + std::to_string(s.bimpc_outer) + ',' +
                             (s.bimpc_retried ? "1" : "0") + ',' + join(s.full_charged.begin(), s.full_charged.end()) +
                             ',' + join(s.x_pred) + ',' + join(s.u_plan);
    for (std::size_t g = 0; g < s.groups.size(); ++g) {
      const auto& r = s.groups[g];
      out << head << ',' << g << ',' << r.cls << ',' << r.slot << ',' << r.count << ',' << num(r.center) << ','
          << num(r.dy0) << ',' << num(r.mean_y0) << ',' << num(r.weight) << ',' << num(r.radius) << ','
          << num(r.err) << ',' << num(r.first_err) << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ','
          << (r.regularized ? 1 : 0) << ',' << (r.cap_hit ? 1 : 0) << ',' << num(r.price_before) << ','
          << num(r.price_after) << ',' << join(r.w_plan) << ',' << join(r.w_real) << ',' << join(r.lambda) << ','
          << join(r.dd_actual.begin(), r.dd_actual.end()) << ',' << join(r.dd_surrogate.begin(), r.dd_surrogate.end())
          << '\n';
    }
  }
}

// Rebuilds the step records; initial/final states are not part of the file.
inline ClosedLoopTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw TraceSchemaError("trace: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_commas(line);
  if (header != trace_columns()) throw TraceSchemaError("trace: header does not match the schema");
  std::map<std::string, std::size_t> at;
  for (std::size_t i = 0; i < header.size(); ++i) at[header[i]] = i;

  ClosedLoopTrace tr;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_commas(line);
    if (f.size() != header.size()) {
      throw TraceSchemaError("trace line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                             " columns, got " + std::to_string(f.size()));
    }
    auto n = [&](const char* c) { return detail::to_num(f[at.at(c)], c, lineno); };
    auto l = [&](const char* c) { return detail::to_list(f[at.at(c)], c, lineno); };
    const auto t = std::size_t(n("step"));
    if (tr.steps.empty() || tr.steps.back().t != t) {
      StepRecord s;
      s.t = t;
      s.x0 = n("x0");
      s.x_next = n("x_next");
      s.ug0 = n("ug0");
      s.demand0 = n("demand0");
      s.ev_plan0 = n("ev_plan0");
      s.ev_real0 = n("ev_real0");
      s.ub0 = n("ub0");
      s.delta = n("delta");
      s.bimpc_outer = int(n("bimpc_outer"));
      s.bimpc_retried = n("bimpc_retried") != 0.0;
      for (double v : l("full_charged")) s.full_charged.push_back(std::size_t(v));
      s.x_pred = detail::to_vector(l("x_pred"));
      s.u_plan = detail::to_vector(l("u_plan"));
      tr.steps.push_back(std::move(s));
    }
    GroupRecord g;
    g.cls = std::size_t(n("cls"));
    g.slot = std::size_t(n("slot"));
    g.count = std::size_t(n("count"));
    g.center = n("center");
    g.dy0 = n("dy0");
    g.mean_y0 = n("mean_y0");
    g.weight = n("weight");
    g.radius = n("radius");
    g.err = n("err");
    g.first_err = n("first_err");
    g.iterations = int(n("iterations"));
    g.converged = n("converged") != 0.0;
    g.regularized = n("regularized") != 0.0;
    g.cap_hit = n("cap_hit") != 0.0;
    g.price_before = n("price_before");
    g.price_after = n("price_after");
    g.w_plan = detail::to_vector(l("w_plan"));
    g.w_real = detail::to_vector(l("w_real"));
    g.lambda = detail::to_vector(l("lambda"));
    g.dd_actual = l("dd_actual");
    g.dd_surrogate = l("dd_surrogate");
    if (g.w_plan.size() == 0 || g.w_plan.size() != g.w_real.size()) {
      throw TraceSchemaError("trace line " + std::to_string(lineno) + ": w_plan and w_real lengths differ");
    }
    if (g.dd_actual.size() != g.dd_surrogate.size()) {
      throw TraceSchemaError("trace line " + std::to_string(lineno) + ": dual-decrease columns differ in length");
    }
    tr.horizon = std::size_t(g.w_plan.size());
    tr.steps.back().groups.push_back(std::move(g));
  }
  return tr;
}

}  // namespace incentive_mpc::sim
