#pragma once

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "incentive_mpc/ev/config.hpp"
#include "incentive_mpc/ev/experiments.hpp"
#include "incentive_mpc/sim/summary.hpp"
#include "incentive_mpc/sim/trace_io.hpp"

namespace incentive_mpc::cli {

enum ExitCode : int { kClean = 0, kError = 1, kFlagged = 2, kAssertion = 3 };

using sim::detail::num;

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

inline ev::ScenarioConfig scenario_or_default(const std::string& path) {
  return path.empty() ? ev::default_scenario() : ev::load_scenario(path);
}

inline nlohmann::json summary_json(const sim::RunSummary& r, const ev::ScenarioConfig& s) {
  nlohmann::json j;
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : ev::scenario_entries(s)) cfg[k] = v;
  j["config"] = cfg;
  j["b_kwh"] = r.b_kwh;
  j["steps"] = r.steps;
  j["group_steps"] = r.group_steps;
  j["iterations"] = {{"mean", r.mean_iterations}, {"max", r.max_iterations}};
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& cs = r.per_class[c];
    classes.push_back({{"name", s.classes.at(c).name},
                       {"full_charged", cs.full_charged},
                       {"group_steps", cs.group_steps},
                       {"mean_iterations", cs.mean_iterations},
                       {"max_iterations", cs.max_iterations}});
  }
  j["classes"] = classes;
  j["nonconverged_groups"] = r.nonconverged;
  j["flagged_steps"] = r.flagged_steps;
  j["regularized_groups"] = r.regularized;
  j["lambda_cap_hits"] = r.cap_hits;
  j["bimpc_retries"] = r.bimpc_retries;
  j["consumption_demand_correlation"] = r.consumption_demand_correlation;
  j["peak_generation"] = r.peak_generation;
  j["greedy_peak"] = r.greedy_peak;
  const auto& a = r.audit;
  nlohmann::json viol = nlohmann::json::array();
  for (const auto& v : a.violations) {
    viol.push_back({{"step", v.step}, {"group", v.group}, {"kind", v.kind}, {"value", v.value}, {"limit", v.limit}});
  }
  auto finite = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  j["audit"] = {{"ok", a.ok()},
                {"violations", viol},
                {"min_storage_margin", finite(a.min_storage_margin)},
                {"min_generation_margin", finite(a.min_generation_margin)},
                {"min_rate_margin", finite(a.min_rate_margin)},
                {"min_band_margin", finite(a.min_band_margin)},
                {"max_energy_residual", a.max_energy_residual},
                {"max_dynamics_residual", a.max_dynamics_residual},
                {"max_continuity_gap", a.max_continuity_gap},
                {"max_prediction_gap_over_delta", a.max_prediction_gap_over_delta},
                {"dual_decrease_checked", a.dual_decrease_checked},
                {"dual_decrease_failed", a.dual_decrease_failed}};
  return j;
}

struct RunArgs {
  std::string scenario;
  std::string out = "trace.csv";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::size_t threads = 0;
};

// Trace to `out`, summary to `out`.summary.json.
inline int cmd_run(const RunArgs& a, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  ev::ScenarioConfig s;
  try {
    s = scenario_or_default(a.scenario);
    if (a.seed) s.seed = *a.seed;
    if (a.steps) s.steps = *a.steps;
    s.validate();
  } catch (const ev::ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kError;
  }
  sim::SimOptions opt;
  opt.threads = resolve_thread_count(a.threads);
  sim::ClosedLoopTrace tr;
  try {
    tr = sim::run(s, s.steps, opt, [&](const sim::StepRecord& r) {
      int it = 0;
      for (const auto& g : r.groups) it += g.iterations;
      log << "step " << r.t << " x " << num(r.x_next) << " ug " << num(r.ug0) << " iterations " << it
          << (r.flagged() ? " flagged" : "") << "\n";
    });
  } catch (const std::exception& e) {
    err << "run failed: " << e.what() << "\n";
    return kError;
  }
  const auto summary = sim::summarize(tr, s);
  try {
    auto out = open_out(a.out);
    sim::write_trace_csv(out, tr);
    auto js = open_out(a.out + ".summary.json");
    js << summary_json(summary, s).dump(2) << "\n";
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kError;
  }
  for (const auto& v : summary.audit.violations) {
    err << "audit: step " << v.step << " group " << v.group << " " << v.kind << " " << num(v.value) << " limit "
        << num(v.limit) << "\n";
  }
  log << "steps " << summary.steps << " nonconverged groups " << summary.nonconverged << " audit "
      << (summary.audit.ok() ? "ok" : "violations") << "\n";
  const bool flagged = summary.nonconverged > 0 || summary.bimpc_retries > 0 || !summary.audit.ok();
  return flagged ? kFlagged : kClean;
}

inline const ev::EVClassConfig& class_by_name(const ev::ScenarioConfig& s, const std::string& name) {
  for (const auto& c : s.classes)
    if (c.name == name) return c;
  throw ev::ConfigError("class", "no EV class named '" + name + "'");
}

struct VerifyBoundArgs {
  std::string scenario;
  std::string cls = "large";
  std::size_t members = 20;
  std::vector<double> dy0_grid{0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10};
  std::size_t trials = 10;
  std::uint64_t seed = 42;
  std::string out = "verify_bound.csv";
  std::size_t threads = 0;
};

inline int cmd_verify_bound(const VerifyBoundArgs& a, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  std::vector<ev::BoundSample> samples;
  try {
    const auto s = scenario_or_default(a.scenario);
    ev::BoundExperiment e;
    e.members = a.members;
    e.dy0_grid = a.dy0_grid;
    e.trials = a.trials;
    e.horizon = Eigen::Index(s.horizon);
    e.seed = a.seed;
    samples = ev::verify_bound(class_by_name(s, a.cls), e, Executor(resolve_thread_count(a.threads)));
    auto out = open_out(a.out);
    out << "dy0,trial,members,err,bound\n";
    for (const auto& x : samples) {
      out << num(x.dy0) << ',' << x.trial << ',' << x.members << ',' << num(x.err) << ',' << num(x.bound) << '\n';
    }
  } catch (const std::exception& e) {
    err << "verify-bound: " << e.what() << "\n";
    return kError;
  }
  std::size_t bad = 0;
  double worst = 0.0;
  for (const auto& x : samples) {
    if (x.bound > 0.0) worst = std::max(worst, x.err / x.bound);
    if (!x.ok()) {
      ++bad;
      err << "bound violated: dy0 " << num(x.dy0) << " trial " << x.trial << " err " << num(x.err) << " bound "
          << num(x.bound) << "\n";
    }
  }
  log << samples.size() << " samples, " << bad << " violations, worst err/bound " << num(worst) << "\n";
  return bad ? kAssertion : kClean;
}

struct VerifyDualArgs {
  std::string scenario;
  std::string cls = "large";
  std::size_t members = 200;
  std::size_t trials = 50;
  std::uint64_t seed = 7;
  std::string out = "verify_dual_decrease.csv";
  std::size_t threads = 0;
};

inline int cmd_verify_dual_decrease(const VerifyDualArgs& a, std::ostream& log = std::cout,
                                    std::ostream& err = std::cerr) {
  ev::DualDecreaseResult res;
  try {
    const auto s = scenario_or_default(a.scenario);
    ev::DualDecreaseExperiment e;
    e.members = a.members;
    e.runs = a.trials;
    e.horizon = Eigen::Index(s.horizon);
    e.seed = a.seed;
    res = ev::verify_dual_decrease(class_by_name(s, a.cls), e, Executor(resolve_thread_count(a.threads)));
    auto out = open_out(a.out);
    out << "run,iteration,actual_decrease,surrogate_decrease\n";
    for (const auto& x : res.samples) {
      out << x.run << ',' << x.iteration << ',' << num(x.actual) << ',' << num(x.surrogate) << '\n';
    }
  } catch (const std::exception& e) {
    err << "verify-dual-decrease: " << e.what() << "\n";
    return kError;
  }
  std::size_t bad = 0;
  double slack = std::numeric_limits<double>::infinity();
  for (const auto& x : res.samples) {
    slack = std::min(slack, x.actual - x.surrogate);
    if (!x.ok()) {
      ++bad;
      err << "decrease violated: run " << x.run << " iteration " << x.iteration << " actual " << num(x.actual)
          << " surrogate " << num(x.surrogate) << "\n";
    }
  }
  log << res.samples.size() << " iterates, " << bad << " violations, min slack "
      << (res.samples.empty() ? std::string("n/a") : num(slack)) << "\n";
  return bad ? kAssertion : kClean;
}

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"error-bound", "dual-decrease", "aggregate-consumption", "generation",
                                            "storage"};
  return ids;
}

// Tidy per-figure table; trace energies are already fractions of B.
inline void write_plot_data(std::ostream& out, const sim::ClosedLoopTrace& tr, const std::string& figure) {
  if (figure == "error-bound") {
    out << "t,group,cls,slot,err,band_lo,band_hi\n";
    for (const auto& s : tr.steps)
      for (std::size_t g = 0; g < s.groups.size(); ++g) {
        const auto& r = s.groups[g];
        out << s.t << ',' << g << ',' << r.cls << ',' << r.slot << ',' << num(std::abs(r.w_plan[0] - r.w_real[0]))
            << ",0," << num(r.radius) << '\n';
      }
  } else if (figure == "dual-decrease") {
    out << "t,group,iteration,actual_decrease,surrogate_decrease\n";
    for (const auto& s : tr.steps)
      for (std::size_t g = 0; g < s.groups.size(); ++g) {
        const auto& r = s.groups[g];
        for (std::size_t k = 0; k < r.dd_actual.size(); ++k) {
          out << s.t << ',' << g << ',' << k << ',' << num(r.dd_actual[k]) << ',' << num(r.dd_surrogate[k]) << '\n';
        }
      }
  } else if (figure == "aggregate-consumption") {
    out << "t,ev_plan/B,ev_real/B,band_lo,band_hi\n";
    for (const auto& s : tr.steps) {
      out << s.t << ',' << num(s.ev_plan0) << ',' << num(s.ev_real0) << ',' << num(s.ev_plan0 - s.delta) << ','
          << num(s.ev_plan0 + s.delta) << '\n';
    }
  } else if (figure == "generation") {
    out << "t,u_g/B,demand/B\n";
    for (const auto& s : tr.steps) out << s.t << ',' << num(s.ug0) << ',' << num(s.demand0) << '\n';
  } else if (figure == "storage") {
    out << "t,x_pred/B,x_real/B,band_lo,band_hi\n";
    for (const auto& s : tr.steps) {
      const double pred = s.x_pred.size() > 1 ? s.x_pred[1] : s.x_next;
      out << s.t + 1 << ',' << num(pred) << ',' << num(s.x_next) << ',' << num(pred - s.delta) << ','
          << num(pred + s.delta) << '\n';
    }
  } else {
    throw std::invalid_argument("unknown figure '" + figure + "'");
  }
}

inline std::optional<sim::ClosedLoopTrace> load_trace(const std::string& path, std::ostream& err) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    err << "cannot open trace " << path << "\n";
    return std::nullopt;
  }
  try {
    return sim::read_trace_csv(in);
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return std::nullopt;
  }
}

inline int cmd_plot_data(const std::string& trace, const std::string& figure, const std::string& out_path,
                         std::ostream& err = std::cerr) {
  auto tr = load_trace(trace, err);
  if (!tr) return kError;
  try {
    std::ostringstream buf;
    write_plot_data(buf, *tr, figure);
    auto out = open_out(out_path);
    out << buf.str();
  } catch (const std::exception& e) {
    err << "plot-data: " << e.what() << "\n";
    return kError;
  }
  return kClean;
}

inline int cmd_audit(const std::string& trace, const std::string& scenario, std::ostream& log = std::cout,
                     std::ostream& err = std::cerr) {
  auto tr = load_trace(trace, err);
  if (!tr) return kError;
  ev::ScenarioConfig s;
  try {
    s = scenario_or_default(scenario);
  } catch (const ev::ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kError;
  }
  const auto rep = sim::audit_trace(*tr, s);
  for (const auto& v : rep.violations) {
    log << "violation step " << v.step << " group " << v.group << " " << v.kind << " " << num(v.value) << " limit "
        << num(v.limit) << "\n";
  }
  log << "steps " << rep.steps_checked << " groups " << rep.groups_checked << " violations " << rep.violations.size()
      << " max energy residual " << num(rep.max_energy_residual) << " min band margin "
      << (rep.groups_checked ? num(rep.min_band_margin) : std::string("n/a")) << "\n";
  return rep.ok() ? kClean : kAssertion;
}

}  // namespace incentive_mpc::cli
