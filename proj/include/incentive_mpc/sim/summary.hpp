#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "incentive_mpc/ev/ev_bimpc.hpp"
#include "incentive_mpc/sim/audit.hpp"

namespace incentive_mpc::sim {

struct ClassStats {
  std::size_t full_charged = 0;
  std::size_t group_steps = 0;
  double mean_iterations = 0.0;
  int max_iterations = 0;
};

struct RunSummary {
  double b_kwh = 0.0;
  std::size_t steps = 0;
  std::size_t group_steps = 0;
  double mean_iterations = 0.0;
  int max_iterations = 0;
  std::vector<ClassStats> per_class;
  std::size_t nonconverged = 0;
  std::size_t flagged_steps = 0;
  std::size_t regularized = 0;
  std::size_t cap_hits = 0;
  std::size_t bimpc_retries = 0;
  double consumption_demand_correlation = 0.0;
  double peak_generation = 0.0;
  double greedy_peak = 0.0;  // peak of demand plus uncontrolled charging
  AuditReport audit;
};

// Pearson correlation; zero when either series is constant.
inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n < 2) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= double(n);
  mb /= double(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

inline RunSummary summarize(const ClosedLoopTrace& tr, const ev::ScenarioConfig& s) {
  RunSummary r;
  r.b_kwh = tr.b_kwh;
  r.steps = tr.steps.size();
  r.per_class.resize(s.classes.size());
  const auto fc = tr.full_charged_per_class(s.classes.size());
  for (std::size_t c = 0; c < s.classes.size(); ++c) r.per_class[c].full_charged = fc[c];

  std::vector<double> ev, demand;
  double total = 0.0;
  for (const auto& st : tr.steps) {
    ev.push_back(st.ev_real0);
    demand.push_back(st.demand0);
    r.peak_generation = std::max(r.peak_generation, st.ug0);
    if (st.flagged()) ++r.flagged_steps;
    if (st.bimpc_retried) ++r.bimpc_retries;
    for (const auto& g : st.groups) {
      ++r.group_steps;
      total += g.iterations;
      r.max_iterations = std::max(r.max_iterations, g.iterations);
      auto& cs = r.per_class.at(g.cls);
      ++cs.group_steps;
      cs.mean_iterations += g.iterations;
      cs.max_iterations = std::max(cs.max_iterations, g.iterations);
      if (!g.converged) ++r.nonconverged;
      if (g.regularized) ++r.regularized;
      if (g.cap_hit) ++r.cap_hits;
    }
  }
  if (r.group_steps) r.mean_iterations = total / double(r.group_steps);
  for (auto& cs : r.per_class) {
    if (cs.group_steps) cs.mean_iterations /= double(cs.group_steps);
  }
  r.consumption_demand_correlation = correlation(ev, demand);

  if (!tr.steps.empty()) {
    const auto greedy = ev::greedy_charging_baseline(s, std::vector<double>(tr.initial.y.begin(), tr.initial.y.end()),
                                                     tr.initial.cls, tr.steps.size(), s.seed);
    for (std::size_t t = 0; t < tr.steps.size(); ++t) {
      r.greedy_peak = std::max(r.greedy_peak, tr.steps[t].demand0 + greedy[t]);
    }
  }
  r.audit = audit_trace(tr, s);
  return r;
}

}  // namespace incentive_mpc::sim
