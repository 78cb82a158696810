#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "incentive_mpc/sim/closed_loop.hpp"

namespace incentive_mpc::sim {

struct Violation {
  std::size_t step = 0;
  long group = -1;  // -1 for system-level rows
  std::string kind;
  double value = 0.0;
  double limit = 0.0;
};

struct AuditReport {
  std::vector<Violation> violations;
  std::size_t steps_checked = 0;
  std::size_t groups_checked = 0;
  double min_storage_margin = std::numeric_limits<double>::infinity();
  double min_generation_margin = std::numeric_limits<double>::infinity();
  double min_rate_margin = std::numeric_limits<double>::infinity();
  double min_band_margin = std::numeric_limits<double>::infinity();  // radius - first-step error
  double max_energy_residual = 0.0;
  // metrics only
  double max_dynamics_residual = 0.0;
  double max_continuity_gap = 0.0;
  double max_prediction_gap_over_delta = 0.0;
  std::size_t dual_decrease_checked = 0;
  std::size_t dual_decrease_failed = 0;
  std::size_t nonconverged = 0;

  bool ok() const { return violations.empty(); }
};

struct AuditLimits {
  double x_max = 0.0;
  double ug_max = 0.0;
  double ub_max = 0.0;
  double eps_tol = 0.0;
  double tol = 1e-9;
  double dual_slack = 1e-8;
};

inline AuditLimits audit_limits(const ev::ScenarioConfig& s) {
  AuditLimits l;
  l.x_max = s.iso.x_max;
  l.ug_max = s.iso.ug_max;
  l.ub_max = s.iso.ub_max;
  l.eps_tol = s.solver.eps_tol;
  return l;
}

// Recomputes bounds, energy balance and consumption bands from the recorded plans and responses;
// ignores the recorded err/first_err/radius/delta columns.
inline AuditReport audit_trace(const ClosedLoopTrace& tr, const AuditLimits& lim) {
  AuditReport r;
  auto flag = [&](std::size_t t, long g, const char* kind, double v, double limit) {
    r.violations.push_back({t, g, kind, v, limit});
  };
  const double tol = lim.tol;
  for (std::size_t k = 0; k < tr.steps.size(); ++k) {
    const auto& s = tr.steps[k];
    ++r.steps_checked;
    if (k == 0) {
      if (s.x0 < -tol) flag(s.t, -1, "storage_lower", s.x0, 0.0);
      if (s.x0 > lim.x_max + tol) flag(s.t, -1, "storage_upper", s.x0, lim.x_max);
    } else {
      r.max_continuity_gap = std::max(r.max_continuity_gap, std::abs(s.x0 - tr.steps[k - 1].x_next));
    }
    if (s.x_next < -tol) flag(s.t, -1, "storage_lower", s.x_next, 0.0);
    if (s.x_next > lim.x_max + tol) flag(s.t, -1, "storage_upper", s.x_next, lim.x_max);
    r.min_storage_margin = std::min({r.min_storage_margin, s.x_next, lim.x_max - s.x_next});
    if (s.ug0 < -tol) flag(s.t, -1, "generation_lower", s.ug0, 0.0);
    if (s.ug0 > lim.ug_max + tol) flag(s.t, -1, "generation_upper", s.ug0, lim.ug_max);
    r.min_generation_margin = std::min({r.min_generation_margin, s.ug0, lim.ug_max - s.ug0});
    if (std::abs(s.ub0) > lim.ub_max + tol) flag(s.t, -1, "charge_rate", s.ub0, lim.ub_max);
    r.min_rate_margin = std::min(r.min_rate_margin, lim.ub_max - std::abs(s.ub0));

    double ev_real = 0.0, delta = 0.0;
    for (std::size_t g = 0; g < s.groups.size(); ++g) {
      const auto& gr = s.groups[g];
      ++r.groups_checked;
      const double N = double(gr.w_plan.size());
      const double radius = std::max(std::sqrt(N) * gr.dy0, lim.eps_tol);
      const double first = std::abs(gr.w_plan[0] - gr.w_real[0]);
      if (first > radius + tol) flag(s.t, long(g), "consumption_band", first, radius);
      r.min_band_margin = std::min(r.min_band_margin, radius - first);
      ev_real += gr.weight * gr.w_real[0];
      delta += gr.weight * radius;
      if (!gr.converged) ++r.nonconverged;
      for (std::size_t i = 0; i < gr.dd_actual.size(); ++i) {
        ++r.dual_decrease_checked;
        if (gr.dd_actual[i] < gr.dd_surrogate[i] - lim.dual_slack) ++r.dual_decrease_failed;
      }
    }
    const double balance = std::abs(s.ug0 - s.demand0 - ev_real - s.ub0);
    if (balance > tol) flag(s.t, -1, "energy_balance", balance, tol);
    r.max_energy_residual = std::max(r.max_energy_residual, balance);
    r.max_dynamics_residual = std::max(r.max_dynamics_residual, std::abs(s.x_next - s.x0 - s.ub0));
    if (s.x_pred.size() > 1 && delta > 0.0) {
      r.max_prediction_gap_over_delta =
          std::max(r.max_prediction_gap_over_delta, std::abs(s.x_next - s.x_pred[1]) / delta);
    }
  }
  return r;
}

inline AuditReport audit_trace(const ClosedLoopTrace& tr, const ev::ScenarioConfig& s) {
  return audit_trace(tr, audit_limits(s));
}

}  // namespace incentive_mpc::sim
