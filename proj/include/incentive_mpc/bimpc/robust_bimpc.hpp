#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "incentive_mpc/bimpc/batch_dynamics.hpp"
#include "incentive_mpc/bimpc/tightening.hpp"
#include "incentive_mpc/prox/polytope.hpp"

namespace incentive_mpc {

// f(u, w) with gradients; u and w are stacked time-major.
using TeamCost = std::function<double(const Vector& u, const Vector& w, Vector& grad_u, Vector& grad_w)>;

struct RobustBiMPCSpec {
  BatchDynamics dynamics;
  Vector x0;
  // known exogenous contribution to the stacked state
  Vector state_offset;
  TightenedPolytope state_constraints;
  BoxSet input_box_u;
  BoxSet input_box_w;
  TeamCost cost;
  double cost_lipschitz_hint = 0.0;
  Eigen::Index horizon_r = 1;

  Eigen::Index dim_u() const { return dynamics.p * dynamics.N; }
  Eigen::Index dim_w() const { return dynamics.gamma * dynamics.N; }

  Vector free_state() const {
    Vector s = dynamics.A_bar * x0;
    if (state_offset.size() > 0) s += state_offset;
    return s;
  }

  Vector predict(const Vector& u, const Vector& w) const { return free_state() + dynamics.B1_bar * u + dynamics.B2_bar * w; }

  void validate() const {
    const Eigen::Index rows = dynamics.n * (dynamics.N + 1);
    require_same_size(x0.size(), dynamics.n, "RobustBiMPCSpec x0");
    if (state_offset.size() > 0) require_same_size(state_offset.size(), rows, "RobustBiMPCSpec offset");
    if (state_constraints.C.rows() > 0) require_same_size(state_constraints.C.cols(), rows, "RobustBiMPCSpec C");
    require_same_size(state_constraints.tightening.size(), state_constraints.C.rows(), "RobustBiMPCSpec tightening");
    require_same_size(input_box_u.dim(), dim_u(), "RobustBiMPCSpec u box");
    require_same_size(input_box_w.dim(), dim_w(), "RobustBiMPCSpec w box");
    if (horizon_r < 1 || horizon_r > dynamics.N) throw std::invalid_argument("RobustBiMPCSpec: horizon_r outside [1, N]");
    if (!cost) throw std::invalid_argument("RobustBiMPCSpec: cost missing");
  }
};

struct TeamPlan {
  Vector u;
  Vector w;
  Vector x_pred;
  PolytopeResult solver;
  bool retried = false;
};

struct TeamSolveOptions {
  double tol_feas = 1e-7;
  double tol_opt = 1e-6;
  double proximal_weight = 1e-2;
  int max_outer = 80;
  int max_inner = 20000;
  // subtracted from every inequality right-hand side so a tol_feas-level violation stays inside
  double backoff = 0.0;
};

namespace detail {

// Rows of C that depend on the decision, as a polytope over z = (u, w).
struct ReducedRows {
  Matrix G;
  Vector h;
  std::optional<std::string> constant_violation;
};

inline ReducedRows reduce_rows(const RobustBiMPCSpec& spec, double tol) {
  const auto& P = spec.state_constraints;
  const Eigen::Index nu = spec.dim_u(), nw = spec.dim_w();
  ReducedRows out;
  if (P.C.rows() == 0) {
    out.G = Matrix(0, nu + nw);
    out.h = Vector(0);
    return out;
  }
  Matrix full(P.C.rows(), nu + nw);
  full << P.C * spec.dynamics.B1_bar, P.C * spec.dynamics.B2_bar;
  const Vector rhs = P.d_tight() - P.C * spec.free_state();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < full.rows(); ++j) {
    if (full.row(j).lpNorm<Eigen::Infinity>() > 0.0) {
      keep.push_back(j);
    } else if (rhs[j] < -tol && !out.constant_violation) {
      out.constant_violation = "constraint row " + std::to_string(j) + " violated by the free response";
    }
  }
  out.G.resize(static_cast<Eigen::Index>(keep.size()), nu + nw);
  out.h.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.G.row(Eigen::Index(i)) = full.row(keep[i]);
    out.h[Eigen::Index(i)] = rhs[keep[i]];
  }
  return out;
}

}  // namespace detail

// Team-optimal plan under the tightened constraints. One retry at 10x relaxed tolerances,
// then InfeasibleStep.
inline TeamPlan solve_team_optimal(const RobustBiMPCSpec& spec, const TeamSolveOptions& opt = {},
                                   const Vector* initial = nullptr) {
  spec.validate();
  const Eigen::Index nu = spec.dim_u(), nw = spec.dim_w();
  auto rows = detail::reduce_rows(spec, opt.tol_feas);
  if (rows.constant_violation) throw InfeasibleStep("state_constraints", *rows.constant_violation);

  PolytopeProgram prog;
  prog.ineq_C = std::move(rows.G);
  prog.ineq_d = rows.h.array() - opt.backoff;
  prog.eq_A = Matrix(0, nu + nw);
  prog.eq_b = Vector(0);
  Vector lo(nu + nw), hi(nu + nw);
  lo << spec.input_box_u.lower, spec.input_box_w.lower;
  hi << spec.input_box_u.upper, spec.input_box_w.upper;
  prog.var_box = BoxSet(lo, hi);
  prog.lipschitz_hint = spec.cost_lipschitz_hint;
  const TeamCost& cost = spec.cost;
  prog.objective = [&cost, nu, nw](const Vector& z, Vector& g) {
    Vector gu(nu), gw(nw);
    const double f = cost(z.head(nu), z.tail(nw), gu, gw);
    g.resize(nu + nw);
    g << gu, gw;
    return f;
  };

  PolytopeOptions popt;
  popt.tol_feas = opt.tol_feas;
  popt.tol_opt = opt.tol_opt;
  popt.proximal_weight = opt.proximal_weight;
  popt.max_outer = opt.max_outer;
  popt.max_inner = opt.max_inner;
  if (initial) {
    require_same_size(initial->size(), nu + nw, "solve_team_optimal initial");
    popt.initial = *initial;
  }

  TeamPlan plan;
  plan.solver = solve_polytope(prog, popt);
  if (!plan.solver.converged()) {
    plan.retried = true;
    popt.tol_feas *= 10.0;
    popt.tol_opt *= 10.0;
    popt.initial = plan.solver.z;
    plan.solver = solve_polytope(prog, popt);
    if (!plan.solver.converged()) {
      throw InfeasibleStep("team_optimal_solve",
                           std::string("status ") + to_string(plan.solver.status) +
                               ", violation " + std::to_string(plan.solver.feasibility));
    }
  }
  plan.u = plan.solver.z.head(nu);
  plan.w = plan.solver.z.tail(nw);
  plan.x_pred = spec.predict(plan.u, plan.w);
  return plan;
}

}  // namespace incentive_mpc
