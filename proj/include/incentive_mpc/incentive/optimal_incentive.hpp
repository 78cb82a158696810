#pragma once

#include <memory>
#include <vector>

#include "incentive_mpc/incentive/incentive.hpp"
#include "incentive_mpc/lompc/population.hpp"
#include "incentive_mpc/prox/linear_program.hpp"

namespace incentive_mpc {

struct IncentiveOptions {
  double eps_tol = 1e-3;
  // eps = eps_scale * m
  double eps_scale = 0.01;
  int max_iter = 500;
  double lambda_cap = 1e6;
  double subproblem_tol = 1e-10;
};

struct IncentiveRun {
  Incentive incentive;
  Vector w_final;
  bool converged = false;
  std::vector<double> err_trajectory;
  std::vector<DualDecreaseAudit> audits;
};

// Majorization-minimization on the dual until |w_target - w| <= bound + eps_tol.
inline IncentiveRun solve_optimal_incentive(const ResponseOracle& respond, const IncentiveMap& map,
                                            double m, const Vector& w_target,
                                            double theta_bar_over_m, const Incentive& lambda_ws,
                                            const IncentiveOptions& opt = {},
                                            const DualOracle* audit_dual = nullptr) {
  require_same_size(w_target.size(), map.dim_w, "solve_optimal_incentive target");
  const double eps = opt.eps_scale * m;
  const double stop = theta_bar_over_m + opt.eps_tol;

  Vector lambda = lambda_ws.lambda.size() == map.dim_lambda ? map.project_dual_cone(lambda_ws.lambda)
                                                            : Vector::Zero(map.dim_lambda);
  Vector w = respond(lambda);
  double err = (w_target - w).norm();

  IncentiveRun run;
  run.err_trajectory.push_back(err);
  Vector best_lambda = lambda, best_w = w;
  double best_err = err;
  bool cap_hit = false;

  DualEvaluation at_k;
  if (audit_dual) at_k = (*audit_dual)(lambda);

  MMOptions mm;
  mm.lambda_cap = opt.lambda_cap;
  mm.tol = opt.subproblem_tol;

  int it = 0;
  while (err > stop && it < opt.max_iter) {
    MMState state;
    state.lambda_k = lambda;
    state.w_k = w;
    state.w_target = w_target;
    state.eps_k = eps;
    Incentive next = mm_lambda_update(state, map, m, mm);
    cap_hit = cap_hit || next.cap_hit;
    if (audit_dual) {
      DualEvaluation at_next = (*audit_dual)(next.lambda);
      run.audits.push_back(
          dual_decrease_audit(lambda, next.lambda, w_target, at_k, at_next, map, m, eps));
      at_k = std::move(at_next);
    }
    lambda = next.lambda;
    w = respond(lambda);
    err = (w_target - w).norm();
    run.err_trajectory.push_back(err);
    ++it;
    if (err < best_err) {
      best_err = err;
      best_lambda = lambda;
      best_w = w;
    }
  }

  run.converged = err <= stop;
  run.incentive.cone = map.cone;
  run.incentive.iterations = it;
  run.incentive.cap_hit = cap_hit;
  if (run.converged) {
    run.incentive.lambda = lambda;
    run.incentive.final_err = err;
    run.w_final = w;
  } else {
    run.incentive.lambda = best_lambda;
    run.incentive.final_err = best_err;
    run.w_final = best_w;
  }
  return run;
}

inline IncentiveRun solve_optimal_incentive(std::shared_ptr<const Population> pop, std::size_t group,
                                            const Vector& w_target, double theta_bar_over_m,
                                            const Incentive& lambda_ws,
                                            const IncentiveOptions& opt = {},
                                            const Executor& ex = Executor{}) {
  const LoMPCSpec& rep = pop->members.at(pop->groups.at(group).front());
  ResponseOracle oracle = make_group_oracle(pop, group, ex);
  return solve_optimal_incentive(oracle, *rep.incentive_map, rep.strong_m, w_target,
                                 theta_bar_over_m, lambda_ws, opt);
}

// Explicit matrix of w -> Dphi(w)^T lambda.
inline Matrix jacobian_t_matrix(const IncentiveMap& map, const Vector& w) {
  Matrix J(map.dim_w, map.dim_lambda);
  Vector e = Vector::Zero(map.dim_lambda), col(map.dim_w);
  for (Eigen::Index j = 0; j < map.dim_lambda; ++j) {
    e[j] = 1.0;
    map.jacobian_t(w, e, col);
    J.col(j) = col;
    e[j] = 0.0;
  }
  return J;
}

struct RegularizeOptions {
  double tol_feas = 1e-9;
  double tol_lp = 1e-10;
  int max_iter = 100;
};

// min <lambda, c> over K* with Dphi(w_i)^T (lambda - lambda_star) = 0 for every listed response
// and |lambda|_inf <= cap. Falls back to lambda_star whenever the solve does not strictly improve
// the objective.
inline Incentive regularize_incentive(const Incentive& lambda_star, const std::vector<Vector>& responses,
                                      const IncentiveMap& map, const Vector& c,
                                      double lambda_box_cap = 1e6,
                                      const RegularizeOptions& opt = {}) {
  require_same_size(c.size(), map.dim_lambda, "regularize_incentive cost");
  if (responses.empty()) throw std::invalid_argument("regularize_incentive: no responses");
  if (!map.in_dual_cone(lambda_star.lambda, 1e-12)) {
    throw ConeViolation("regularize_incentive: anchor outside the dual cone");
  }
  Incentive out = lambda_star;
  if (c.lpNorm<Eigen::Infinity>() == 0.0) return out;

  // orthonormal basis of the stacked row space keeps the equality block full rank
  Matrix stacked_t(map.dim_lambda, map.dim_w * Eigen::Index(responses.size()));
  for (std::size_t i = 0; i < responses.size(); ++i) {
    stacked_t.middleCols(Eigen::Index(i) * map.dim_w, map.dim_w) = jacobian_t_matrix(map, responses[i]).transpose();
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(stacked_t);
  qr.setThreshold(1e-12);
  const Eigen::Index rank = qr.rank();
  const Matrix Q = qr.householderQ() * Matrix::Identity(map.dim_lambda, rank);
  const Matrix A = Q.transpose();
  const Vector b = A * lambda_star.lambda;
  const BoxSet box = map.dual_cone_box(lambda_box_cap);
  BoxLPResult r;
  try {
    r = solve_box_lp(c, A, b, box, opt.tol_lp, opt.max_iter, &lambda_star.lambda);
  } catch (const std::exception&) {
    return out;
  }
  if (!r.x.allFinite()) return out;

  const double scale = 1.0 + lambda_star.lambda.lpNorm<Eigen::Infinity>();
  const double resid = (stacked_t.transpose() * (r.x - lambda_star.lambda)).lpNorm<Eigen::Infinity>();
  if (resid <= opt.tol_feas * scale * (1.0 + stacked_t.lpNorm<Eigen::Infinity>()) &&
      c.dot(r.x) < c.dot(lambda_star.lambda) && map.in_dual_cone(r.x)) {
    out.lambda = r.x;
    out.cap_hit = out.cap_hit ||
                  (r.x.cwiseAbs().array() >= lambda_box_cap * (1.0 - 1e-12)).any();
  }
  return out;
}

inline Incentive regularize_incentive(const Incentive& lambda_star, const Vector& w_at_lambda,
                                      const IncentiveMap& map, const Vector& c,
                                      double lambda_box_cap = 1e6,
                                      const RegularizeOptions& opt = {}) {
  return regularize_incentive(lambda_star, std::vector<Vector>{w_at_lambda}, map, c, lambda_box_cap, opt);
}

}  // namespace incentive_mpc
