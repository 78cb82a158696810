#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "incentive_mpc/lompc/incentive_map.hpp"
#include "incentive_mpc/lompc/lompc.hpp"
#include "incentive_mpc/prox/composite.hpp"

namespace incentive_mpc {

struct Incentive {
  Vector lambda;
  ConeTag cone = ConeTag::nonneg;
  int iterations = 0;
  double final_err = std::numeric_limits<double>::quiet_NaN();
  bool cap_hit = false;
};

inline Incentive zero_incentive(const IncentiveMap& map) {
  Incentive inc;
  inc.lambda = Vector::Zero(map.dim_lambda);
  inc.cone = map.cone;
  return inc;
}

// lambda_k + m (w_k - w_target)
inline Vector linear_ascent_step(const Vector& lambda_k, const Vector& w_k, const Vector& w_target,
                                 double m) {
  require_same_size(lambda_k.size(), w_k.size(), "linear_ascent_step lambda/w");
  require_same_size(w_k.size(), w_target.size(), "linear_ascent_step w/target");
  return lambda_k + m * (w_k - w_target);
}

struct MMState {
  Vector lambda_k;
  Vector w_k;
  Vector w_target;
  double eps_k = 0.0;
  double surrogate_decrease = 0.0;
  std::pair<double, double> actual_decrease_lhs_rhs{0.0, 0.0};
};

struct MMOptions {
  double lambda_cap = 1e6;
  double tol = 1e-10;
  int max_iter = 20000;
};

// argmin over K* (capped) of
//   eps |l - l_k|^2 + <l - l_k, phi(w_target) - phi(w_k)> + 1/(2m) |Dphi(w_k)^T (l - l_k)|^2
inline Incentive mm_lambda_update(const MMState& state, const IncentiveMap& map, double m,
                                  const MMOptions& opt = {}) {
  if (!(state.eps_k > 0.0)) throw std::invalid_argument("mm_lambda_update: eps must be positive");
  require_same_size(state.lambda_k.size(), map.dim_lambda, "mm_lambda_update lambda");
  const Vector lin = map.eval(state.w_target) - map.eval(state.w_k);
  const Vector& lk = state.lambda_k;
  const Vector& wk = state.w_k;
  const double eps = state.eps_k;

  CompositeObjective obj;
  Vector jt(map.dim_w), jj(map.dim_lambda);
  obj.smooth = [&](const Vector& l, Vector& g) {
    const Vector d = l - lk;
    map.jacobian_t(wk, d, jt);
    map.jacobian(wk, jt, jj);
    g = 2.0 * eps * d + lin + jj / m;
    return eps * d.squaredNorm() + d.dot(lin) + jt.squaredNorm() / (2.0 * m);
  };
  obj.strong_convexity_m = 2.0 * eps;

  const BoxSet box = map.dual_cone_box(opt.lambda_cap);
  Vector start = project_box(lk, box);
  CompositeOptions copt;
  copt.tol = opt.tol * (1.0 + lk.lpNorm<Eigen::Infinity>());
  copt.max_iter = opt.max_iter;
  CompositeResult r = solve_composite(obj, box, copt, &start);

  Incentive out;
  out.lambda = r.w;
  out.cone = map.cone;
  out.cap_hit = (r.w.cwiseAbs().array() >= opt.lambda_cap * (1.0 - 1e-12)).any();
  return out;
}

struct DualDecreaseAudit {
  double lhs = 0.0;  // g~(l_k) - g~(l_{k+1})
  double rhs = 0.0;  // -g~(l_{k+1}; l_k) + g~(l_k; l_k) + eps |dl|^2
  double actual_decrease = 0.0;     // decrease of -g~
  double surrogate_decrease = 0.0;  // decrease of the regularized surrogate
  bool ok = true;
};

using DualOracle = std::function<DualEvaluation(const Vector& lambda)>;

// g~(l) = gbar(l) - <l, phi(w_target)>, gbar(l) = min_w g(w) + <l, phi(w)>.
// The surrogate is anchored at the response w(l_k) of the same dual function.
inline DualDecreaseAudit dual_decrease_audit(const Vector& lambda_k, const Vector& lambda_next,
                                             const Vector& w_target, const DualEvaluation& at_k,
                                             const DualEvaluation& at_next,
                                             const IncentiveMap& map, double m, double eps,
                                             double slack = 1e-8) {
  const Vector phi_t = map.eval(w_target);
  const Vector dl = lambda_next - lambda_k;
  const double gt_k = at_k.value - lambda_k.dot(phi_t);
  const double gt_next = at_next.value - lambda_next.dot(phi_t);
  const Vector jt = map.jt(at_k.w, dl);
  const double sur_next =
      at_k.value + dl.dot(map.eval(at_k.w)) - jt.squaredNorm() / (2.0 * m) - lambda_next.dot(phi_t);
  const double sur_k = gt_k;
  DualDecreaseAudit a;
  a.lhs = gt_k - gt_next;
  a.rhs = -sur_next + sur_k + eps * dl.squaredNorm();
  a.actual_decrease = -a.lhs;
  a.surrogate_decrease = -a.rhs;
  a.ok = a.actual_decrease >= a.surrogate_decrease - slack;
  return a;
}

}  // namespace incentive_mpc
