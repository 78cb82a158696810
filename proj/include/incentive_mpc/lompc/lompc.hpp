#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "incentive_mpc/lompc/incentive_map.hpp"
#include "incentive_mpc/prox/composite.hpp"
#include "incentive_mpc/util/parallel.hpp"

namespace incentive_mpc {

class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Follower problem: min base(w) + <lambda, phi(w)> + <theta, w> over input_box.
struct LoMPCSpec {
  std::shared_ptr<const CompositeObjective> base_objective;
  std::shared_ptr<const BoxSet> input_box;
  Vector theta;
  double strong_m = 0.0;
  std::shared_ptr<const IncentiveMap> incentive_map;
};

struct MemberSolveOptions {
  double tol = 1e-8;
  int max_iter = 20000;
  // residuals above tol * failure_factor raise SolverFailure
  double failure_factor = 1e3;
  // use the exact piecewise-QP path when both the objective and the map expose their structure
  bool use_structure = true;
};

inline CompositeObjective incentivized_objective(const LoMPCSpec& spec, const Vector& lambda) {
  const CompositeObjective& base = *spec.base_objective;
  const IncentiveMap& map = *spec.incentive_map;
  CompositeObjective obj;
  obj.smooth = [&base, &map, &lambda, &theta = spec.theta](const Vector& w, Vector& g) {
    double f = base.smooth(w, g);
    f += map.pair(w, lambda, g);
    if (theta.size() > 0) {
      f += theta.dot(w);
      g += theta;
    }
    return f;
  };
  obj.prox = base.prox;
  obj.prox_value = base.prox_value;
  obj.strong_convexity_m = spec.strong_m;
  if (base.lipschitz_hint > 0.0) {
    obj.lipschitz_hint =
        base.lipschitz_hint + (map.curvature_bound ? map.curvature_bound(lambda) : 0.0);
  }
  return obj;
}

inline Vector solve_member(const LoMPCSpec& spec, const Vector& lambda,
                           const MemberSolveOptions& opt = {}, const Vector* warm = nullptr) {
  const IncentiveMap& map = *spec.incentive_map;
  if (!map.in_dual_cone(lambda)) {
    throw ConeViolation("solve_member: incentive is outside the dual cone");
  }
  if (spec.theta.size() > 0) require_same_size(spec.theta.size(), map.dim_w, "theta");
  const CompositeObjective& base = *spec.base_objective;
  Vector fallback;
  if (opt.use_structure && base.piecewise && map.pairing_quadratic &&
      (!base.has_prox() || base.piecewise->hinge.weight > 0.0)) {
    PiecewiseQP qp = *base.piecewise;
    Vector d, l;
    map.pairing_quadratic(lambda, d, l);
    qp.H.diagonal() += d;
    qp.h += l;
    if (spec.theta.size() > 0) qp.h += spec.theta;
    PiecewiseQPResult r = solve_piecewise_qp(qp, *spec.input_box, 1e-11, 60, warm);
    if (r.converged) return r.w;
    fallback = r.w;
    warm = &fallback;
  }
  const CompositeObjective obj = incentivized_objective(spec, lambda);
  CompositeOptions copt;
  copt.tol = opt.tol;
  copt.max_iter = opt.max_iter;
  CompositeResult r = solve_composite(obj, *spec.input_box, copt, warm);
  if (r.residual > opt.tol * opt.failure_factor) {
    throw SolverFailure("member solve residual " + std::to_string(r.residual) + " (" +
                        to_string(r.status) + ")");
  }
  return r.w;
}

// Dual function value min_w base(w) + <lambda, phi(w)> + <theta, w> and its minimizer.
struct DualEvaluation {
  double value = 0.0;
  Vector w;
};

inline DualEvaluation evaluate_dual(const LoMPCSpec& spec, const Vector& lambda,
                                    const MemberSolveOptions& opt = {},
                                    const Vector* warm = nullptr) {
  DualEvaluation d;
  d.w = solve_member(spec, lambda, opt, warm);
  d.value = incentivized_objective(spec, lambda).value(d.w);
  return d;
}

// theta^i = 2 delta capacity^2 (y0_center - y0_member) 1
inline Vector build_parametric_theta(double y0_member, double y0_center, double delta,
                                     double capacity, Eigen::Index horizon) {
  return Vector::Constant(horizon, 2.0 * delta * capacity * capacity * (y0_center - y0_member));
}

inline double theta_bound(double delta, double capacity, double dy0, Eigen::Index horizon) {
  if (delta < 0 || capacity < 0 || dy0 < 0 || horizon < 0) {
    throw std::invalid_argument("theta_bound: inputs must be nonnegative");
  }
  return 2.0 * delta * capacity * capacity * dy0 * std::sqrt(double(horizon));
}

}  // namespace incentive_mpc
