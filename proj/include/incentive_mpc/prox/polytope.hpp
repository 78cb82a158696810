#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>

#include "incentive_mpc/prox/composite.hpp"

namespace incentive_mpc {

// min f(z) s.t. eq_A z = eq_b, ineq_C z <= ineq_d, z in var_box
struct PolytopeProgram {
  std::function<double(const Vector& z, Vector& grad)> objective;
  Matrix eq_A;
  Vector eq_b;
  Matrix ineq_C;
  Vector ineq_d;
  BoxSet var_box;
  double lipschitz_hint = 0.0;

  Eigen::Index dim() const { return var_box.dim(); }
};

struct PolytopeOptions {
  double tol_feas = 1e-7;
  double tol_opt = 1e-6;
  int max_outer = 80;
  int max_inner = 20000;
  double rho0 = 1.0;
  double rho_growth = 10.0;
  double rho_max = 1e10;
  // weight of the proximal term anchored at the previous outer iterate
  double proximal_weight = 0.0;
  std::optional<Vector> initial;
};

struct PolytopeResult {
  Vector z;
  Vector eq_multipliers;
  Vector ineq_multipliers;
  double feasibility = 0.0;
  double stationarity = 0.0;
  double complementarity = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  SolveStatus status = SolveStatus::max_iter;

  bool converged() const { return status == SolveStatus::converged; }
};

namespace detail {

inline double spectral_norm_sq(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  const double s = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
  return s * s;
}

}  // namespace detail

inline void validate(const PolytopeProgram& p) {
  const Eigen::Index n = p.dim();
  if (p.eq_A.rows() > 0) require_same_size(p.eq_A.cols(), n, "eq_A columns");
  require_same_size(p.eq_A.rows(), p.eq_b.size(), "eq_A rows vs eq_b");
  if (p.ineq_C.rows() > 0) require_same_size(p.ineq_C.cols(), n, "ineq_C columns");
  require_same_size(p.ineq_C.rows(), p.ineq_d.size(), "ineq_C rows vs ineq_d");
  if (!p.objective) throw std::invalid_argument("PolytopeProgram: objective missing");
}

inline double polytope_violation(const PolytopeProgram& p, const Vector& z) {
  double v = 0.0;
  if (p.eq_A.rows() > 0) v = std::max(v, (p.eq_A * z - p.eq_b).lpNorm<Eigen::Infinity>());
  if (p.ineq_C.rows() > 0) v = std::max(v, (p.ineq_C * z - p.ineq_d).maxCoeff());
  return v;
}

inline PolytopeResult solve_polytope(const PolytopeProgram& prog, const PolytopeOptions& opt = {}) {
  validate(prog);
  const Eigen::Index n = prog.dim();
  const Eigen::Index me = prog.eq_A.rows();
  const Eigen::Index mi = prog.ineq_C.rows();
  const bool has_eq = me > 0;
  const bool has_in = mi > 0;

  Vector z = opt.initial ? *opt.initial : Vector::Zero(n);
  require_same_size(z.size(), n, "solve_polytope initial point");
  prog.var_box.project_in_place(z);

  Vector y = Vector::Zero(me);
  Vector mu = Vector::Zero(mi);
  Vector anchor = z;
  double rho = opt.rho0;
  const double tau = opt.proximal_weight;

  const double a_sq = has_eq ? detail::spectral_norm_sq(prog.eq_A) : 0.0;
  const double c_sq = has_in ? detail::spectral_norm_sq(prog.ineq_C) : 0.0;
  double lf = prog.lipschitz_hint;
  if (!(lf > 0.0)) {
    CompositeObjective probe;
    probe.smooth = prog.objective;
    probe.strong_convexity_m = 1.0;
    lf = estimate_lipschitz(probe, prog.var_box, z);
  }

  Vector r_eq(me), s_in(mi), grad_f(n);
  CompositeObjective inner;
  inner.strong_convexity_m = std::max(tau, 1e-12);
  inner.smooth = [&](const Vector& w, Vector& g) {
    double f = prog.objective(w, g);
    if (has_eq) {
      Vector r = prog.eq_A * w - prog.eq_b;
      f += y.dot(r) + 0.5 * rho * r.squaredNorm();
      g.noalias() += prog.eq_A.transpose() * (y + rho * r);
    }
    if (has_in) {
      Vector sh = (mu + rho * (prog.ineq_C * w - prog.ineq_d)).cwiseMax(0.0);
      f += (sh.squaredNorm() - mu.squaredNorm()) / (2.0 * rho);
      g.noalias() += prog.ineq_C.transpose() * sh;
    }
    if (tau > 0.0) {
      f += 0.5 * tau * (w - anchor).squaredNorm();
      g += tau * (w - anchor);
    }
    return f;
  };

  PolytopeResult res;
  double inner_tol = std::max(1e-2, opt.tol_opt);
  double prev_viol = std::numeric_limits<double>::infinity();
  int stuck = 0;

  for (int outer = 1; outer <= opt.max_outer; ++outer) {
    inner.lipschitz_hint = lf + rho * (a_sq + c_sq) + tau;
    CompositeOptions copt;
    copt.tol = inner_tol;
    copt.max_iter = opt.max_inner;
    copt.residual = ResidualScale::gradient;
    CompositeResult cr = solve_composite(inner, prog.var_box, copt, &z);
    z = cr.w;
    res.inner_iterations += cr.iterations;

    if (has_eq) {
      r_eq = prog.eq_A * z - prog.eq_b;
      y += rho * r_eq;
    }
    if (has_in) {
      s_in = prog.ineq_C * z - prog.ineq_d;
      mu = (mu + rho * s_in).cwiseMax(0.0);
    }
    anchor = z;

    double viol = 0.0;
    if (has_eq) viol = std::max(viol, r_eq.lpNorm<Eigen::Infinity>());
    if (has_in) viol = std::max(viol, s_in.maxCoeff());
    viol = std::max(viol, 0.0);

    prog.objective(z, grad_f);
    Vector lag = grad_f;
    if (has_eq) lag.noalias() += prog.eq_A.transpose() * y;
    if (has_in) lag.noalias() += prog.ineq_C.transpose() * mu;
    Vector stepped = z - lag;
    prog.var_box.project_in_place(stepped);
    const double stat = (z - stepped).lpNorm<Eigen::Infinity>();
    const double comp = has_in ? (mu.array() * s_in.array()).abs().maxCoeff() : 0.0;

    res.outer_iterations = outer;
    res.feasibility = viol;
    res.stationarity = stat;
    res.complementarity = comp;
    if (viol <= opt.tol_feas && stat <= opt.tol_opt && comp <= opt.tol_opt) {
      res.status = SolveStatus::converged;
      break;
    }

    if (viol > opt.tol_feas && viol > 0.25 * prev_viol) {
      if (rho >= opt.rho_max) {
        if (++stuck >= 3) {
          res.status = SolveStatus::infeasible;
          break;
        }
      }
      rho = std::min(rho * opt.rho_growth, opt.rho_max);
    }
    prev_viol = viol;
    inner_tol = std::max(0.1 * opt.tol_opt, 0.1 * inner_tol);
  }
  res.z = z;
  res.eq_multipliers = y;
  res.ineq_multipliers = mu;
  return res;
}

}  // namespace incentive_mpc
