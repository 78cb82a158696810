#pragma once

#include <algorithm>
#include <cmath>

#include "incentive_mpc/prox/box_set.hpp"
#include "incentive_mpc/prox/composite.hpp"

namespace incentive_mpc {

struct BoxLPResult {
  Vector x;
  Vector y;
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double mu = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::max_iter;

  bool converged() const { return status == SolveStatus::converged; }
};

// min c'x s.t. A x = b, lower <= x <= upper (finite bounds).
// Mehrotra predictor-corrector on the shifted variable s = x - lower.
inline BoxLPResult solve_box_lp(const Vector& c, const Matrix& A, const Vector& b,
                                const BoxSet& box, double tol = 1e-10, int max_iter = 100,
                                const Vector* hint = nullptr) {
  const Eigen::Index n = c.size();
  const Eigen::Index m = A.rows();
  require_same_size(box.dim(), n, "solve_box_lp box");
  if (m > 0) require_same_size(A.cols(), n, "solve_box_lp A");
  require_same_size(b.size(), m, "solve_box_lp b");
  if (!box.lower.allFinite() || !box.upper.allFinite()) {
    throw std::invalid_argument("solve_box_lp: bounds must be finite");
  }
  const Vector U = box.upper - box.lower;
  if ((U.array() <= 0.0).any()) throw std::invalid_argument("solve_box_lp: degenerate box");
  const Vector bs = b - A * box.lower;

  // start inside the box, near the hint when one is given
  Vector s(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double margin = std::min(1.0, 0.25 * U[i]);
    const double guess = hint ? (*hint)[i] - box.lower[i] : 0.5 * U[i];
    s[i] = std::clamp(guess, margin, U[i] - margin);
  }
  Vector t = U - s;
  const double dual0 = 1.0 + c.lpNorm<Eigen::Infinity>();
  Vector z = Vector::Constant(n, dual0), v = Vector::Constant(n, dual0);
  Vector y = Vector::Zero(m);

  const auto max_step = [](const Vector& x, const Vector& dx) {
    double a = 1.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (dx[i] < 0.0) a = std::min(a, -x[i] / dx[i]);
    }
    return a;
  };

  BoxLPResult res;
  const double bnorm = 1.0 + bs.lpNorm<Eigen::Infinity>();
  const double cnorm = 1.0 + c.lpNorm<Eigen::Infinity>();
  Vector rb(m), rc(n), D(n), h(n), ds(n), dz(n), dv(n), dy(m);
  Matrix M(m, m);

  const auto newton = [&](const Vector& r_sz, const Vector& r_tv) {
    // A D^-1 A' dy = rb + A D^-1 h
    h = rc - r_sz.cwiseQuotient(s) + r_tv.cwiseQuotient(t);
    const Vector Dinv = D.cwiseInverse();
    if (m > 0) {
      M = A * Dinv.asDiagonal() * A.transpose();
      M.diagonal().array() += 1e-14 * (1.0 + M.diagonal().cwiseAbs().maxCoeff());
      dy = M.ldlt().solve(rb + A * Dinv.cwiseProduct(h));
      ds = Dinv.cwiseProduct(A.transpose() * dy - h);
    } else {
      ds = -Dinv.cwiseProduct(h);
    }
    dz = (r_sz - z.cwiseProduct(ds)).cwiseQuotient(s);
    dv = (r_tv + v.cwiseProduct(ds)).cwiseQuotient(t);
  };

  int it = 0;
  for (; it < max_iter; ++it) {
    rb = bs - A * s;
    rc = c - z + v;
    if (m > 0) rc -= A.transpose() * y;
    const double mu = (s.dot(z) + t.dot(v)) / double(2 * n);
    res.primal_residual = m > 0 ? rb.lpNorm<Eigen::Infinity>() : 0.0;
    res.dual_residual = rc.lpNorm<Eigen::Infinity>();
    res.mu = mu;
    if (res.primal_residual <= tol * bnorm && res.dual_residual <= tol * cnorm &&
        mu <= tol * (1.0 + std::abs(c.dot(s)))) {
      res.status = SolveStatus::converged;
      break;
    }
    D = z.cwiseQuotient(s) + v.cwiseQuotient(t);

    // predictor
    Vector r_sz = -s.cwiseProduct(z);
    Vector r_tv = -t.cwiseProduct(v);
    newton(r_sz, r_tv);
    const Vector dt_aff = -ds;
    const double ap = std::min(max_step(s, ds), max_step(t, dt_aff));
    const double ad = std::min(max_step(z, dz), max_step(v, dv));
    const double mu_aff = ((s + ap * ds).dot(z + ad * dz) + (t + ap * dt_aff).dot(v + ad * dv)) /
                          double(2 * n);
    const double sigma = std::pow(mu_aff / mu, 3.0);

    // corrector
    r_sz = (sigma * mu) * Vector::Ones(n) - s.cwiseProduct(z) - ds.cwiseProduct(dz);
    r_tv = (sigma * mu) * Vector::Ones(n) - t.cwiseProduct(v) - dt_aff.cwiseProduct(dv);
    newton(r_sz, r_tv);
    const Vector dt = -ds;
    const double eta = 0.995;
    const double alpha_p = eta * std::min({1.0 / eta, max_step(s, ds), max_step(t, dt)});
    const double alpha_d = eta * std::min({1.0 / eta, max_step(z, dz), max_step(v, dv)});
    s += alpha_p * ds;
    t = U - s;
    t = t.cwiseMax(1e-300);
    z += alpha_d * dz;
    v += alpha_d * dv;
    if (m > 0) y += alpha_d * dy;
  }
  res.iterations = it;
  res.x = box.lower + s;
  box.project_in_place(res.x);
  res.y = y;
  res.objective = c.dot(res.x);
  return res;
}

}  // namespace incentive_mpc
