#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "incentive_mpc/prox/box_set.hpp"
#include "incentive_mpc/prox/piecewise_qp.hpp"

namespace incentive_mpc {

// Smooth part returns its value and writes the gradient. The prox term must be
// coordinatewise separable so that clamping its prox into the box stays exact.
struct CompositeObjective {
  std::function<double(const Vector& w, Vector& grad)> smooth;
  std::function<void(const Vector& v, double t, Vector& out)> prox;
  std::function<double(const Vector& w)> prox_value;
  double strong_convexity_m = 0.0;
  double lipschitz_hint = 0.0;
  // optional exact form: smooth = 0.5 w'Hw + h'w + const, prox term = hinge
  std::optional<PiecewiseQP> piecewise;

  bool has_prox() const { return static_cast<bool>(prox); }

  double value(const Vector& w) const {
    Vector g(w.size());
    double f = smooth(w, g);
    if (prox_value) f += prox_value(w);
    return f;
  }
};

enum class SolveStatus { converged, max_iter, stalled, infeasible };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::stalled: return "stalled";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

// distance: gradient-mapping norm divided by m (units of w).
// gradient: infinity norm of the gradient mapping.
enum class ResidualScale { distance, gradient };

struct CompositeOptions {
  double tol = 1e-8;
  int max_iter = 10000;
  ResidualScale residual = ResidualScale::distance;
  bool record_objective = false;
};

struct CompositeResult {
  Vector w;
  double residual = 0.0;
  double objective = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::max_iter;
  std::vector<double> objective_trace;

  bool converged() const { return status == SolveStatus::converged; }
};

namespace detail {

inline void prox_box(const CompositeObjective& obj, const BoxSet& box, const Vector& v,
                     double t, Vector& out) {
  if (obj.has_prox()) {
    obj.prox(v, t, out);
  } else {
    out = v;
  }
  box.project_in_place(out);
}

inline double check_finite(double f, const Vector& g) {
  if (!std::isfinite(f) || !g.allFinite()) {
    throw NonFiniteObjective("smooth objective returned a non-finite value or gradient");
  }
  return f;
}

}  // namespace detail

// Power iteration on gradient differences; exact for quadratics.
inline double estimate_lipschitz(const CompositeObjective& obj, const BoxSet& box,
                                 const Vector& x) {
  const Eigen::Index n = x.size();
  if (n == 0) return 1.0;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 0.37 * std::sin(1.7 * double(i) + 0.3);
  v.normalize();
  Vector g0(n), g1(n), p(n);
  obj.smooth(x, g0);
  const double s = 1e-4 * (1.0 + x.lpNorm<Eigen::Infinity>());
  double est = 0.0;
  for (int it = 0; it < 20; ++it) {
    p = x + s * v;
    if (!box.contains(p)) p = x - s * v;
    box.project_in_place(p);
    const double step = (p - x).norm();
    if (step < 1e-14) break;
    const double f1 = obj.smooth(p, g1);
    if (!std::isfinite(f1) || !g1.allFinite()) break;
    Vector hv = (g1 - g0) / step;
    const double nrm = hv.norm();
    if (!std::isfinite(nrm)) break;
    est = std::max(est, nrm);
    if (nrm < 1e-300) break;
    v = hv / nrm;
  }
  if (!(est > 0.0) || !std::isfinite(est)) est = 1.0;
  return 1.05 * est;
}

inline CompositeResult solve_composite(const CompositeObjective& obj, const BoxSet& box,
                                       const CompositeOptions& opt = {},
                                       const Vector* initial = nullptr) {
  if (!(obj.strong_convexity_m > 0.0)) {
    throw std::invalid_argument("solve_composite: strong_convexity_m must be positive");
  }
  const Eigen::Index n = box.dim();
  Vector x = initial ? *initial : Vector::Zero(n);
  require_same_size(x.size(), n, "solve_composite initial point");
  box.project_in_place(x);

  Vector gx(n), y(n), gy(n), z(n), gz(n), x_prev(n), tmp(n), tx(n), d(n);
  const auto prox_val = [&](const Vector& w) { return obj.prox_value ? obj.prox_value(w) : 0.0; };

  double fx = detail::check_finite(obj.smooth(x, gx), gx);
  double Fx = fx + prox_val(x);
  double L = obj.lipschitz_hint > 0.0 ? obj.lipschitz_hint : estimate_lipschitz(obj, box, x);

  CompositeResult res;
  if (opt.record_objective) res.objective_trace.push_back(Fx);

  const auto residual_at = [&](const Vector& w, const Vector& gw) {
    tmp = w - gw / L;
    detail::prox_box(obj, box, tmp, 1.0 / L, tx);
    if (opt.residual == ResidualScale::distance) {
      return L * (w - tx).norm() / obj.strong_convexity_m;
    }
    return L * (w - tx).lpNorm<Eigen::Infinity>();
  };

  double r = residual_at(x, gx);
  if (r <= opt.tol) {
    res.w = x;
    res.residual = r;
    res.objective = Fx;
    res.status = SolveStatus::converged;
    return res;
  }

  y = x;
  gy = gx;
  double fy = fx;
  double t = 1.0;
  bool at_anchor = true;  // y == x, so a plain prox-gradient step follows
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    double fz = 0.0;
    for (int bt = 0;; ++bt) {
      tmp = y - gy / L;
      detail::prox_box(obj, box, tmp, 1.0 / L, z);
      fz = obj.smooth(z, gz);
      if (!std::isfinite(fz)) throw NonFiniteObjective("smooth objective non-finite inside box");
      d = z - y;
      const double model = fy + gy.dot(d) + 0.5 * L * d.squaredNorm();
      if (fz <= model + 1e-14 * (1.0 + std::abs(fy))) break;
      L *= 2.0;
      if (bt > 200) throw NonFiniteObjective("line search failed to find a descent step");
    }
    detail::check_finite(fz, gz);
    const double Fz = fz + prox_val(z);

    // a prox-gradient step from the anchor is a descent step up to rounding
    if (at_anchor && z == x) {
      res.status = SolveStatus::stalled;
      break;
    }
    if (Fz > Fx && !at_anchor) {
      y = x;
      gy = gx;
      fy = fx;
      t = 1.0;
      at_anchor = true;
      continue;
    }

    x_prev = x;
    x = z;
    gx = gz;
    fx = fz;
    Fx = Fz;
    if (opt.record_objective) res.objective_trace.push_back(Fx);

    r = residual_at(x, gx);
    if (r <= opt.tol) {
      res.status = SolveStatus::converged;
      ++it;
      break;
    }

    if ((y - x).dot(x - x_prev) > 0.0) t = 1.0;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    t = t_next;
    at_anchor = (beta == 0.0);
    if (at_anchor) {
      y = x;
      gy = gx;
      fy = fx;
      continue;
    }
    y = x + beta * (x - x_prev);
    box.project_in_place(y);
    fy = detail::check_finite(obj.smooth(y, gy), gy);
  }
  if (res.status == SolveStatus::stalled) r = residual_at(x, gx);
  res.w = x;
  res.residual = r;
  res.objective = Fx;
  res.iterations = it;
  if (res.status != SolveStatus::converged && res.status != SolveStatus::stalled) {
    res.status = SolveStatus::max_iter;
  }
  return res;
}

}  // namespace incentive_mpc
