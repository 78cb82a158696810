#pragma once

#include <functional>
#include <limits>
#include <memory>

#include "incentive_mpc/prox/box_set.hpp"

namespace incentive_mpc {

// zero: K = {0}, K* = R^q. nonneg: K = K* = R^q_+.
// product: leading `zero_block` coordinates unconstrained in K*, rest nonneg.
enum class ConeTag { zero, nonneg, product };

inline const char* to_string(ConeTag c) {
  switch (c) {
    case ConeTag::zero: return "zero";
    case ConeTag::nonneg: return "nonneg";
    case ConeTag::product: return "product";
  }
  return "unknown";
}

struct IncentiveMap {
  std::function<void(const Vector& w, Vector& out)> phi;
  // out = Dphi(w)^T lambda, in R^{dim_w}
  std::function<void(const Vector& w, const Vector& lambda, Vector& out)> jacobian_t;
  // out = Dphi(w) v, in R^{dim_lambda}
  std::function<void(const Vector& w, const Vector& v, Vector& out)> jacobian;
  // upper bound on the Hessian norm of <lambda, phi(.)>
  std::function<double(const Vector& lambda)> curvature_bound;
  // optional fused <lambda, phi(w)> with gradient added into grad
  std::function<double(const Vector& w, const Vector& lambda, Vector& grad)> pairing;
  // optional: <lambda, phi(w)> = 0.5 w' diag(d) w + l'w + const
  std::function<void(const Vector& lambda, Vector& d, Vector& l)> pairing_quadratic;
  ConeTag cone = ConeTag::nonneg;
  Eigen::Index zero_block = 0;
  Eigen::Index dim_w = 0;
  Eigen::Index dim_lambda = 0;

  Vector eval(const Vector& w) const {
    Vector out(dim_lambda);
    phi(w, out);
    return out;
  }

  Vector jt(const Vector& w, const Vector& lambda) const {
    Vector out(dim_w);
    jacobian_t(w, lambda, out);
    return out;
  }

  Vector j(const Vector& w, const Vector& v) const {
    Vector out(dim_lambda);
    jacobian(w, v, out);
    return out;
  }

  // <lambda, phi(w)>, gradient accumulated into grad
  double pair(const Vector& w, const Vector& lambda, Vector& grad) const {
    if (pairing) return pairing(w, lambda, grad);
    Vector p(dim_lambda), g(dim_w);
    phi(w, p);
    jacobian_t(w, lambda, g);
    grad += g;
    return lambda.dot(p);
  }

  Eigen::Index nonneg_begin() const {
    switch (cone) {
      case ConeTag::zero: return dim_lambda;
      case ConeTag::nonneg: return 0;
      case ConeTag::product: return zero_block;
    }
    return 0;
  }

  bool in_dual_cone(const Vector& lambda, double tol = 0.0) const {
    if (lambda.size() != dim_lambda) return false;
    const Eigen::Index b = nonneg_begin();
    return b >= dim_lambda || (lambda.tail(dim_lambda - b).array() >= -tol).all();
  }

  // a <=_K b, i.e. b - a in K
  bool cone_leq(const Vector& a, const Vector& b, double tol = 0.0) const {
    const Vector d = b - a;
    const Eigen::Index nb = nonneg_begin();
    if (nb > 0 && d.head(nb).lpNorm<Eigen::Infinity>() > tol) return false;
    return nb >= dim_lambda || (d.tail(dim_lambda - nb).array() >= -tol).all();
  }

  // K* intersected with the infinity-norm ball of radius cap
  BoxSet dual_cone_box(double cap) const {
    Vector lo = Vector::Constant(dim_lambda, -cap);
    lo.tail(dim_lambda - nonneg_begin()).setZero();
    return BoxSet(lo, Vector::Constant(dim_lambda, cap));
  }

  Vector project_dual_cone(const Vector& lambda) const {
    Vector out = lambda;
    const Eigen::Index b = nonneg_begin();
    out.tail(dim_lambda - b) = out.tail(dim_lambda - b).cwiseMax(0.0);
    return out;
  }
};

// phi(w) = w
inline IncentiveMap make_linear_map(Eigen::Index n, ConeTag cone = ConeTag::zero,
                                    Eigen::Index zero_block = 0) {
  IncentiveMap map;
  map.phi = [](const Vector& w, Vector& out) { out = w; };
  map.jacobian_t = [](const Vector&, const Vector& lambda, Vector& out) { out = lambda; };
  map.jacobian = [](const Vector&, const Vector& v, Vector& out) { out = v; };
  map.curvature_bound = [](const Vector&) { return 0.0; };
  map.pairing = [](const Vector& w, const Vector& lambda, Vector& grad) {
    grad += lambda;
    return lambda.dot(w);
  };
  map.pairing_quadratic = [](const Vector& lambda, Vector& d, Vector& l) {
    d = Vector::Zero(lambda.size());
    l = lambda;
  };
  map.cone = cone;
  map.zero_block = zero_block;
  map.dim_w = n;
  map.dim_lambda = n;
  return map;
}

}  // namespace incentive_mpc
