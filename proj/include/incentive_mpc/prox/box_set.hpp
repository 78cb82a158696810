#pragma once

#include <limits>

#include "incentive_mpc/core.hpp"

namespace incentive_mpc {

struct BoxSet {
  Vector lower;
  Vector upper;

  BoxSet() = default;
  BoxSet(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
    require_same_size(lower.size(), upper.size(), "BoxSet bounds");
    if ((lower.array() > upper.array()).any()) {
      throw std::invalid_argument("BoxSet: lower bound exceeds upper bound");
    }
  }

  static BoxSet uniform(Eigen::Index n, double lo, double hi) {
    return BoxSet(Vector::Constant(n, lo), Vector::Constant(n, hi));
  }

  static BoxSet unbounded(Eigen::Index n) {
    const double inf = std::numeric_limits<double>::infinity();
    return uniform(n, -inf, inf);
  }

  Eigen::Index dim() const { return lower.size(); }

  bool contains(const Vector& v, double tol = 0.0) const {
    return v.size() == dim() && (v.array() >= lower.array() - tol).all() &&
           (v.array() <= upper.array() + tol).all();
  }

  void project_in_place(Vector& v) const { v = v.cwiseMax(lower).cwiseMin(upper); }
};

inline Vector project_box(const Vector& v, const BoxSet& box) {
  require_same_size(v.size(), box.dim(), "project_box");
  return v.cwiseMax(box.lower).cwiseMin(box.upper);
}

}  // namespace incentive_mpc
