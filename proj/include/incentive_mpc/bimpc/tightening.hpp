#pragma once

#include <cmath>
#include <vector>

#include "incentive_mpc/core.hpp"

namespace incentive_mpc {

// C x <= d - tightening, with tightening_j = sum_g radius_g |(C B2_bar)_j| over group g's
// columns in the first horizon_r steps.
struct TightenedPolytope {
  Matrix C;
  Vector d;
  std::vector<double> radius;
  Vector tightening;

  Vector d_tight() const { return d - tightening; }

  bool contains(const Vector& x, double tol = 0.0) const {
    return C.rows() == 0 || ((C * x - d_tight()).array() <= tol).all();
  }
  bool contains_original(const Vector& x, double tol = 0.0) const {
    return C.rows() == 0 || ((C * x - d).array() <= tol).all();
  }
};

// group_of[c] is the group of per-step disturbance component c; columns are time-major.
inline TightenedPolytope tighten_groups(const Matrix& C, const Vector& d, const Matrix& B2_bar,
                                        const std::vector<double>& radii,
                                        const std::vector<Eigen::Index>& group_of,
                                        Eigen::Index horizon_r) {
  require_same_size(C.rows(), d.size(), "tighten C/d");
  require_same_size(C.cols(), B2_bar.rows(), "tighten C/B2_bar");
  const Eigen::Index gamma = static_cast<Eigen::Index>(group_of.size());
  if (gamma == 0 || B2_bar.cols() % gamma != 0) throw DimensionError("tighten: B2_bar columns vs gamma");
  const Eigen::Index N = B2_bar.cols() / gamma;
  if (horizon_r < 1 || horizon_r > N) throw std::invalid_argument("tighten: horizon_r outside [1, N]");
  for (double r : radii) {
    if (!(r >= 0.0)) throw std::invalid_argument("tighten: radius must be nonnegative");
  }
  for (Eigen::Index g : group_of) {
    if (g < 0 || g >= static_cast<Eigen::Index>(radii.size())) throw DimensionError("tighten: group index");
  }

  TightenedPolytope t;
  t.C = C;
  t.d = d;
  t.radius = radii;
  t.tightening = Vector::Zero(C.rows());
  const Matrix CB = C * B2_bar.leftCols(horizon_r * gamma);
  std::vector<double> sq(radii.size());
  for (Eigen::Index j = 0; j < C.rows(); ++j) {
    std::fill(sq.begin(), sq.end(), 0.0);
    for (Eigen::Index k = 0; k < horizon_r; ++k)
      for (Eigen::Index c = 0; c < gamma; ++c) {
        const double v = CB(j, k * gamma + c);
        sq[group_of[c]] += v * v;
      }
    for (std::size_t g = 0; g < radii.size(); ++g) {
      if (radii[g] > 0.0) t.tightening[j] += radii[g] * std::sqrt(sq[g]);
    }
  }
  return t;
}

// Single radius over the whole disturbance vector.
inline TightenedPolytope tighten(const Matrix& C, const Vector& d, const Matrix& B2_bar, double radius,
                                 Eigen::Index horizon_r, Eigen::Index gamma_dim) {
  return tighten_groups(C, d, B2_bar, {radius}, std::vector<Eigen::Index>(gamma_dim, 0), horizon_r);
}

struct GroupSpread {
  double count = 0.0;
  double capacity = 0.0;
  double dy0 = 0.0;
};

// sum_g count_g capacity_g sqrt(N) dy0_g, in the capacity unit.
inline double total_radius(const std::vector<GroupSpread>& groups, Eigen::Index N) {
  double s = 0.0;
  for (const auto& g : groups) {
    if (g.count < 0.0 || g.capacity < 0.0 || g.dy0 < 0.0) {
      throw std::invalid_argument("total_radius: negative group parameter");
    }
    s += g.count * g.capacity * g.dy0;
  }
  return std::sqrt(double(N)) * s;
}

}  // namespace incentive_mpc
