#pragma once

#include <cmath>
#include <memory>
#include <string>

#include "incentive_mpc/lompc/lompc.hpp"

namespace incentive_mpc::ev {

struct EVClassConfig {
  std::string name;
  std::size_t count = 0;
  double capacity_kwh = 0.0;
  double w_max = 0.0;
  double y_max = 0.9;
  double delta = 0.05;
  double battery_c1 = 0.1;
  double battery_c2 = 0.5;
  double battery_knee_frac = 0.6;
  std::size_t partitions = 12;

  double strong_m() const { return 2.0 * delta * capacity_kwh * capacity_kwh; }
  double knee() const { return battery_knee_frac * w_max; }

  void validate() const {
    if (!(capacity_kwh > 0.0)) throw std::invalid_argument("class " + name + ": capacity_kwh must be positive");
    if (!(w_max > 0.0 && w_max <= 1.0)) throw std::invalid_argument("class " + name + ": w_max must lie in (0, 1]");
    if (!(y_max > 0.0 && y_max <= 1.0)) throw std::invalid_argument("class " + name + ": y_max must lie in (0, 1]");
    if (!(delta > 0.0)) throw std::invalid_argument("class " + name + ": delta must be positive");
    if (battery_c1 < 0.0 || battery_c2 < 0.0) throw std::invalid_argument("class " + name + ": battery costs must be nonnegative");
    if (battery_knee_frac < 0.0 || battery_knee_frac > 1.0) throw std::invalid_argument("class " + name + ": battery_knee_frac must lie in [0, 1]");
    if (partitions < 1) throw std::invalid_argument("class " + name + ": partitions must be at least 1");
  }
};

// phi(w) = capacity (w, w_max 1 - w, w .* w) on the nonnegative orthant of R^{3N}
inline IncentiveMap build_ev_incentive_map(const EVClassConfig& cls, Eigen::Index N) {
  const double th = cls.capacity_kwh;
  const double wmax = cls.w_max;
  IncentiveMap map;
  map.phi = [th, wmax, N](const Vector& w, Vector& out) {
    out.resize(3 * N);
    out.segment(0, N) = th * w;
    out.segment(N, N) = th * (wmax - w.array()).matrix();
    out.segment(2 * N, N) = th * w.cwiseProduct(w);
  };
  map.jacobian_t = [th, N](const Vector& w, const Vector& lam, Vector& out) {
    out = th * (lam.segment(0, N) - lam.segment(N, N) +
                2.0 * w.cwiseProduct(lam.segment(2 * N, N)));
  };
  map.jacobian = [th, N](const Vector& w, const Vector& v, Vector& out) {
    out.resize(3 * N);
    out.segment(0, N) = th * v;
    out.segment(N, N) = -th * v;
    out.segment(2 * N, N) = 2.0 * th * w.cwiseProduct(v);
  };
  map.curvature_bound = [th, N](const Vector& lam) {
    return 2.0 * th * std::max(0.0, lam.segment(2 * N, N).maxCoeff());
  };
  map.pairing = [th, wmax, N](const Vector& w, const Vector& lam, Vector& grad) {
    double v = 0.0;
    for (Eigen::Index k = 0; k < N; ++k) {
      const double l1 = lam[k], l2 = lam[N + k], l3 = lam[2 * N + k];
      v += l1 * w[k] + l2 * (wmax - w[k]) + l3 * w[k] * w[k];
      grad[k] += th * (l1 - l2 + 2.0 * l3 * w[k]);
    }
    return th * v;
  };
  map.pairing_quadratic = [th, N](const Vector& lam, Vector& d, Vector& l) {
    d = 2.0 * th * lam.segment(2 * N, N);
    l = th * (lam.segment(0, N) - lam.segment(N, N));
  };
  map.cone = ConeTag::nonneg;
  map.dim_w = N;
  map.dim_lambda = 3 * N;
  return map;
}

// Eigenvalues of L'L for the lower-triangular ones matrix L, ascending.
inline Vector cumulative_sum_gram_spectrum(Eigen::Index N) {
  Matrix L = Matrix::Zero(N, N);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) L(i, j) = 1.0;
  return Eigen::SelfAdjointEigenSolver<Matrix>(L.transpose() * L).eigenvalues();
}

inline double cumulative_sum_gram_norm(Eigen::Index N) { return cumulative_sum_gram_spectrum(N).maxCoeff(); }

// capacity^2 sum_k g_bat(w_k) + delta capacity^2 sum_{k=1..N} (y_max - y0 - sum_{j<k} w_j)^2
inline CompositeObjective build_ev_base_objective(const EVClassConfig& cls, double y0, Eigen::Index N) {
  const double th2 = cls.capacity_kwh * cls.capacity_kwh;
  const double c1 = th2 * cls.battery_c1;
  const double c2 = th2 * cls.battery_c2;
  const double track = cls.delta * th2;
  const double r = cls.y_max - y0;
  const double knee = cls.knee();
  CompositeObjective obj;
  obj.smooth = [c1, track, r, N](const Vector& w, Vector& g) {
    g.resize(N);
    double f = c1 * w.squaredNorm();
    double s = 0.0;
    // e_k = r - S_k, k = 1..N; gradient of w_j collects e_k for k > j
    double suffix = 0.0;
    double e_buf[256];
    double* e = N <= 256 ? e_buf : new double[N];
    for (Eigen::Index k = 0; k < N; ++k) {
      s += w[k];
      e[k] = r - s;
      f += track * e[k] * e[k];
    }
    for (Eigen::Index j = N - 1; j >= 0; --j) {
      suffix += e[j];
      g[j] = 2.0 * c1 * w[j] - 2.0 * track * suffix;
    }
    if (e != e_buf) delete[] e;
    return f;
  };
  if (c2 > 0.0) {
    obj.prox = [c2, knee](const Vector& v, double t, Vector& out) {
      const double a = t * c2;
      out = v.unaryExpr([a, knee](double x) {
        if (x > knee + a) return x - a;
        if (x >= knee) return knee;
        return x;
      });
    };
    obj.prox_value = [c2, knee](const Vector& w) {
      return c2 * (w.array() - knee).cwiseMax(0.0).sum();
    };
  }
  obj.strong_convexity_m = cls.strong_m();
  obj.lipschitz_hint = (2.0 * c1 + 2.0 * track * cumulative_sum_gram_norm(N)) * (1.0 + 1e-9);
  PiecewiseQP qp;
  Matrix L = Matrix::Zero(N, N);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) L(i, j) = 1.0;
  qp.H = 2.0 * c1 * Matrix::Identity(N, N) + 2.0 * track * L.transpose() * L;
  qp.h = -2.0 * track * r * L.transpose() * Vector::Ones(N);
  qp.hinge = {c2, knee};
  obj.piecewise = std::move(qp);
  return obj;
}

// Shared pieces of every member in one SoC group.
struct EVGroupModel {
  EVClassConfig cls;
  Eigen::Index horizon = 0;
  double center_y0 = 0.0;
  std::shared_ptr<const CompositeObjective> base;
  std::shared_ptr<const BoxSet> box;
  std::shared_ptr<const IncentiveMap> map;
};

inline EVGroupModel make_ev_group_model(const EVClassConfig& cls, double center_y0, Eigen::Index N,
                                        std::shared_ptr<const IncentiveMap> map = nullptr) {
  EVGroupModel g;
  g.cls = cls;
  g.horizon = N;
  g.center_y0 = center_y0;
  g.base = std::make_shared<const CompositeObjective>(build_ev_base_objective(cls, center_y0, N));
  g.box = std::make_shared<const BoxSet>(BoxSet::uniform(N, 0.0, cls.w_max));
  g.map = map ? std::move(map) : std::make_shared<const IncentiveMap>(build_ev_incentive_map(cls, N));
  return g;
}

inline LoMPCSpec member_spec(const EVGroupModel& g, double member_y0) {
  if (member_y0 < 0.0 || member_y0 > g.cls.y_max) {
    throw std::invalid_argument("member SoC outside [0, y_max]");
  }
  LoMPCSpec s;
  s.base_objective = g.base;
  s.input_box = g.box;
  s.incentive_map = g.map;
  s.strong_m = g.cls.strong_m();
  s.theta = build_parametric_theta(member_y0, g.center_y0, g.cls.delta, g.cls.capacity_kwh, g.horizon);
  return s;
}

inline LoMPCSpec build_ev_lompc(const EVClassConfig& cls, double member_y0, double group_center_y0,
                                Eigen::Index N) {
  return member_spec(make_ev_group_model(cls, group_center_y0, N), member_y0);
}

}  // namespace incentive_mpc::ev
