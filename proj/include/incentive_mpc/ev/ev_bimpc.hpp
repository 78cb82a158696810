#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "incentive_mpc/bimpc/robust_bimpc.hpp"
#include "incentive_mpc/ev/config.hpp"

namespace incentive_mpc::ev {

// One priced group as the ISO sees it; all quantities normalized by B.
struct GroupSummary {
  std::size_t cls = 0;
  std::size_t count = 0;
  double weight = 0.0;  // count * capacity / B
  double mean_y0 = 0.0;
  double radius = 0.0;  // bound on |w_hat - w| for the group average
};

// max(sqrt(N) dy0, eps_tol): the incentive solve can only certify eps_tol when dy0 -> 0.
inline double group_radius(double dy0, std::size_t N, double eps_tol) {
  return std::max(std::sqrt(double(N)) * dy0, eps_tol);
}

inline double total_delta(const std::vector<GroupSummary>& groups) {
  double d = 0.0;
  for (const auto& g : groups) d += g.weight * g.radius;
  return d;
}

struct FeasibilityCertificate {
  bool feasible = false;
  std::string violated;
  Vector witness;  // z = (u^g, w_hat time-major), when feasible
};

// Witness: storage moves once into [Delta, x_max - Delta] and then holds, w_hat = 0.
inline FeasibilityCertificate feasibility_certificate(double x0, const Vector& demand, double delta,
                                                      double ub_max, double x_max, double ug_max,
                                                      std::size_t n_groups) {
  FeasibilityCertificate c;
  const Eigen::Index N = demand.size();
  if (delta > ub_max) {
    c.violated = "delta_le_ub_max";
    return c;
  }
  if (2.0 * delta > x_max) {
    c.violated = "two_delta_le_x_max";
    return c;
  }
  const double target = std::clamp(x0, delta, x_max - delta);
  const double move = target - x0;
  if (std::abs(move) > ub_max - delta) {
    c.violated = "x0_band";
    return c;
  }
  Vector ug = demand;
  ug[0] += move;
  if (ug.minCoeff() < 0.0 || ug.maxCoeff() > ug_max) {
    c.violated = "generation_capacity";
    return c;
  }
  c.feasible = true;
  c.witness = Vector::Zero(N + N * Eigen::Index(n_groups));
  c.witness.head(N) = ug;
  return c;
}

struct EVBiMPC {
  RobustBiMPCSpec spec;
  std::vector<GroupSummary> groups;
  double delta = 0.0;
  Vector demand;  // normalized window

  // group g's plan, length N
  Vector group_plan(const Vector& w, std::size_t g) const {
    const Eigen::Index G = Eigen::Index(groups.size());
    const Eigen::Index N = spec.dynamics.N;
    Vector out(N);
    for (Eigen::Index k = 0; k < N; ++k) out[k] = w[k * G + Eigen::Index(g)];
    return out;
  }
};

// Storage x_{k+1} = x_k + u^g_k - D_k - sum_g weight_g w_hat_{g,k}, all over B.
// Rows: x_{1..N} in [0, x_max], increments in [-ub_max, ub_max]; tightened per group.
inline EVBiMPC build_bimpc(const ScenarioConfig& s, double x0, const Vector& demand_norm,
                           const std::vector<GroupSummary>& groups) {
  const Eigen::Index N = demand_norm.size();
  const Eigen::Index G = Eigen::Index(groups.size());
  if (G == 0) throw std::invalid_argument("build_bimpc: no groups");
  require_same_size(N, Eigen::Index(s.horizon), "build_bimpc demand window");
  EVBiMPC out;
  out.groups = groups;
  out.demand = demand_norm;
  out.delta = total_delta(groups);

  Matrix B2(1, G);
  for (Eigen::Index g = 0; g < G; ++g) B2(0, g) = -groups[std::size_t(g)].weight;
  auto& spec = out.spec;
  spec.dynamics = build_batch(Matrix::Ones(1, 1), Matrix::Ones(1, 1), B2, N);
  spec.x0 = Vector::Constant(1, x0);
  spec.state_offset = -spec.dynamics.B1_bar * demand_norm;
  spec.horizon_r = Eigen::Index(s.iso.horizon_r);

  Matrix C = Matrix::Zero(4 * N, N + 1);
  Vector d(4 * N);
  for (Eigen::Index k = 0; k < N; ++k) {
    C(k, k + 1) = 1.0;
    d[k] = s.iso.x_max;
    C(N + k, k + 1) = -1.0;
    d[N + k] = 0.0;
    C(2 * N + k, k + 1) = 1.0;
    C(2 * N + k, k) = -1.0;
    d[2 * N + k] = s.iso.ub_max;
    C(3 * N + k, k + 1) = -1.0;
    C(3 * N + k, k) = 1.0;
    d[3 * N + k] = s.iso.ub_max;
  }
  std::vector<double> radii(static_cast<std::size_t>(G));
  std::vector<Eigen::Index> group_of(static_cast<std::size_t>(G));
  for (Eigen::Index g = 0; g < G; ++g) {
    radii[std::size_t(g)] = groups[std::size_t(g)].radius;
    group_of[std::size_t(g)] = g;
  }
  spec.state_constraints = tighten_groups(C, d, spec.dynamics.B2_bar, radii, group_of, spec.horizon_r);

  spec.input_box_u = BoxSet::uniform(N, 0.0, s.iso.ug_max);
  Vector wmax(N * G);
  for (Eigen::Index k = 0; k < N; ++k)
    for (Eigen::Index g = 0; g < G; ++g) wmax[k * G + g] = s.classes.at(groups[std::size_t(g)].cls).w_max;
  spec.input_box_w = BoxSet(Vector::Zero(N * G), wmax);

  // class-share weights for the per-group tracking terms
  std::vector<double> share(static_cast<std::size_t>(G)), target(static_cast<std::size_t>(G));
  for (Eigen::Index g = 0; g < G; ++g) {
    const auto& gr = groups[std::size_t(g)];
    const auto& cls = s.classes.at(gr.cls);
    share[std::size_t(g)] = double(gr.count) / double(cls.count);
    target[std::size_t(g)] = cls.y_max - gr.mean_y0;
  }
  Vector disc(N);
  for (Eigen::Index k = 1; k <= N; ++k) disc[k - 1] = std::pow(s.iso.gamma, double(k - N));
  const double cg = s.iso.cg;
  spec.cost = [=](const Vector& u, const Vector& w, Vector& gu, Vector& gw) {
    double f = 0.0;
    gu.resize(N);
    for (Eigen::Index k = 0; k < N; ++k) {
      const double uk = std::max(u[k], 0.0);
      const double p = std::pow(uk, 0.7);
      f += cg * p * uk;
      gu[k] = 1.7 * cg * p;
    }
    gw.setZero(N * G);
    for (Eigen::Index g = 0; g < G; ++g) {
      double cum = 0.0;
      Vector r(N);
      for (Eigen::Index k = 0; k < N; ++k) {
        cum += w[k * G + g];
        r[k] = cum - target[std::size_t(g)];
        f += share[std::size_t(g)] * disc[k] * r[k] * r[k];
      }
      // gradient of sum_k disc_k r_k^2 w.r.t. w_j is sum_{k >= j} 2 disc_k r_k
      double tail = 0.0;
      for (Eigen::Index k = N - 1; k >= 0; --k) {
        tail += 2.0 * share[std::size_t(g)] * disc[k] * r[k];
        gw[k * G + g] = tail;
      }
    }
    return f;
  };
  return out;
}

// Every EV charges at w_max until it reaches y_max, then is replaced with a fresh SoC.
// Returns per-step EV consumption normalized by B.
inline std::vector<double> greedy_charging_baseline(const ScenarioConfig& s, std::vector<double> soc,
                                                    const std::vector<std::size_t>& cls_of,
                                                    std::size_t steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> fresh(s.soc_init_lo, s.soc_init_hi);
  const double B = s.normalization_b();
  std::vector<double> out(steps, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < soc.size(); ++i) {
      const auto& c = s.classes.at(cls_of[i]);
      const double w = std::clamp(c.y_max - soc[i], 0.0, c.w_max);
      out[t] += c.capacity_kwh * w / B;
      soc[i] += w;
      if (soc[i] >= c.y_max - 1e-12) soc[i] = fresh(rng);
    }
  }
  return out;
}

}  // namespace incentive_mpc::ev
