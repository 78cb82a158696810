#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "incentive_mpc/ev/ev_lompc.hpp"
#include "incentive_mpc/incentive/optimal_incentive.hpp"

namespace incentive_mpc::ev {

// Slack for member solves that stop at a KKT tolerance.
inline constexpr double kBoundSolverTol = 1e-9;
inline constexpr double kDualDecreaseSlack = 1e-8;

struct BoundSample {
  double dy0 = 0.0;
  std::size_t trial = 0;
  std::size_t members = 0;
  double err = 0.0;
  double bound = 0.0;
  bool ok() const { return err <= bound + kBoundSolverTol; }
};

struct BoundExperiment {
  std::size_t members = 20;
  std::vector<double> dy0_grid{0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10};
  std::size_t trials = 10;
  Eigen::Index horizon = 12;
  double center = 0.4;
  std::uint64_t seed = 42;
};

// Group of members with SoCs spread over [center - dy0, center + dy0] (both ends included),
// all sharing the representative model.
inline std::shared_ptr<Population> spread_population(const EVGroupModel& model, std::size_t members, double dy0,
                                                     std::mt19937_64& rng) {
  auto pop = std::make_shared<Population>();
  std::uniform_real_distribution<double> soc(model.center_y0 - dy0, model.center_y0 + dy0);
  for (std::size_t i = 0; i < members; ++i) {
    double y = soc(rng);
    if (i == 0) y = model.center_y0 - dy0;
    if (i == 1) y = model.center_y0 + dy0;
    pop->members.push_back(member_spec(model, y));
  }
  pop->groups.push_back({});
  for (std::size_t i = 0; i < members; ++i) pop->groups[0].push_back(i);
  pop->theta_bar_per_group = {theta_bound(model.cls.delta, model.cls.capacity_kwh, dy0, model.horizon)};
  pop->validate();
  return pop;
}

// Entries uniform in [0, delta * capacity * N] on every block of the nonnegative cone.
inline Vector random_ev_incentive(const EVClassConfig& cls, Eigen::Index N, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, cls.delta * cls.capacity_kwh * double(N));
  Vector l(3 * N);
  for (Eigen::Index k = 0; k < l.size(); ++k) l[k] = u(rng);
  return l;
}

// Random incentive, representative response vs group average, against sqrt(N) dy0.
inline std::vector<BoundSample> verify_bound(const EVClassConfig& cls, const BoundExperiment& e,
                                             const Executor& ex = Executor{}) {
  for (double d : e.dy0_grid) {
    if (d < 0.0 || e.center - d < 0.0 || e.center + d > cls.y_max) {
      throw std::invalid_argument("verify_bound: dy0 " + std::to_string(d) + " leaves [0, y_max] around the center");
    }
  }
  if (e.members == 0) throw std::invalid_argument("verify_bound: members must be positive");
  std::mt19937_64 rng(e.seed);
  auto model = make_ev_group_model(cls, e.center, e.horizon);
  const LoMPCSpec rep = member_spec(model, e.center);
  std::vector<BoundSample> out;
  for (double dy0 : e.dy0_grid) {
    auto pop = spread_population(model, e.members, dy0, rng);
    for (std::size_t t = 0; t < e.trials; ++t) {
      const Vector lambda = random_ev_incentive(cls, e.horizon, rng);
      const Vector w_hat = solve_member(rep, lambda);
      const Vector w = average_response(*pop, 0, lambda, ex);
      BoundSample s;
      s.dy0 = dy0;
      s.trial = t;
      s.members = e.members;
      s.err = (w_hat - w).norm();
      s.bound = std::sqrt(double(e.horizon)) * dy0;
      out.push_back(s);
    }
  }
  return out;
}

struct DualDecreaseSample {
  std::size_t run = 0;
  std::size_t iteration = 0;
  double actual = 0.0;
  double surrogate = 0.0;
  bool ok() const { return actual >= surrogate - kDualDecreaseSlack; }
};

struct DualDecreaseExperiment {
  std::size_t members = 200;
  std::size_t runs = 50;
  Eigen::Index horizon = 12;
  double center = 0.4;
  double dy0 = 0.02;
  double eps_tol = 1e-4;
  int max_iter = 60;
  std::uint64_t seed = 7;
};

struct DualDecreaseResult {
  std::vector<DualDecreaseSample> samples;
  std::vector<int> iterations;  // per run
};

// Incentive iteration toward the group average at a hidden random incentive, auditing every iterate with the
// representative (theta = 0) dual.
inline DualDecreaseResult verify_dual_decrease(const EVClassConfig& cls, const DualDecreaseExperiment& e,
                                               const Executor& ex = Executor{}) {
  if (e.members == 0) throw std::invalid_argument("verify_dual_decrease: members must be positive");
  std::mt19937_64 rng(e.seed);
  auto model = make_ev_group_model(cls, e.center, e.horizon);
  const LoMPCSpec rep = member_spec(model, e.center);
  DualOracle dual = [&](const Vector& l) { return evaluate_dual(rep, l); };
  IncentiveOptions opt;
  opt.eps_tol = e.eps_tol;
  opt.max_iter = e.max_iter;
  DualDecreaseResult res;
  for (std::size_t r = 0; r < e.runs; ++r) {
    auto pop = spread_population(model, e.members, e.dy0, rng);
    const Vector target = average_response(*pop, 0, random_ev_incentive(cls, e.horizon, rng), ex);
    ResponseOracle respond = make_group_oracle(pop, 0, ex);
    auto run = solve_optimal_incentive(respond, *model.map, cls.strong_m(), target, 0.0, zero_incentive(*model.map),
                                       opt, &dual);
    res.iterations.push_back(run.incentive.iterations);
    for (std::size_t k = 0; k < run.audits.size(); ++k) {
      res.samples.push_back({r, k, run.audits[k].actual_decrease, run.audits[k].surrogate_decrease});
    }
  }
  return res;
}

}  // namespace incentive_mpc::ev
