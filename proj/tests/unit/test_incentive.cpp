#include <gtest/gtest.h>

#include <random>

#include "incentive_mpc/ev/ev_lompc.hpp"
#include "incentive_mpc/incentive/optimal_incentive.hpp"
#include "support/kkt_oracle.hpp"

using namespace incentive_mpc;

namespace {

std::shared_ptr<CompositeObjective> isotropic(const Vector& a, double m) {
  auto obj = std::make_shared<CompositeObjective>();
  obj->smooth = [a, m](const Vector& w, Vector& g) {
    g = m * (w - a);
    return 0.5 * m * (w - a).squaredNorm();
  };
  obj->strong_convexity_m = m;
  obj->lipschitz_hint = m;
  return obj;
}

LoMPCSpec linear_spec(std::shared_ptr<CompositeObjective> obj, const BoxSet& box, double m,
                      ConeTag cone = ConeTag::zero) {
  LoMPCSpec s;
  s.base_objective = obj;
  s.input_box = std::make_shared<BoxSet>(box);
  s.strong_m = m;
  s.incentive_map = std::make_shared<IncentiveMap>(make_linear_map(box.dim(), cone));
  s.theta = Vector::Zero(box.dim());
  return s;
}

ev::EVClassConfig large_ev() {
  ev::EVClassConfig c;
  c.name = "large";
  c.capacity_kwh = 50.0;
  c.w_max = 0.15;
  return c;
}

}  // namespace

TEST(LinearAscent, FixedPointAtTarget) {
  Vector l(2), w(2);
  l << 1.0, -2.0;
  w << 0.3, 0.4;
  EXPECT_EQ(linear_ascent_step(l, w, w, 3.0), l);
}

TEST(LinearAscent, OneStepOnUnconstrainedQuadratic) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const double m = std::uniform_real_distribution<double>(0.5, 4)(rng);
    Vector a = oracle::random_vector(5, rng, -1, 1);
    Vector target = oracle::random_vector(5, rng, -1, 1);
    Vector l0 = oracle::random_vector(5, rng, -3, 3);
    auto spec = linear_spec(isotropic(a, m), BoxSet::unbounded(5), m);
    Vector w0 = solve_member(spec, l0);
    Vector l1 = linear_ascent_step(l0, w0, target, m);
    EXPECT_LT((l1 - m * (a - target)).norm(), 1e-7);
    EXPECT_LT((solve_member(spec, l1) - target).norm(), 1e-7);
  }
}

TEST(MMUpdate, ClosedFormForIdentityMap) {
  std::mt19937_64 rng(2);
  auto map = make_linear_map(4, ConeTag::zero);
  for (int t = 0; t < 20; ++t) {
    const double m = 2.0, eps = 0.01 * m;
    MMState s;
    s.lambda_k = oracle::random_vector(4, rng, -1, 1);
    s.w_k = oracle::random_vector(4, rng, 0, 1);
    s.w_target = oracle::random_vector(4, rng, 0, 1);
    s.eps_k = eps;
    Vector expect = s.lambda_k + (s.w_k - s.w_target) / (2 * eps + 1 / m);
    EXPECT_LT((mm_lambda_update(s, map, m).lambda - expect).norm(), 1e-8);
  }
}

TEST(MMUpdate, VanishingEpsRecoversLinearAscentDirection) {
  auto map = make_linear_map(3, ConeTag::zero);
  MMState s;
  s.lambda_k = Vector::Zero(3);
  s.w_k = Vector::Constant(3, 0.5);
  s.w_target = Vector::LinSpaced(3, 0.1, 0.3);
  s.eps_k = 1e-9;
  const double m = 1.5;
  Vector mm = mm_lambda_update(s, map, m).lambda;
  Vector lin = linear_ascent_step(s.lambda_k, s.w_k, s.w_target, m);
  EXPECT_LT((mm - lin).norm(), 1e-6);
}

TEST(MMUpdate, AnchorIsFixedWhenResponseOnTarget) {
  auto map = ev::build_ev_incentive_map(large_ev(), 6);
  MMState s;
  s.lambda_k = Vector::Constant(18, 0.7);
  s.w_k = Vector::Constant(6, 0.05);
  s.w_target = s.w_k;
  s.eps_k = 0.01 * large_ev().strong_m();
  EXPECT_LT((mm_lambda_update(s, map, large_ev().strong_m()).lambda - s.lambda_k).norm(), 1e-9);
}

TEST(MMUpdate, StaysInNonnegativeCone) {
  std::mt19937_64 rng(3);
  const auto cls = large_ev();
  auto map = ev::build_ev_incentive_map(cls, 12);
  for (int t = 0; t < 20; ++t) {
    MMState s;
    s.lambda_k = oracle::random_vector(36, rng, 0, 2);
    s.w_k = oracle::random_vector(12, rng, 0, cls.w_max);
    s.w_target = oracle::random_vector(12, rng, 0, cls.w_max);
    s.eps_k = 0.01 * cls.strong_m();
    EXPECT_TRUE(map.in_dual_cone(mm_lambda_update(s, map, cls.strong_m()).lambda));
  }
}

TEST(DualDecreaseAudit, NoStepIsZero) {
  auto map = make_linear_map(2);
  DualEvaluation d{1.5, Vector::Constant(2, 0.3)};
  Vector l = Vector::Constant(2, 0.2);
  auto a = dual_decrease_audit(l, l, Vector::Constant(2, 0.1), d, d, map, 1.0, 0.01);
  EXPECT_NEAR(a.lhs, 0.0, 1e-15);
  EXPECT_NEAR(a.rhs, 0.0, 1e-15);
  EXPECT_TRUE(a.ok);
}

TEST(DualDecreaseAudit, QuadraticFollowerMatchesClosedFormDual) {
  // g = (m/2)|w - a|^2 unconstrained: gbar(l) = <l, a> - |l|^2 / (2m)
  std::mt19937_64 rng(4);
  const double m = 2.0, eps = 0.01 * m;
  Vector a = oracle::random_vector(3, rng, -1, 1);
  Vector target = oracle::random_vector(3, rng, -1, 1);
  auto spec = linear_spec(isotropic(a, m), BoxSet::unbounded(3), m);
  auto gbar = [&](const Vector& l) { return l.dot(a) - l.squaredNorm() / (2 * m); };
  DualOracle dual = [&](const Vector& l) { return evaluate_dual(spec, l); };
  Vector l = Vector::Zero(3);
  for (int k = 0; k < 10; ++k) {
    MMState s{l, solve_member(spec, l), target, eps};
    Vector ln = mm_lambda_update(s, *spec.incentive_map, m).lambda;
    auto at_k = dual(l), at_n = dual(ln);
    EXPECT_NEAR(at_k.value, gbar(l), 1e-10);
    auto audit = dual_decrease_audit(l, ln, target, at_k, at_n, *spec.incentive_map, m, eps);
    const double lhs_exact = (gbar(l) - l.dot(target)) - (gbar(ln) - ln.dot(target));
    EXPECT_NEAR(audit.lhs, lhs_exact, 1e-10);
    // the surrogate is exact for this quadratic, so the gap is eps |dl|^2
    EXPECT_NEAR(audit.rhs - audit.lhs, eps * (ln - l).squaredNorm(), 1e-10);
    EXPECT_TRUE(audit.ok);
    l = ln;
  }
}

TEST(OptimalIncentive, SingleQuadraticMemberConverges) {
  const double m = 1.0;
  Vector a(3);
  a << 0.5, 0.2, 0.8;
  auto spec = linear_spec(isotropic(a, m), BoxSet::uniform(3, 0, 1), m);
  auto pop = std::make_shared<Population>();
  pop->members = {spec};
  pop->groups = {{0}};
  pop->theta_bar_per_group = {0.0};
  Vector target(3);
  target << 0.3, 0.3, 0.3;
  auto run = solve_optimal_incentive(pop, 0, target, 0.0, zero_incentive(*spec.incentive_map));
  EXPECT_TRUE(run.converged);
  EXPECT_LE(run.incentive.final_err, 1e-3);
  EXPECT_LE((run.w_final - target).norm(), 1e-3);
}

TEST(OptimalIncentive, WarmStartAtOptimumTakesNoIterations) {
  const double m = 1.0;
  auto spec = linear_spec(isotropic(Vector::Constant(2, 0.5), m), BoxSet::uniform(2, 0, 1), m);
  auto pop = std::make_shared<Population>();
  pop->members = {spec};
  pop->groups = {{0}};
  pop->theta_bar_per_group = {0.0};
  Vector target = Vector::Constant(2, 0.4);
  auto first = solve_optimal_incentive(pop, 0, target, 0.0, zero_incentive(*spec.incentive_map));
  auto second = solve_optimal_incentive(pop, 0, target, 0.0, first.incentive);
  EXPECT_EQ(second.incentive.iterations, 0);
  EXPECT_TRUE(second.converged);
}

TEST(OptimalIncentive, EvAuditsHoldAlongTrajectory) {
  const auto cls = large_ev();
  const Eigen::Index N = 12;
  auto model = ev::make_ev_group_model(cls, 0.4, N);
  auto pop = std::make_shared<Population>();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> soc(0.37, 0.43);
  for (int i = 0; i < 10; ++i) pop->members.push_back(ev::member_spec(model, soc(rng)));
  pop->groups.push_back({});
  for (std::size_t i = 0; i < 10; ++i) pop->groups[0].push_back(i);
  pop->theta_bar_per_group = {theta_bound(cls.delta, cls.capacity_kwh, 0.03, N)};
  LoMPCSpec rep = ev::member_spec(model, 0.4);
  DualOracle dual = [&](const Vector& l) { return evaluate_dual(rep, l); };
  Vector target = oracle::random_vector(int(N), rng, 0.0, cls.w_max);
  ResponseOracle resp = make_group_oracle(pop, 0);
  IncentiveOptions opt;
  opt.eps_tol = 1e-4;
  auto run = solve_optimal_incentive(resp, *model.map, cls.strong_m(), target, 0.0,
                                     zero_incentive(*model.map), opt, &dual);
  ASSERT_FALSE(run.audits.empty());
  for (const auto& a : run.audits) EXPECT_TRUE(a.ok) << a.actual_decrease << " vs " << a.surrogate_decrease;
}

TEST(Regularize, IdentityMapKeepsAnchor) {
  auto map = make_linear_map(3, ConeTag::zero);
  Incentive inc;
  inc.lambda = Vector::LinSpaced(3, -1, 1);
  inc.cone = ConeTag::zero;
  auto out = regularize_incentive(inc, Vector::Constant(3, 0.2), map, Vector::Ones(3));
  EXPECT_LT((out.lambda - inc.lambda).norm(), 1e-7);
}

TEST(Regularize, ZeroCostReturnsAnchor) {
  auto map = ev::build_ev_incentive_map(large_ev(), 4);
  Incentive inc;
  inc.lambda = Vector::Constant(12, 0.3);
  auto out = regularize_incentive(inc, Vector::Constant(4, 0.1), map, Vector::Zero(12));
  EXPECT_EQ(out.lambda, inc.lambda);
}

TEST(Regularize, EvPriceDropsAndResponseIsKept) {
  const auto cls = large_ev();
  const Eigen::Index N = 12;
  std::mt19937_64 rng(6);
  auto model = ev::make_ev_group_model(cls, 0.4, N);
  LoMPCSpec rep = ev::member_spec(model, 0.4);
  for (int t = 0; t < 5; ++t) {
    Incentive inc;
    inc.lambda = oracle::random_vector(int(3 * N), rng, 0.0, 20.0);
    Vector w = solve_member(rep, inc.lambda);
    Vector c = model.map->eval(w);
    auto out = regularize_incentive(inc, w, *model.map, c);
    EXPECT_LT(out.lambda.dot(c), inc.lambda.dot(c) - 1e-6);
    EXPECT_TRUE(model.map->in_dual_cone(out.lambda));
    EXPECT_LT((solve_member(rep, out.lambda) - w).norm(), 1e-6);
  }
}

TEST(Regularize, GroupKeepsEveryMemberResponse) {
  const auto cls = large_ev();
  const Eigen::Index N = 12;
  std::mt19937_64 rng(7);
  auto model = ev::make_ev_group_model(cls, 0.4, N);
  std::uniform_real_distribution<double> soc(0.35, 0.45);
  std::vector<LoMPCSpec> members;
  for (int i = 0; i < 8; ++i) members.push_back(ev::member_spec(model, soc(rng)));
  for (int t = 0; t < 5; ++t) {
    Incentive inc;
    inc.lambda = oracle::random_vector(int(3 * N), rng, 0.0, 20.0);
    std::vector<Vector> ws;
    Vector c = Vector::Zero(3 * N);
    for (const auto& m : members) {
      ws.push_back(solve_member(m, inc.lambda));
      c += model.map->eval(ws.back()) / double(members.size());
    }
    auto out = regularize_incentive(inc, ws, *model.map, c);
    EXPECT_LT(out.lambda.dot(c), inc.lambda.dot(c) - 1e-6);
    for (std::size_t i = 0; i < members.size(); ++i) {
      EXPECT_LT((solve_member(members[i], out.lambda) - ws[i]).norm(), 1e-6);
    }
  }
}
