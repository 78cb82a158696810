#include <gtest/gtest.h>

#include <chrono>
#include <random>
#include <sstream>

#include "incentive_mpc/ev/demand.hpp"
#include "incentive_mpc/ev/ev_bimpc.hpp"
#include "incentive_mpc/ev/partition.hpp"
#include "support/kkt_oracle.hpp"

using namespace incentive_mpc;
using namespace incentive_mpc::ev;

namespace {

std::string error_key(const std::string& text) {
  try {
    parse_scenario_text(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<none>";
}

std::vector<GroupSummary> summaries(const ScenarioConfig& s, const std::vector<std::vector<double>>& socs) {
  std::vector<GroupSummary> out;
  for (std::size_t c = 0; c < socs.size(); ++c) {
    for (const auto& g : partition_population(socs[c], s.classes[c].partitions)) {
      GroupSummary gs;
      gs.cls = c;
      gs.count = g.members.size();
      gs.weight = double(gs.count) * s.classes[c].capacity_kwh / s.normalization_b();
      gs.mean_y0 = g.mean_y0;
      gs.radius = group_radius(g.dy0, s.horizon, s.solver.eps_tol);
      out.push_back(gs);
    }
  }
  return out;
}

std::vector<std::vector<double>> draw_socs(const ScenarioConfig& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(s.soc_init_lo, s.soc_init_hi);
  std::vector<std::vector<double>> out;
  for (const auto& c : s.classes) {
    std::vector<double> v(c.count);
    for (auto& y : v) y = U(rng);
    out.push_back(v);
  }
  return out;
}

Vector normalized_window(const ScenarioConfig& s, std::size_t start) {
  return ingest_demand(s, start + s.horizon).window(start, s.horizon) / s.normalization_b();
}

}  // namespace

TEST(Config, DefaultsValidate) {
  auto s = default_scenario();
  EXPECT_NO_THROW(s.validate());
  EXPECT_DOUBLE_EQ(s.normalization_b(), 30000.0);
  EXPECT_EQ(s.population(), 1000u);
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_EQ(error_key("horizon = twelve\n"), "horizon");
  EXPECT_EQ(error_key("iso.x_max = -1\n"), "iso.x_max");
  EXPECT_EQ(error_key("iso.bogus = 1\n"), "iso.bogus");
  EXPECT_EQ(error_key("seed = 1\nseed = 2\n"), "seed");
  EXPECT_EQ(error_key("classes[0].count = 10\nclasses[0].capacity_kwh = 10\nclasses[0].w_max = 2\n"),
            "classes[0].w_max");
  EXPECT_EQ(error_key("classes[0].count = 10\nclasses[0].capacity_kwh = 10\nclasses[0].w_max = 0.2\n"
                      "classes[0].battery_c1 = 0\n"),
            "classes[0].battery_c1");
  EXPECT_EQ(error_key("iso.horizon_r = 13\n"), "iso.horizon_r");
  EXPECT_EQ(error_key("solver.regularize = maybe\n"), "solver.regularize");
}

TEST(Config, EchoRoundTrips) {
  auto s = parse_scenario_text(
      "# two classes\nclasses[0].count = 7\nclasses[0].capacity_kwh = 12.5\nclasses[0].w_max = 0.2\n"
      "classes[1].count = 3\nclasses[1].capacity_kwh = 40\nclasses[1].w_max = 0.1\n"
      "iso.gamma = 3.5  # trailing comment\nsteps = 5\nseed = 9\n");
  EXPECT_EQ(s.classes.size(), 2u);
  EXPECT_EQ(s.classes[0].name, "class0");
  std::ostringstream text;
  for (const auto& [k, v] : scenario_entries(s)) text << k << " = " << v << "\n";
  auto again = parse_scenario_text(text.str());
  EXPECT_EQ(scenario_entries(again), scenario_entries(s));
  EXPECT_DOUBLE_EQ(again.iso.gamma, 3.5);
  EXPECT_EQ(again.seed, 9u);
}

TEST(Demand, ScaleDivisor) {
  std::istringstream in("hour,kwh\n0,100\n1,100\n");
  auto v = parse_demand_csv(in, 4.0);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_DOUBLE_EQ(v[0], 25.0);
}

TEST(Demand, TilesToLength) {
  std::vector<double> base(24);
  for (int k = 0; k < 24; ++k) base[std::size_t(k)] = k;
  auto p = tile(base, 60);
  ASSERT_EQ(p.values.size(), 60u);
  EXPECT_EQ(p.at(24), 0.0);
  EXPECT_EQ(p.at(59), 11.0);
  EXPECT_THROW(p.window(50, 12), std::out_of_range);
}

TEST(Demand, ErrorsCarryLine) {
  std::istringstream bad("hour,kwh\n0,1\n1,abc\n");
  try {
    parse_demand_csv(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
  std::istringstream cols("0,1,2\n");
  EXPECT_THROW(parse_demand_csv(cols), ParseError);
  std::istringstream neg("# c\n0,1\n1,-2\n");
  try {
    parse_demand_csv(neg);
    FAIL();
  } catch (const NegativeDemand& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(Demand, SyntheticExtremesAtConfiguredHours) {
  DemandConfig d;
  auto p = synthetic_demand(d, 1.0, 48);
  std::size_t imax = 0, imin = 0;
  for (std::size_t k = 0; k < 24; ++k) {
    if (p.at(k) > p.at(imax)) imax = k;
    if (p.at(k) < p.at(imin)) imin = k;
  }
  EXPECT_EQ(imax, 17u);
  EXPECT_EQ(imin, 4u);
  EXPECT_NEAR(p.at(17), 0.85, 1e-15);
  EXPECT_NEAR(p.at(4), 0.55, 1e-15);
  for (std::size_t k = 0; k < 24; ++k) EXPECT_NEAR(p.at(k), p.at(k + 24), 1e-14);
}

TEST(Partition, SingleInterval) {
  std::vector<double> y{0.31, 0.45, 0.38, 0.5};
  auto g = partition_population(y, 1);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0].members.size(), 4u);
  EXPECT_NEAR(g[0].center, 0.405, 1e-15);
  EXPECT_NEAR(g[0].dy0, 0.095, 1e-15);
}

TEST(Partition, CoversAndHalves) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.3, 0.5);
  std::vector<double> y(400);
  for (auto& v : y) v = U(rng);
  for (std::size_t P : {1, 2, 4, 8, 12}) {
    auto groups = partition_population(y, P);
    std::size_t total = 0;
    double max_dy0 = 0.0;
    for (const auto& g : groups) {
      total += g.members.size();
      for (auto i : g.members) EXPECT_LE(std::abs(y[i] - g.center), g.dy0 + 1e-15);
      max_dy0 = std::max(max_dy0, g.dy0);
    }
    EXPECT_EQ(total, y.size());
    const double span = *std::max_element(y.begin(), y.end()) - *std::min_element(y.begin(), y.end());
    EXPECT_NEAR(max_dy0, span / (2.0 * double(P)), 1e-12);
  }
}

TEST(Certificate, NamedConditions) {
  Vector D = Vector::Constant(12, 0.7);
  auto ok = feasibility_certificate(0.15, D, 0.05, 0.3, 0.3, 1.0, 3);
  EXPECT_TRUE(ok.feasible);
  EXPECT_EQ(ok.witness.size(), 12 + 36);
  EXPECT_EQ(feasibility_certificate(0.15, D, 0.31, 0.3, 0.3, 1.0, 3).violated, "delta_le_ub_max");
  EXPECT_EQ(feasibility_certificate(0.15, D, 0.16, 0.3, 0.3, 1.0, 3).violated, "two_delta_le_x_max");
  EXPECT_EQ(feasibility_certificate(0.0, D, 0.14, 0.15, 0.3, 1.0, 3).violated, "x0_band");
  EXPECT_EQ(feasibility_certificate(0.15, Vector::Constant(12, 1.2), 0.05, 0.3, 0.3, 1.0, 3).violated,
            "generation_capacity");
}

TEST(EVBiMPC, ZeroDeltaKeepsOriginalBounds) {
  auto s = default_scenario();
  std::vector<GroupSummary> g(2);
  for (std::size_t c = 0; c < 2; ++c) {
    g[c].cls = c;
    g[c].count = 500;
    g[c].weight = 500.0 * s.classes[c].capacity_kwh / s.normalization_b();
    g[c].mean_y0 = 0.4;
  }
  auto b = build_bimpc(s, 0.15, normalized_window(s, 0), g);
  EXPECT_EQ(b.delta, 0.0);
  EXPECT_EQ(b.spec.state_constraints.tightening.lpNorm<Eigen::Infinity>(), 0.0);
  g[0].radius = 0.01;
  g[1].radius = 0.02;
  auto t = build_bimpc(s, 0.15, normalized_window(s, 0), g);
  EXPECT_NEAR(t.delta, g[0].weight * 0.01 + g[1].weight * 0.02, 1e-15);
  // horizon_r = 1: the first-step error persists in every level, but only the first increment sees it
  const auto& tt = t.spec.state_constraints.tightening;
  for (Eigen::Index k = 0; k < 12; ++k) {
    EXPECT_NEAR(tt[k], t.delta, 1e-15);
    EXPECT_NEAR(tt[12 + k], t.delta, 1e-15);
    EXPECT_NEAR(tt[24 + k], k == 0 ? t.delta : 0.0, 1e-15);
    EXPECT_NEAR(tt[36 + k], k == 0 ? t.delta : 0.0, 1e-15);
  }
}

TEST(EVBiMPC, CostGradientMatchesFiniteDifference) {
  auto s = default_scenario();
  auto socs = draw_socs(s, 5);
  for (auto& c : s.classes) c.partitions = 3;
  auto g = summaries(s, socs);
  auto b = build_bimpc(s, 0.15, normalized_window(s, 3), g);
  std::mt19937_64 rng(11);
  const int nu = int(b.spec.dim_u()), nw = int(b.spec.dim_w());
  for (int t = 0; t < 5; ++t) {
    Vector z = oracle::random_vector(nu + nw, rng, 0.05, 0.2);
    auto f = [&](const Vector& v) {
      Vector gu, gw;
      return b.spec.cost(v.head(nu), v.tail(nw), gu, gw);
    };
    Vector gu, gw;
    b.spec.cost(z.head(nu), z.tail(nw), gu, gw);
    Vector g_an(nu + nw);
    g_an << gu, gw;
    EXPECT_TRUE(oracle::gradients_match(g_an, oracle::fd_gradient(f, z), 1e-5, 1e-8));
  }
}

TEST(EVBiMPC, LargeGammaWeightsTerminalOnly) {
  auto s = default_scenario();
  s.iso.gamma = 1e12;
  std::vector<GroupSummary> g(1);
  g[0].count = 500;
  g[0].weight = 500.0 * 10.0 / 30000.0;
  g[0].mean_y0 = 0.4;
  auto b = build_bimpc(s, 0.15, normalized_window(s, 0), g);
  const Eigen::Index N = 12;
  Vector u = Vector::Zero(N), w = Vector::Zero(N), gu, gw;
  // cumsum reaches the target exactly at the last step only
  w[N - 1] = 0.5;
  EXPECT_NEAR(b.spec.cost(u, w, gu, gw), 0.0, 1e-12);
  w.setZero();
  w[0] = 0.5;
  EXPECT_NEAR(b.spec.cost(u, w, gu, gw), 0.0, 1e-12);
  w[0] = 0.4;
  EXPECT_NEAR(b.spec.cost(u, w, gu, gw), 0.01, 1e-12);
}

TEST(EVBiMPC, FirstStepFillsTheValley) {
  auto s = default_scenario();
  auto socs = draw_socs(s, s.seed);
  auto g = summaries(s, socs);
  const Vector D = normalized_window(s, 0);
  auto b = build_bimpc(s, s.iso.x0, D, g);
  auto cert = feasibility_certificate(s.iso.x0, D, b.delta, s.iso.ub_max, s.iso.x_max, s.iso.ug_max, g.size());
  ASSERT_TRUE(cert.feasible) << cert.violated;
  TeamSolveOptions opt;
  opt.backoff = 1e-6;
  const auto t0 = std::chrono::steady_clock::now();
  auto plan = solve_team_optimal(b.spec, opt, &cert.witness);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 20.0);
  const Eigen::Index N = D.size(), G = Eigen::Index(g.size());
  Vector ev = Vector::Zero(N);
  for (Eigen::Index k = 0; k < N; ++k)
    for (Eigen::Index j = 0; j < G; ++j) ev[k] += g[std::size_t(j)].weight * plan.w[k * G + j];
  // hours 0..11: trough at 4 am, so charging concentrates before the morning ramp
  const double early = ev.head(6).sum(), late = ev.tail(6).sum();
  EXPECT_GT(early, late);
  for (Eigen::Index k = 1; k <= N; ++k) {
    EXPECT_GE(plan.x_pred[k], -1e-9);
    EXPECT_LE(plan.x_pred[k], s.iso.x_max + 1e-9);
  }
  EXPECT_LE(plan.x_pred[1], s.iso.x_max - b.delta + 1e-9);
  EXPECT_GE(plan.x_pred[1], b.delta - 1e-9);
}
