#pragma once

#include <functional>
#include <map>
#include <memory>
#include <random>
#include <utility>
#include <vector>

#include "incentive_mpc/ev/demand.hpp"
#include "incentive_mpc/ev/ev_bimpc.hpp"
#include "incentive_mpc/ev/partition.hpp"
#include "incentive_mpc/incentive/optimal_incentive.hpp"
#include "incentive_mpc/util/parallel.hpp"

namespace incentive_mpc::sim {

struct SystemState {
  double x = 0.0;  // storage, fraction of B
  std::vector<double> y;
  std::vector<std::size_t> cls;
  std::size_t t = 0;
};

struct GroupRecord {
  std::size_t cls = 0;
  std::size_t slot = 0;
  std::size_t count = 0;
  double center = 0.0;
  double dy0 = 0.0;
  double mean_y0 = 0.0;
  double weight = 0.0;
  double radius = 0.0;
  Vector w_plan;  // w_hat, length N
  Vector w_real;  // realized group average, length N
  Vector lambda;
  double err = 0.0;        // |w_hat - w|
  double first_err = 0.0;  // |w_hat_0 - w_0|
  int iterations = 0;
  bool converged = false;
  bool regularized = false;
  bool cap_hit = false;
  double price_before = 0.0;  // <lambda, mean phi(w_i)> before regularization
  double price_after = 0.0;
  std::vector<double> dd_actual;
  std::vector<double> dd_surrogate;
};

// Energies are fractions of B.
struct StepRecord {
  std::size_t t = 0;
  double x0 = 0.0;
  double x_next = 0.0;
  double ug0 = 0.0;
  double demand0 = 0.0;
  double ev_plan0 = 0.0;
  double ev_real0 = 0.0;
  double ub0 = 0.0;
  double delta = 0.0;
  Vector x_pred;  // N + 1 entries, x_pred[0] = x0
  Vector u_plan;
  int bimpc_outer = 0;
  bool bimpc_retried = false;
  std::vector<std::size_t> full_charged;  // per class, during this step
  std::vector<GroupRecord> groups;

  bool flagged() const {
    for (const auto& g : groups)
      if (!g.converged) return true;
    return false;
  }
};

struct ClosedLoopTrace {
  double b_kwh = 0.0;
  std::size_t horizon = 0;
  SystemState initial;
  SystemState final_state;
  std::vector<StepRecord> steps;

  std::vector<std::size_t> full_charged_per_class(std::size_t n_classes) const {
    std::vector<std::size_t> out(n_classes, 0);
    for (const auto& s : steps)
      for (std::size_t c = 0; c < s.full_charged.size() && c < n_classes; ++c) out[c] += s.full_charged[c];
    return out;
  }
};

struct SimOptions {
  std::size_t threads = 1;
  bool audit_dual = true;
  TeamSolveOptions team = [] {
    TeamSolveOptions t;
    t.tol_opt = 1e-5;
    t.backoff = 1e-6;
    return t;
  }();
};

inline SystemState initial_state(const ev::ScenarioConfig& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(s.soc_init_lo, s.soc_init_hi);
  SystemState st;
  st.x = s.iso.x0;
  for (std::size_t c = 0; c < s.classes.size(); ++c) {
    for (std::size_t i = 0; i < s.classes[c].count; ++i) {
      st.y.push_back(U(rng));
      st.cls.push_back(c);
    }
  }
  return st;
}

class ClosedLoop {
 public:
  ClosedLoop(ev::ScenarioConfig s, SimOptions opt = {})
      : s_(std::move(s)), opt_(opt), rng_(s_.seed), ex_(opt.threads) {
    s_.validate();
    b_ = s_.normalization_b();
    demand_ = ev::ingest_demand(s_, s_.steps + s_.horizon);
    st_ = initial_state(s_, rng_);
    const auto N = Eigen::Index(s_.horizon);
    for (const auto& c : s_.classes) maps_.push_back(std::make_shared<const IncentiveMap>(ev::build_ev_incentive_map(c, N)));
  }

  const SystemState& state() const { return st_; }
  const ev::ScenarioConfig& scenario() const { return s_; }
  double b_kwh() const { return b_; }

  // One receding-horizon step. Throws InfeasibleStep when the certificate fails.
  StepRecord step() {
    const std::size_t N = s_.horizon;
    const Eigen::Index Ni = Eigen::Index(N);
    StepRecord rec;
    rec.t = st_.t;
    rec.x0 = st_.x;
    rec.full_charged.assign(s_.classes.size(), 0);

    // groups per class, members as global indices
    struct Built {
      ev::GroupSummary summary;
      ev::SocGroup group;
    };
    std::vector<Built> built;
    for (std::size_t c = 0; c < s_.classes.size(); ++c) {
      std::vector<std::size_t> idx;
      std::vector<double> soc;
      for (std::size_t i = 0; i < st_.y.size(); ++i) {
        if (st_.cls[i] == c) {
          idx.push_back(i);
          soc.push_back(st_.y[i]);
        }
      }
      for (auto g : ev::partition_population(soc, s_.classes[c].partitions)) {
        for (auto& m : g.members) m = idx[m];
        Built b;
        b.summary.cls = c;
        b.summary.count = g.members.size();
        b.summary.weight = double(g.members.size()) * s_.classes[c].capacity_kwh / b_;
        b.summary.mean_y0 = g.mean_y0;
        b.summary.radius = ev::group_radius(g.dy0, N, s_.solver.eps_tol);
        b.group = std::move(g);
        built.push_back(std::move(b));
      }
    }
    std::vector<ev::GroupSummary> summaries;
    for (const auto& b : built) summaries.push_back(b.summary);

    const Vector D = demand_.window(st_.t, N) / b_;
    rec.demand0 = D[0];
    const double delta = ev::total_delta(summaries);
    rec.delta = delta;
    auto cert = ev::feasibility_certificate(st_.x, D, delta, s_.iso.ub_max, s_.iso.x_max, s_.iso.ug_max,
                                            summaries.size());
    if (!cert.feasible) {
      throw InfeasibleStep(cert.violated, "robust BiMPC certificate failed at step " + std::to_string(st_.t));
    }
    auto bimpc = ev::build_bimpc(s_, st_.x, D, summaries);
    TeamPlan plan = solve_team_optimal(bimpc.spec, opt_.team, &cert.witness);
    rec.x_pred = plan.x_pred;
    rec.u_plan = plan.u;
    rec.ug0 = plan.u[0];
    rec.bimpc_outer = plan.solver.outer_iterations;
    rec.bimpc_retried = plan.retried;

    IncentiveOptions iopt;
    iopt.eps_tol = s_.solver.eps_tol;
    iopt.eps_scale = s_.solver.eps_scale;
    iopt.max_iter = s_.solver.max_iter;
    iopt.lambda_cap = s_.solver.lambda_cap;
    MemberSolveOptions mopt;
    mopt.tol = s_.solver.member_tol;

    std::vector<double> applied(st_.y.size(), 0.0);
    for (std::size_t g = 0; g < built.size(); ++g) {
      const auto& b = built[g];
      const auto& cls = s_.classes[b.summary.cls];
      GroupRecord gr;
      gr.cls = b.summary.cls;
      gr.slot = b.group.slot;
      gr.count = b.summary.count;
      gr.center = b.group.center;
      gr.dy0 = b.group.dy0;
      gr.mean_y0 = b.summary.mean_y0;
      gr.weight = b.summary.weight;
      gr.radius = b.summary.radius;
      gr.w_plan = bimpc.group_plan(plan.w, g);

      auto model = ev::make_ev_group_model(cls, b.group.center, Ni, maps_[b.summary.cls]);
      auto pop = std::make_shared<Population>();
      for (std::size_t i : b.group.members) pop->members.push_back(ev::member_spec(model, st_.y[i]));
      pop->groups.push_back({});
      for (std::size_t k = 0; k < b.group.members.size(); ++k) pop->groups[0].push_back(k);
      pop->theta_bar_per_group.push_back(theta_bound(cls.delta, cls.capacity_kwh, b.group.dy0, Ni));
      pop->validate(1e-9);

      auto last = std::make_shared<GroupResponse>();
      auto last_lambda = std::make_shared<Vector>();
      ResponseOracle respond = [pop, last, last_lambda, mopt, this](const Vector& l) {
        GroupResponse r = group_response(*pop, 0, l, ex_, &last->members, mopt);
        *last = std::move(r);
        *last_lambda = l;
        return last->average;
      };
      const LoMPCSpec rep = ev::member_spec(model, b.group.center);
      auto rep_warm = std::make_shared<Vector>();
      DualOracle dual = [rep, rep_warm, mopt](const Vector& l) {
        DualEvaluation d = evaluate_dual(rep, l, mopt, rep_warm->size() ? rep_warm.get() : nullptr);
        *rep_warm = d.w;
        return d;
      };

      Incentive ws;
      auto it = warm_lambda_.find({gr.cls, gr.slot});
      if (it != warm_lambda_.end()) ws.lambda = it->second;
      const double threshold = std::max(gr.radius - s_.solver.eps_tol, 0.0);
      IncentiveRun run = solve_optimal_incentive(respond, *model.map, cls.strong_m(), gr.w_plan, threshold, ws,
                                                 iopt, opt_.audit_dual ? &dual : nullptr);
      for (const auto& a : run.audits) {
        gr.dd_actual.push_back(a.actual_decrease);
        gr.dd_surrogate.push_back(a.surrogate_decrease);
      }
      if (*last_lambda != run.incentive.lambda) respond(run.incentive.lambda);
      Incentive lam = run.incentive;
      GroupResponse resp = *last;

      Vector c = Vector::Zero(model.map->dim_lambda);
      for (const auto& w : resp.members) c += model.map->eval(w);
      c /= double(resp.members.size());
      gr.price_before = lam.lambda.dot(c);
      gr.price_after = gr.price_before;
      if (s_.solver.regularize) {
        Incentive reg = regularize_incentive(lam, resp.members, *model.map, c, s_.solver.lambda_cap);
        if (reg.lambda != lam.lambda) {
          respond(reg.lambda);
          const double moved = (last->average - resp.average).norm();
          const double err_old = (gr.w_plan - resp.average).norm();
          const double err_new = (gr.w_plan - last->average).norm();
          if (moved <= s_.solver.eps_tol && err_new <= std::max(gr.radius, err_old)) {
            lam = reg;
            resp = *last;
            gr.regularized = true;
            gr.price_after = reg.lambda.dot(c);
          }
        }
      }
      gr.lambda = lam.lambda;
      gr.iterations = run.incentive.iterations;
      gr.converged = run.converged;
      gr.cap_hit = lam.cap_hit;
      gr.w_real = resp.average;
      gr.err = (gr.w_plan - gr.w_real).norm();
      gr.first_err = std::abs(gr.w_plan[0] - gr.w_real[0]);
      warm_lambda_[{gr.cls, gr.slot}] = lam.lambda;
      for (std::size_t k = 0; k < b.group.members.size(); ++k) applied[b.group.members[k]] = resp.members[k][0];
      rec.ev_plan0 += gr.weight * gr.w_plan[0];
      rec.groups.push_back(std::move(gr));
    }

    // realized first inputs; the battery absorbs the mismatch
    double ev = 0.0;
    for (std::size_t i = 0; i < st_.y.size(); ++i) ev += s_.classes[st_.cls[i]].capacity_kwh * applied[i];
    rec.ev_real0 = ev / b_;
    rec.ub0 = rec.ug0 - rec.demand0 - rec.ev_real0;
    rec.x_next = rec.x0 + rec.ub0;

    std::uniform_real_distribution<double> fresh(s_.soc_init_lo, s_.soc_init_hi);
    for (std::size_t i = 0; i < st_.y.size(); ++i) {
      st_.y[i] += applied[i];
      if (st_.y[i] >= s_.classes[st_.cls[i]].y_max - s_.full_charge_margin) {
        ++rec.full_charged[st_.cls[i]];
        st_.y[i] = fresh(rng_);
      }
    }
    st_.x = rec.x_next;
    ++st_.t;
    return rec;
  }

  ClosedLoopTrace run(std::size_t steps, const std::function<void(const StepRecord&)>& on_step = {}) {
    if (st_.t + steps > s_.steps) {
      demand_ = ev::ingest_demand(s_, st_.t + steps + s_.horizon);
    }
    ClosedLoopTrace tr;
    tr.b_kwh = b_;
    tr.horizon = s_.horizon;
    tr.initial = st_;
    for (std::size_t k = 0; k < steps; ++k) {
      tr.steps.push_back(step());
      if (on_step) on_step(tr.steps.back());
    }
    tr.final_state = st_;
    return tr;
  }

 private:
  ev::ScenarioConfig s_;
  SimOptions opt_;
  std::mt19937_64 rng_;
  Executor ex_;
  double b_ = 0.0;
  ev::DemandProfile demand_;
  SystemState st_;
  std::vector<std::shared_ptr<const IncentiveMap>> maps_;
  std::map<std::pair<std::size_t, std::size_t>, Vector> warm_lambda_;
};

inline ClosedLoopTrace run(const ev::ScenarioConfig& s, std::size_t steps, const SimOptions& opt = {},
                           const std::function<void(const StepRecord&)>& on_step = {}) {
  ClosedLoop loop(s, opt);
  return loop.run(steps, on_step);
}

}  // namespace incentive_mpc::sim
