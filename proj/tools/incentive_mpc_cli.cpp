#include <CLI11.hpp>

#include "incentive_mpc/cli/commands.hpp"

using namespace incentive_mpc;

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical incentive MPC for EV charging"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = available parallelism; INCENTIVE_MPC_THREADS overrides)");

  cli::RunArgs run;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  auto* r = app.add_subcommand("run", "closed-loop simulation; writes the trace CSV and <out>.summary.json");
  r->add_option("--scenario", run.scenario, "scenario file (default scenario when omitted)");
  r->add_option("--out", run.out, "trace CSV path")->capture_default_str();
  auto* seed_opt = r->add_option("--seed", seed, "RNG seed override");
  auto* steps_opt = r->add_option("--steps", steps, "number of steps override");

  cli::VerifyBoundArgs vb;
  auto* b = app.add_subcommand("verify-bound", "group error bound check on random incentives");
  b->add_option("--scenario", vb.scenario, "scenario file for class parameters");
  b->add_option("--class", vb.cls, "EV class name")->capture_default_str();
  b->add_option("--members", vb.members, "group size")->capture_default_str();
  b->add_option("--dy0-grid", vb.dy0_grid, "comma-separated SoC spreads")->delimiter(',');
  b->add_option("--trials", vb.trials, "incentives per spread")->capture_default_str();
  b->add_option("--seed", vb.seed)->capture_default_str();
  b->add_option("--out", vb.out, "data CSV path")->capture_default_str();

  cli::VerifyDualArgs vd;
  auto* d = app.add_subcommand("verify-dual-decrease", "dual cost decrease check at every incentive iterate");
  d->add_option("--scenario", vd.scenario, "scenario file for class parameters");
  d->add_option("--class", vd.cls, "EV class name")->capture_default_str();
  d->add_option("--members", vd.members, "group size")->capture_default_str();
  d->add_option("--trials", vd.trials, "independent runs")->capture_default_str();
  d->add_option("--seed", vd.seed)->capture_default_str();
  d->add_option("--out", vd.out, "data CSV path")->capture_default_str();

  std::string trace, figure, out;
  auto* p = app.add_subcommand("plot-data", "per-figure CSV from a trace");
  p->add_option("--trace", trace, "trace CSV")->required();
  p->add_option("--figure", figure, "figure id")->required()->check(CLI::IsMember(cli::figure_ids()));
  p->add_option("--out", out, "output CSV")->required();

  std::string audit_trace, audit_scenario;
  auto* a = app.add_subcommand("audit", "recompute bounds, bands and energy balance of a trace");
  a->add_option("--trace", audit_trace, "trace CSV")->required();
  a->add_option("--scenario", audit_scenario, "scenario the trace was produced with");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kClean : cli::kError;
  }

  if (r->parsed()) {
    if (*seed_opt) run.seed = seed;
    if (*steps_opt) run.steps = steps;
    run.threads = threads;
    return cli::cmd_run(run);
  }
  if (b->parsed()) {
    vb.threads = threads;
    return cli::cmd_verify_bound(vb);
  }
  if (d->parsed()) {
    vd.threads = threads;
    return cli::cmd_verify_dual_decrease(vd);
  }
  if (p->parsed()) return cli::cmd_plot_data(trace, figure, out);
  return cli::cmd_audit(audit_trace, audit_scenario);
}
