#include "oedsteer/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <random>

#include "oedsteer/io.hpp"
#include "oedsteer/scenario.hpp"

namespace oedsteer {

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
  std::string scenario;
  std::string out = "out";
  std::uint64_t seed = 0;
  bool has_seed = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--scenario", args.scenario, "scenario file")->required();
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--seed", args.seed, "override the scenario seed")
      ->each([&args](const std::string&) { args.has_seed = true; });
}

ContextOptions context_options(const CommonArgs& args) {
  ContextOptions o;
  if (args.has_seed) o.seed_override = args.seed;
  return o;
}

Manifest start_manifest(const Scenario& s, const std::string& command) {
  Manifest m;
  m.scenario_hash = config_hash(s.entries);
  m.seed = s.seed;
  m.command = command;
  return m;
}

void finish(const fs::path& dir, Manifest& m) {
  write_manifest(dir / "manifest.txt", m);
  std::cout << "wrote " << (dir / "manifest.txt").string() << "\n";
}

fs::path ensure_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

GoalVector scenario_goal(const ScenarioContext& ctx) {
  const Scenario& s = ctx.scenario;
  if (s.qoi_t_start == 0.0 && s.qoi_t_end == 0.0)
    return goal_vector_initial(s.qoi_region, *ctx.grid);
  return goal_vector_spacetime(QoiSpec{s.qoi_region, s.qoi_t_start, s.qoi_t_end},
                               *ctx.transport);
}

int cmd_forward(const CommonArgs& args) {
  Scenario s = parse_scenario(args.scenario);
  ContextOptions co = context_options(args);
  co.skip_rom = true;
  ScenarioContext ctx = build_context(s, co);
  const fs::path dir = ensure_dir(args.out);
  Manifest m = start_manifest(ctx.scenario, "forward");

  const int stride = ctx.scenario.snapshot_stride > 0 ? ctx.scenario.snapshot_stride
                                                      : ctx.transport->numSteps();
  ForwardSolution sol = solve_forward(ctx.truth, *ctx.transport, *ctx.candidates, stride);
  for (const auto& snap : sol.snapshots) {
    char name[64];
    std::snprintf(name, sizeof(name), "u_t%07.2f.field", snap.time);
    write_field(dir / name, snap);
    m.artifacts.push_back(name);
  }
  Observations obs = simulate_measurements(ctx.truth, *ctx.forward, ctx.scenario.sigma,
                                           ctx.scenario.seed);
  write_observations_csv(dir / "observations.csv", obs);
  m.artifacts.push_back("observations.csv");
  m.notes.emplace_back("measurements", std::to_string(obs.d.size()));
  finish(dir, m);
  return 0;
}

int cmd_invert(const CommonArgs& args, bool use_rom) {
  Scenario s = parse_scenario(args.scenario);
  ContextOptions co = context_options(args);
  co.force_rom = use_rom;
  co.skip_rom = !use_rom;
  ScenarioContext ctx = build_context(s, co);
  const fs::path dir = ensure_dir(args.out);
  Manifest m = start_manifest(ctx.scenario, "invert");

  Observations obs = simulate_measurements(ctx.truth, *ctx.forward, ctx.scenario.sigma,
                                           ctx.scenario.seed);
  const DesignWeights w = DesignWeights::ones(ctx.candidates->numWeights());
  ScalarField mmap = ScalarField::zero(*ctx.grid);
  if (ctx.rom) {
    mmap.values = rom_solve_map(*ctx.rom, *ctx.prior,
                                ctx.candidates->expandWeights(w.w), obs.d, obs.sigma);
    m.notes.emplace_back("operators", "rom");
  } else {
    mmap = solve_map(obs, w, *ctx.forward, *ctx.prior);
    m.notes.emplace_back("operators", "full");
  }
  write_field(dir / "m_map.field", mmap);
  m.artifacts.push_back("m_map.field");
  const double err = std::sqrt((mmap.values - ctx.truth.values).squaredNorm() *
                               ctx.grid->cellArea());
  m.notes.emplace_back("l2_error_vs_truth", std::to_string(err));
  finish(dir, m);
  return 0;
}

int cmd_oed(const CommonArgs& args, bool use_rom, double alpha_override, Index rank_override,
            double threshold_override) {
  Scenario s = parse_scenario(args.scenario);
  ContextOptions co = context_options(args);
  if (use_rom) co.force_rom = true;
  ScenarioContext ctx = build_context(s, co);
  const fs::path dir = ensure_dir(args.out);
  Manifest m = start_manifest(ctx.scenario, "oed");

  DesignProblem dp;
  dp.candidates = ctx.candidates.get();
  dp.goal = scenario_goal(ctx);
  dp.alpha = alpha_override >= 0 ? alpha_override : ctx.scenario.design_alpha;
  dp.sigma = ctx.scenario.sigma;
  dp.rank = rank_override > 0 ? rank_override : ctx.scenario.design_rank;
  dp.threshold = threshold_override > 0 ? threshold_override : ctx.scenario.design_threshold;

  WeightPattern pattern = weight_pattern(*ctx.candidates);
  std::unique_ptr<TraceEvaluator> evaluator;
  if (ctx.rom) {
    evaluator = std::make_unique<TraceEvaluator>(dp, *ctx.rom, *ctx.prior, pattern);
    m.notes.emplace_back("operators", "rom");
  } else {
    LowRankOptions lo;
    lo.seed = ctx.scenario.seed;
    evaluator = std::make_unique<TraceEvaluator>(dp, *ctx.forward, *ctx.prior, pattern, lo);
    m.notes.emplace_back("operators", "full");
  }

  OptimizeOptions oo;
  oo.maxiter = ctx.scenario.design_maxiter;
  const Index q = ctx.candidates->numWeights();
  OptimizeResult res = optimize_design(*evaluator, Vector::Constant(q, 0.5), oo);

  DesignWeights binary = threshold_design(DesignWeights{res.w}, dp.threshold);
  const double relaxed = evaluator->dataTerm(res.w);
  const double binarized = evaluator->dataTerm(binary.w);
  const double all_on = evaluator->dataTerm(Vector::Ones(q));
  const double prior_only = evaluator->priorGoalVariance();

  write_design_csv(dir / "design.csv", *ctx.candidates, res.w, binary.w);
  m.artifacts.push_back("design.csv");
  m.notes.emplace_back("candidates", std::to_string(q));
  m.notes.emplace_back("selected", std::to_string(static_cast<long>(binary.w.sum())));
  m.notes.emplace_back("goal_variance_prior", std::to_string(prior_only));
  m.notes.emplace_back("goal_variance_relaxed", std::to_string(relaxed));
  m.notes.emplace_back("goal_variance_binary", std::to_string(binarized));
  m.notes.emplace_back("goal_variance_all_sensors", std::to_string(all_on));
  m.notes.emplace_back("optimizer_iterations", std::to_string(res.iterations));
  m.notes.emplace_back("optimizer_converged", res.converged ? "true" : "false");
  std::cout << "selected " << static_cast<long>(binary.w.sum()) << " of " << q
            << " sensors; goal variance " << binarized << " (all sensors " << all_on
            << ", prior " << prior_only << ")\n";
  finish(dir, m);
  return 0;
}

int cmd_rom_build(const CommonArgs& args, Index rank, bool precond, const std::string& out_file) {
  Scenario s = parse_scenario(args.scenario);
  ContextOptions co = context_options(args);
  co.skip_rom = true;
  ScenarioContext ctx = build_context(s, co);
  const fs::path dir = ensure_dir(args.out);
  Manifest m = start_manifest(ctx.scenario, "rom build");

  RomOptions ro;
  ro.oversample = ctx.scenario.rom_oversample;
  ro.power_iters = ctx.scenario.rom_power_iters;
  ro.seed = ctx.scenario.seed;
  const Index r = rank > 0 ? rank : ctx.scenario.rom_rank;
  RomOperator rom = build_rom(*ctx.forward, *ctx.prior, r, precond, ro);
  const std::string name = out_file.empty() ? "rom.txt" : out_file;
  write_rom(dir / name, rom);
  m.artifacts.push_back(name);
  m.notes.emplace_back("rank", std::to_string(rom.rank()));
  m.notes.emplace_back("preconditioned", precond ? "true" : "false");
  m.notes.emplace_back("probed_tail", std::to_string(rom.probed_tail));
  std::cout << "rom rank " << rom.rank() << ", probed tail " << rom.probed_tail << "\n";
  finish(dir, m);
  return 0;
}

int cmd_rom_eval(const CommonArgs& args, const std::string& rom_file, int probes) {
  Scenario s = parse_scenario(args.scenario);
  ContextOptions co = context_options(args);
  co.skip_rom = true;
  ScenarioContext ctx = build_context(s, co);
  const fs::path dir = ensure_dir(args.out);
  Manifest m = start_manifest(ctx.scenario, "rom eval");

  RomOperator rom = read_rom(rom_file, *ctx.grid);
  require(rom.numMeasurements() == ctx.forward->rows(),
          "rom eval: ROM does not match the scenario candidate set");
  std::mt19937_64 rng(ctx.scenario.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0, sum = 0.0;
  for (int p = 0; p < probes; ++p) {
    Vector x(ctx.forward->cols());
    for (Index i = 0; i < x.size(); ++i) x(i) = normal(rng);
    Vector m_in = rom.preconditioned
                      ? Vector(ctx.prior->solveA(Vector(ctx.prior->massDiag().cwiseProduct(x))))
                      : x;
    Vector exact = ctx.forward->apply(m_in);
    Vector approx = rom.preconditioned ? rom.apply(x) : rom.apply(m_in);
    const double rel = (exact - approx).norm() / std::max(exact.norm(), 1e-300);
    worst = std::max(worst, rel);
    sum += rel;
  }
  m.notes.emplace_back("probes", std::to_string(probes));
  m.notes.emplace_back("max_rel_error", std::to_string(worst));
  m.notes.emplace_back("mean_rel_error", std::to_string(sum / probes));
  std::cout << "rom eval: max relative error " << worst << " over " << probes << " probes\n";
  finish(dir, m);
  return 0;
}

int cmd_steer(const CommonArgs& args, bool no_mobile) {
  Scenario s = parse_scenario(args.scenario);
  require(s.experiment == "steer", "steer: scenario experiment must be 'steer'");
  ContextOptions co = context_options(args);
  co.force_rom = true;
  ScenarioContext ctx = build_context(s, co);
  const fs::path dir = ensure_dir(args.out);
  Manifest m = start_manifest(ctx.scenario, no_mobile ? "steer --no-mobile" : "steer");

  SteeringConfig cfg = ctx.scenario.steer;
  cfg.mobile_enabled = !no_mobile;
  SteeringSetup setup =
      make_steering_setup(*ctx.grid, *ctx.transport, *ctx.prior, *ctx.rom, *ctx.candidates,
                          ctx.num_stationary, ctx.mobile, ctx.truth, cfg);
  SteeringRun run = run_steering(setup, cfg);

  write_trajectory_csv(dir / "trajectory.csv", run.state.trajectory);
  write_metrics_csv(dir / "metrics.csv", run.metrics);
  m.artifacts.push_back("trajectory.csv");
  m.artifacts.push_back("metrics.csv");
  if (run.state.mmap.size() == ctx.grid->numActive()) {
    write_field(dir / "m_map.field", ScalarField(*ctx.grid, run.state.mmap, cfg.t_end));
    m.artifacts.push_back("m_map.field");
  }
  m.notes.emplace_back("operators", "rom");
  m.notes.emplace_back("cycles", std::to_string(run.metrics.size()));
  if (!run.metrics.empty()) {
    m.notes.emplace_back("final_l2_error", std::to_string(run.metrics.back().l2_error));
    m.notes.emplace_back("final_dist_to_source",
                         std::to_string(run.metrics.back().dist_to_source));
  }
  finish(dir, m);
  return 0;
}

int cmd_variance(const CommonArgs& args, int probes, bool exact) {
  Scenario s = parse_scenario(args.scenario);
  ScenarioContext ctx = build_context(s, context_options(args));
  const fs::path dir = ensure_dir(args.out);
  Manifest m = start_manifest(ctx.scenario, "variance");

  const Index q = ctx.candidates->numWeights();
  DesignProblem dp;
  dp.candidates = ctx.candidates.get();
  dp.goal = scenario_goal(ctx);
  dp.sigma = ctx.scenario.sigma;
  dp.rank = ctx.scenario.design_rank;
  WeightPattern pattern = weight_pattern(*ctx.candidates);

  LowRankPosterior lr = [&] {
    if (ctx.rom) {
      TraceEvaluator ev(dp, *ctx.rom, *ctx.prior, pattern);
      return ev.posterior(Vector::Ones(q));
    }
    LowRankOptions lo;
    lo.seed = ctx.scenario.seed;
    TraceEvaluator ev(dp, *ctx.forward, *ctx.prior, pattern, lo);
    return ev.posterior(Vector::Ones(q));
  }();

  ScalarField var = exact ? pointwise_variance_exact(lr)
                          : pointwise_variance(lr, probes, ctx.scenario.seed);
  write_field(dir / "variance.field", var);
  m.artifacts.push_back("variance.field");
  m.notes.emplace_back("estimator", exact ? "exact" : "hutchinson");
  m.notes.emplace_back("retained_rank", std::to_string(lr.rank()));
  finish(dir, m);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"goal-oriented sensor placement and steering for contaminant source inversion"};
  app.require_subcommand(1);

  CommonArgs fwd_args;
  auto* fwd = app.add_subcommand("forward", "run the truth forward model, write snapshots");
  add_common(fwd, fwd_args);

  CommonArgs inv_args;
  bool inv_rom = false;
  auto* inv = app.add_subcommand("invert", "MAP reconstruction from simulated measurements");
  add_common(inv, inv_args);
  inv->add_flag("--rom", inv_rom, "use the reduced-order operators");

  CommonArgs oed_args;
  bool oed_rom = false;
  double oed_alpha = -1.0, oed_threshold = -1.0;
  Index oed_rank = 0;
  auto* oed = app.add_subcommand("oed", "C-optimal sparse sensor design");
  add_common(oed, oed_args);
  oed->add_flag("--rom", oed_rom, "force reduced-order evaluations");
  oed->add_option("--alpha", oed_alpha, "l1 weight override");
  oed->add_option("--rank", oed_rank, "low-rank budget override");
  oed->add_option("--threshold", oed_threshold, "binarization threshold override");

  auto* rom_cmd = app.add_subcommand("rom", "reduced-order model tools");
  rom_cmd->require_subcommand(1);
  CommonArgs romb_args;
  Index romb_rank = 0;
  bool romb_precond = true;
  std::string romb_out;
  auto* romb = rom_cmd->add_subcommand("build", "build and persist ROM factors");
  add_common(romb, romb_args);
  romb->add_option("--rank", romb_rank, "rank override");
  romb->add_flag("--precond,!--no-precond", romb_precond, "factor the preconditioned operator");
  romb->add_option("--file", romb_out, "artifact file name");
  CommonArgs rome_args;
  std::string rome_file;
  int rome_probes = 20;
  auto* rome = rom_cmd->add_subcommand("eval", "compare a ROM against the full operator");
  add_common(rome, rome_args);
  rome->add_option("--rom-file", rome_file, "ROM artifact")->required();
  rome->add_option("--probes", rome_probes, "number of random probes");

  CommonArgs steer_args;
  bool no_mobile = false;
  auto* steer = app.add_subcommand("steer", "closed-loop mobile sensor steering");
  add_common(steer, steer_args);
  steer->add_flag("--no-mobile", no_mobile, "stationary sensors only");

  CommonArgs var_args;
  int var_probes = 200;
  bool var_exact = false;
  auto* var = app.add_subcommand("variance", "pointwise posterior variance field");
  add_common(var, var_args);
  var->add_option("--probes", var_probes, "Hutchinson probe count");
  var->add_flag("--exact", var_exact, "exact diagonal (one solve per dof)");

  std::string render_in, render_out;
  auto* render = app.add_subcommand("render", "rasterize a field file to PPM");
  render->add_option("--in", render_in, "field file")->required();
  render->add_option("--out", render_out, "output image")->required();

  try {
    app.parse(argc, argv);
    if (fwd->parsed()) return cmd_forward(fwd_args);
    if (inv->parsed()) return cmd_invert(inv_args, inv_rom);
    if (oed->parsed()) return cmd_oed(oed_args, oed_rom, oed_alpha, oed_rank, oed_threshold);
    if (romb->parsed()) return cmd_rom_build(romb_args, romb_rank, romb_precond, romb_out);
    if (rome->parsed()) return cmd_rom_eval(rome_args, rome_file, rome_probes);
    if (steer->parsed()) return cmd_steer(steer_args, no_mobile);
    if (var->parsed()) return cmd_variance(var_args, var_probes, var_exact);
    if (render->parsed()) {
      render_field_ppm(render_in, render_out);
      std::cout << "wrote " << render_out << "\n";
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace oedsteer
