#include "oedsteer/steering.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <random>

namespace oedsteer {

std::vector<Index> MobileGrid::admissibleMoves(Index node, int neighborhood) const {
  const int i = gi[static_cast<size_t>(node)];
  const int j = gj[static_cast<size_t>(node)];
  std::vector<Index> moves;
  for (int dj = -1; dj <= 1; ++dj)
    for (int di = -1; di <= 1; ++di) {
      if (neighborhood == 4 && di != 0 && dj != 0) continue;
      const Index nb = nodeAt(i + di, j + dj);
      if (nb >= 0) moves.push_back(nb);
    }
  std::sort(moves.begin(), moves.end());
  return moves;
}

MobileGrid make_mobile_grid(const Grid& grid, int lat_nx, int lat_ny, double margin) {
  require(lat_nx >= 2 && lat_ny >= 2, "make_mobile_grid: lattice too small");
  MobileGrid mg;
  mg.lat_nx = lat_nx;
  mg.lat_ny = lat_ny;
  mg.node_of.assign(static_cast<size_t>(lat_nx) * lat_ny, -1);
  const double x_lo = grid.x0() + margin, x_hi = grid.x0() + grid.width() - margin;
  const double y_lo = grid.y0() + margin, y_hi = grid.y0() + grid.height() - margin;
  require(x_hi > x_lo && y_hi > y_lo, "make_mobile_grid: margin leaves no room");
  for (int j = 0; j < lat_ny; ++j)
    for (int i = 0; i < lat_nx; ++i) {
      const double x = x_lo + (x_hi - x_lo) * i / (lat_nx - 1);
      const double y = y_lo + (y_hi - y_lo) * j / (lat_ny - 1);
      auto [ci, cj] = grid.cellAt(x, y);
      if (grid.isSolid(ci, cj)) continue;
      mg.node_of[static_cast<size_t>(j) * lat_nx + i] = mg.numNodes();
      mg.xs.push_back(grid.centerX(ci));
      mg.ys.push_back(grid.centerY(cj));
      mg.gi.push_back(i);
      mg.gj.push_back(j);
    }
  require(mg.numNodes() > 0, "make_mobile_grid: every lattice node is inside an obstacle");
  return mg;
}

SteeringSetup make_steering_setup(const Grid& grid, const TransportOperator& transport,
                                  const BiLaplacianPrior& prior, const RomOperator& rom,
                                  const CandidateSet& lattice, Index num_stationary,
                                  MobileGrid mobile, const ScalarField& truth,
                                  const SteeringConfig& cfg) {
  require(rom.preconditioned, "make_steering_setup: steering needs the preconditioned ROM");
  require(lattice.numPositions() == num_stationary + mobile.numNodes(),
          "make_steering_setup: lattice layout mismatch");
  SteeringSetup s;
  s.grid = &grid;
  s.transport = &transport;
  s.prior = &prior;
  s.rom = &rom;
  s.lattice = &lattice;
  s.num_stationary = num_stationary;
  s.mobile = std::move(mobile);
  s.truth = truth.values;

  ForwardMap fwd(transport, lattice);
  Observations obs = simulate_measurements(truth, fwd, cfg.sigma, cfg.seed);
  s.noisy_data = obs.d;
  return s;
}

SteeringState init_steering_state(const SteeringSetup& setup, const SteeringConfig& cfg) {
  SteeringState st;
  st.t_step = cfg.t0;
  st.realized.assign(static_cast<size_t>(setup.lattice->numMeasurements()), 0);
  st.mmap = Vector::Zero(setup.grid->numActive());

  Index best = 0;
  double best_d2 = std::numeric_limits<double>::max();
  for (Index n = 0; n < setup.mobile.numNodes(); ++n) {
    const double dx = setup.mobile.xs[static_cast<size_t>(n)] - cfg.start_x;
    const double dy = setup.mobile.ys[static_cast<size_t>(n)] - cfg.start_y;
    if (dx * dx + dy * dy < best_d2) {
      best_d2 = dx * dx + dy * dy;
      best = n;
    }
  }
  st.mobile_node = best;
  st.trajectory.push_back({cfg.t0, setup.mobile.xs[static_cast<size_t>(best)],
                           setup.mobile.ys[static_cast<size_t>(best)]});
  return st;
}

namespace {

Index lattice_time_index(const CandidateSet& cs, double t) {
  for (Index k = 0; k < cs.numTimes(); ++k)
    if (std::abs(cs.time(k) - t) < 1e-9) return k;
  return -1;
}

RegionRect recentered_square(const Grid& grid, double cx, double cy, double side) {
  RegionRect r;
  r.xmin = std::max(cx - 0.5 * side, grid.x0());
  r.xmax = std::min(cx + 0.5 * side, grid.x0() + grid.width());
  r.ymin = std::max(cy - 0.5 * side, grid.y0());
  r.ymax = std::min(cy + 0.5 * side, grid.y0() + grid.height());
  return r;
}

}  // namespace

SteeringState steering_cycle(SteeringState state, const SteeringConfig& cfg,
                             const SteeringSetup& setup) {
  const CandidateSet& cs = *setup.lattice;
  CycleRecord rec;
  rec.cycle = static_cast<int>(state.records.size());
  rec.t = state.t_step;

  try {
    // (1) Measurements for the current time at stationary sensors and the
    // mobile sensor's current position.
    const Index kt = lattice_time_index(cs, state.t_step);
    require(kt >= 0, "steering_cycle: current time is off the observation lattice");
    for (Index p = 0; p < setup.num_stationary; ++p)
      state.realized[static_cast<size_t>(cs.measurementIndex(kt, p))] = 1;
    if (cfg.mobile_enabled)
      state.realized[static_cast<size_t>(
          cs.measurementIndex(kt, setup.num_stationary + state.mobile_node))] = 1;

    // (2) Invert with weight 1 on every realized space-time point.
    Vector w_realized = Vector::Zero(cs.numMeasurements());
    for (Index j = 0; j < cs.numMeasurements(); ++j)
      if (state.realized[static_cast<size_t>(j)]) w_realized(j) = 1.0;
    state.mmap = rom_solve_map(*setup.rom, *setup.prior, w_realized, setup.noisy_data, cfg.sigma);

    // (3) Recenter the goal square at the MAP maximum.
    ScalarField mmap_field(*setup.grid, state.mmap);
    auto [mi, mj] = setup.grid->cellOf(mmap_field.argmax());
    const RegionRect square = recentered_square(*setup.grid, setup.grid->centerX(mi),
                                                setup.grid->centerY(mj), cfg.qoi_side);

    // (4) C-optimal design over the lookahead window.
    const double t_max = cs.time(cs.numTimes() - 1);
    const double window_end = std::min(state.t_step + cfg.lookahead, t_max);
    std::vector<Index> window_times;
    for (Index k = 0; k < cs.numTimes(); ++k)
      if (cs.time(k) > state.t_step + 1e-9 && cs.time(k) <= window_end + 1e-9)
        window_times.push_back(k);

    double goal_variance = 0.0;
    if (cfg.mobile_enabled && !window_times.empty()) {
      QoiSpec qoi{square, state.t_step, window_end};
      GoalVector goal = goal_vector_spacetime(qoi, *setup.transport);

      WeightPattern pattern;
      pattern.base = Vector::Zero(cs.numMeasurements());
      for (Index j = 0; j < cs.numMeasurements(); ++j)
        if (state.realized[static_cast<size_t>(j)]) pattern.base(j) = 1.0;
      for (Index k : window_times)
        for (Index p = 0; p < setup.num_stationary; ++p)
          pattern.base(cs.measurementIndex(k, p)) = 1.0;  // stationary keeps measuring
      pattern.slots.resize(static_cast<size_t>(setup.mobile.numNodes()));
      for (Index s = 0; s < setup.mobile.numNodes(); ++s)
        for (Index k : window_times)
          pattern.slots[static_cast<size_t>(s)].push_back(
              cs.measurementIndex(k, setup.num_stationary + s));

      DesignProblem dp;
      dp.candidates = &cs;
      dp.goal = goal;
      dp.alpha = cfg.alpha;
      dp.sigma = cfg.sigma;
      dp.rank = setup.rom->rank();
      TraceEvaluator evaluator(dp, *setup.rom, *setup.prior, pattern);

      OptimizeOptions oo;
      oo.maxiter = cfg.design_maxiter;
      OptimizeResult res =
          optimize_design(evaluator, Vector::Constant(setup.mobile.numNodes(), 0.5), oo);
      goal_variance = evaluator.dataTerm(res.w);

      // (5) Move to the admissible neighbor with the highest weight.
      const auto moves = setup.mobile.admissibleMoves(state.mobile_node, cfg.neighborhood);
      Index best = moves.front();
      for (Index nb : moves)
        if (res.w(nb) > res.w(best)) best = nb;
      state.mobile_node = best;
    } else if (!window_times.empty()) {
      // Stationary-only runs still report the goal variance of the realized set.
      QoiSpec qoi{square, state.t_step, window_end};
      GoalVector goal = goal_vector_spacetime(qoi, *setup.transport);
      WeightPattern pattern;
      pattern.base = Vector::Zero(cs.numMeasurements());
      for (Index j = 0; j < cs.numMeasurements(); ++j)
        if (state.realized[static_cast<size_t>(j)]) pattern.base(j) = 1.0;
      for (Index k : window_times)
        for (Index p = 0; p < setup.num_stationary; ++p)
          pattern.base(cs.measurementIndex(k, p)) = 1.0;
      pattern.slots.clear();
      DesignProblem dp;
      dp.candidates = &cs;
      dp.goal = goal;
      dp.alpha = cfg.alpha;
      dp.sigma = cfg.sigma;
      dp.rank = setup.rom->rank();
      TraceEvaluator evaluator(dp, *setup.rom, *setup.prior, pattern);
      goal_variance = evaluator.dataTerm(Vector(0));
    }

    // (6) Bookkeeping and advance.
    rec.goal_variance = goal_variance;
    rec.l2_error = std::sqrt((state.mmap - setup.truth).squaredNorm() * setup.grid->cellArea());
    ScalarField truth_field(*setup.grid, setup.truth);
    auto [ti, tj] = setup.grid->cellOf(truth_field.argmax());
    const double px = setup.mobile.xs[static_cast<size_t>(state.mobile_node)];
    const double py = setup.mobile.ys[static_cast<size_t>(state.mobile_node)];
    rec.dist_to_source = std::hypot(px - setup.grid->centerX(ti), py - setup.grid->centerY(tj));
    state.t_step += cfg.dt_obs;
    state.trajectory.push_back({state.t_step, px, py});
  } catch (const std::exception&) {
    rec.flagged = true;
    state.t_step += cfg.dt_obs;
  }
  state.records.push_back(rec);
  return state;
}

SteeringRun run_steering(const SteeringSetup& setup, const SteeringConfig& cfg) {
  SteeringRun run;
  run.state = init_steering_state(setup, cfg);
  while (run.state.t_step < cfg.t_end - 1e-9)
    run.state = steering_cycle(std::move(run.state), cfg, setup);
  run.metrics = run.state.records;
  return run;
}

}  // namespace oedsteer
