#pragma once

/// Closed-loop sensor steering: ingest measurements, invert, recenter the
/// goal region at the MAP maximum, compute a C-optimal design over a
/// lookahead window, and move the mobile sensor one lattice step toward the
/// highest-weight position.

#include <array>
#include <optional>

#include "oedsteer/oed.hpp"

namespace oedsteer {

struct SteeringConfig {
  double t0 = 2.0;          // first measurement time [s]
  double t_end = 7.0;       // loop stop time [s]
  double dt_obs = 0.2;      // measurement period [s]
  double lookahead = 2.0;   // design horizon [s]
  double qoi_side = 40.0;   // recentered goal square side [m]
  double start_x = 0.0;     // mobile start position
  double start_y = 0.0;
  bool mobile_enabled = true;
  int neighborhood = 8;     // 4 or 8 admissible moves per cycle
  double alpha = 1e-4;      // l1 weight for the per-cycle design
  int design_maxiter = 60;
  double sigma = 0.005;
  std::uint64_t seed = 0;
};

/// Admissible mobile positions: a lattice snapped to fluid cells, with the
/// lattice structure kept for neighbor queries.
struct MobileGrid {
  std::vector<double> xs, ys;      // per admissible node
  std::vector<int> gi, gj;         // lattice coordinates per node
  std::vector<Index> node_of;      // lattice (gi, gj) -> node index or -1
  int lat_nx = 0, lat_ny = 0;

  Index numNodes() const { return static_cast<Index>(xs.size()); }
  Index nodeAt(int i, int j) const {
    if (i < 0 || i >= lat_nx || j < 0 || j >= lat_ny) return -1;
    return node_of[static_cast<size_t>(j) * lat_nx + i];
  }
  /// Neighbors of `node` (including the node itself) under 4- or
  /// 8-adjacency, ascending by node index.
  std::vector<Index> admissibleMoves(Index node, int neighborhood) const;
};

MobileGrid make_mobile_grid(const Grid& grid, int lat_nx, int lat_ny, double margin);

struct CycleRecord {
  int cycle = 0;
  double t = 0.0;
  double l2_error = 0.0;        // ||m_map - m_true||_M
  double dist_to_source = 0.0;  // mobile position to the truth maximum
  double goal_variance = 0.0;   // data term of the designed objective
  bool flagged = false;         // cycle failed and left the state unchanged
};

struct SteeringState {
  double t_step = 0.0;
  Index mobile_node = 0;
  std::vector<std::array<double, 3>> trajectory;  // (t, x, y) of the mobile sensor
  std::vector<std::uint8_t> realized;              // per lattice measurement slot
  Vector mmap;                                     // latest MAP estimate
  std::vector<CycleRecord> records;
};

/// Everything a steering run needs; the candidate lattice covers stationary
/// sensors first, then the mobile nodes, over the full observation times.
struct SteeringSetup {
  const Grid* grid = nullptr;
  const TransportOperator* transport = nullptr;
  const BiLaplacianPrior* prior = nullptr;
  const RomOperator* rom = nullptr;  // preconditioned; required
  const CandidateSet* lattice = nullptr;
  Index num_stationary = 0;
  MobileGrid mobile;
  Vector truth;        // true initial condition (measurement simulator input)
  Vector noisy_data;   // per lattice slot, truth readings + noise
};

SteeringSetup make_steering_setup(const Grid& grid, const TransportOperator& transport,
                                  const BiLaplacianPrior& prior, const RomOperator& rom,
                                  const CandidateSet& lattice, Index num_stationary,
                                  MobileGrid mobile, const ScalarField& truth,
                                  const SteeringConfig& cfg);

SteeringState init_steering_state(const SteeringSetup& setup, const SteeringConfig& cfg);

/// One loop iteration: measure at the current time, invert, recenter the goal
/// square at the MAP maximum, design over the lookahead window, move.
SteeringState steering_cycle(SteeringState state, const SteeringConfig& cfg,
                             const SteeringSetup& setup);

struct SteeringRun {
  SteeringState state;
  std::vector<CycleRecord> metrics;
};

SteeringRun run_steering(const SteeringSetup& setup, const SteeringConfig& cfg);

}  // namespace oedsteer
