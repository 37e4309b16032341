#pragma once

/// Advection-diffusion transport: implicit Euler time stepping with
/// first-order upwind fluxes, space-time observation candidates, and the
/// discrete parameter-to-observable map with its exact transpose.

#include <Eigen/SparseLU>

#include <memory>
#include <vector>

#include "oedsteer/field.hpp"
#include "oedsteer/linalg.hpp"

namespace oedsteer {

struct TransportConfig {
  double kappa = 1.0;  // diffusivity [m^2/s]
  double dt = 0.05;    // time step [s]
  double T = 12.0;     // final time [s]
};

/// Assembled implicit-Euler step operator (I + dt L) with cached sparse LU
/// factorizations of the system and its transpose. Boundary conditions follow
/// the face-wise wind direction: inflow faces are homogeneous Dirichlet,
/// outflow faces advect with the upwind cell value, tangential and obstacle
/// faces are no-flux.
class TransportOperator {
 public:
  TransportOperator(const Grid& grid, const WindField& wind, const TransportConfig& cfg);

  const Grid& grid() const { return *grid_; }
  const WindField& wind() const { return *wind_; }
  const TransportConfig& config() const { return cfg_; }
  int numSteps() const { return n_steps_; }
  const SparseMatrix& systemMatrix() const { return S_; }

  Vector stepForward(const Vector& u) const;          // solve (I + dt L) u_next = u
  Matrix stepForward(const Matrix& U) const;
  Vector stepTranspose(const Vector& p) const;        // solve (I + dt L)' p_prev = p
  Matrix stepTranspose(const Matrix& P) const;

 private:
  const Grid* grid_;
  const WindField* wind_;
  TransportConfig cfg_;
  int n_steps_;
  SparseMatrix S_, St_;
  Eigen::SparseLU<SparseMatrix> lu_, lut_;
};

enum class DesignMode { StationaryGrid, SpaceTime };

/// Space-time measurement candidates: positions snapped to fluid cell centers
/// and times snapped to time-grid points. Measurements are ordered time-major:
/// index = time_index * numPositions() + position_index.
class CandidateSet {
 public:
  CandidateSet(const Grid& grid, const TransportConfig& cfg, std::vector<double> xs,
               std::vector<double> ys, std::vector<double> times, DesignMode mode);

  const Grid& grid() const { return *grid_; }
  DesignMode mode() const { return mode_; }
  Index numPositions() const { return static_cast<Index>(pos_cells_.size()); }
  Index numTimes() const { return static_cast<Index>(time_steps_.size()); }
  Index numMeasurements() const { return numPositions() * numTimes(); }
  Index numWeights() const {
    return mode_ == DesignMode::StationaryGrid ? numPositions() : numMeasurements();
  }

  Index positionCell(Index p) const { return pos_cells_[static_cast<size_t>(p)]; }
  double positionX(Index p) const { return xs_[static_cast<size_t>(p)]; }
  double positionY(Index p) const { return ys_[static_cast<size_t>(p)]; }
  int timeStep(Index k) const { return time_steps_[static_cast<size_t>(k)]; }
  double time(Index k) const { return times_[static_cast<size_t>(k)]; }

  Index measurementIndex(Index time_idx, Index pos_idx) const {
    return time_idx * numPositions() + pos_idx;
  }
  Index positionOf(Index measurement) const { return measurement % numPositions(); }
  Index timeIndexOf(Index measurement) const { return measurement / numPositions(); }

  /// Broadcast design weights to one entry per measurement.
  Vector expandWeights(const Vector& w) const;
  /// Adjoint of expandWeights: sum per-measurement values into weight slots.
  Vector reduceToWeights(const Vector& per_measurement) const;

 private:
  const Grid* grid_;
  DesignMode mode_;
  std::vector<Index> pos_cells_;
  std::vector<double> xs_, ys_;
  std::vector<int> time_steps_;
  std::vector<double> times_;
};

struct Observations {
  const CandidateSet* candidates = nullptr;
  Vector d;
  double sigma = 0.0;
};

/// Linear parameter-to-observable map F: initial condition -> readings at all
/// candidate space-time points, with the exact discrete adjoint in the
/// mass-weighted inner product: <F m, y> = <m, F* y>_M.
class ForwardMap {
 public:
  ForwardMap(const TransportOperator& transport, const CandidateSet& candidates);

  Index rows() const { return candidates_->numMeasurements(); }
  Index cols() const { return transport_->grid().numActive(); }
  const CandidateSet& candidates() const { return *candidates_; }
  const TransportOperator& transport() const { return *transport_; }

  Vector apply(const Vector& m) const;
  Matrix applyBlock(const Matrix& M) const;
  Vector applyAdjoint(const Vector& y) const;
  Matrix applyAdjointBlock(const Matrix& Y) const;

  LinearMap asLinearMap() const;

 private:
  const TransportOperator* transport_;
  const CandidateSet* candidates_;
  std::vector<std::vector<Index>> steps_to_obs_;  // per time step, candidate time indices
  int last_obs_step_ = 0;
};

/// Forward run from an initial condition, returning snapshots every
/// `snapshot_stride` steps (0 disables snapshots) and candidate readings.
struct ForwardSolution {
  std::vector<ScalarField> snapshots;
  Vector observations;
};
ForwardSolution solve_forward(const ScalarField& m, const TransportOperator& transport,
                              const CandidateSet& candidates, int snapshot_stride = 0);

/// Noisy synthetic data d = F(truth) + sigma * xi with seeded Gaussian noise.
Observations simulate_measurements(const ScalarField& truth, const ForwardMap& fwd, double sigma,
                                   std::uint64_t seed);

}  // namespace oedsteer
