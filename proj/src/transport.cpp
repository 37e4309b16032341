#include "oedsteer/transport.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace oedsteer {

TransportOperator::TransportOperator(const Grid& grid, const WindField& wind,
                                     const TransportConfig& cfg)
    : grid_(&grid), wind_(&wind), cfg_(cfg) {
  require(cfg.kappa > 0.0, "TransportOperator: kappa must be positive");
  require(cfg.dt > 0.0 && cfg.dt <= cfg.T, "TransportOperator: need 0 < dt <= T");
  const double steps = cfg.T / cfg.dt;
  n_steps_ = static_cast<int>(std::llround(steps));
  require(std::abs(steps - n_steps_) < 1e-9 * std::max(1.0, steps),
          "TransportOperator: T must be an integer multiple of dt");

  const Index n = grid.numActive();
  const double area = grid.cellArea();
  const double vtol = 1e-12 * std::max(1.0, wind.maxSpeed());
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(5 * n));

  struct Face {
    int di, dj;      // neighbor offset
    double len;      // face length
    double dist;     // cell-center distance across the face
  };
  for (Index a = 0; a < n; ++a) {
    auto [i, j] = grid.cellOf(a);
    const Face faces[4] = {{1, 0, grid.dy(), grid.dx()},
                           {-1, 0, grid.dy(), grid.dx()},
                           {0, 1, grid.dx(), grid.dy()},
                           {0, -1, grid.dx(), grid.dy()}};
    double diag = 0.0;
    for (const Face& f : faces) {
      // Outward normal velocity on this face.
      double vn;
      if (f.di == 1) vn = wind.u(i + 1, j);
      else if (f.di == -1) vn = -wind.u(i, j);
      else if (f.dj == 1) vn = wind.v(i, j + 1);
      else vn = -wind.v(i, j);

      const int ni = i + f.di, nj = j + f.dj;
      if (grid.inBounds(ni, nj)) {
        if (grid.isSolid(ni, nj)) continue;  // obstacle: no advective or diffusive flux
        const Index b = grid.activeIndex(ni, nj);
        double coef_c = cfg.kappa * f.len / f.dist;
        double coef_nb = -cfg.kappa * f.len / f.dist;
        if (vn > 0.0) coef_c += f.len * vn;
        else coef_nb += f.len * vn;
        diag += coef_c;
        trips.emplace_back(a, b, cfg.dt / area * coef_nb);
      } else {
        if (vn < -vtol) diag += 2.0 * cfg.kappa * f.len / f.dist;  // inflow: Dirichlet 0
        else if (vn > vtol) diag += f.len * vn;                    // outflow: upwind advection
        // tangential: no flux
      }
    }
    trips.emplace_back(a, a, 1.0 + cfg.dt / area * diag);
  }

  S_.resize(n, n);
  S_.setFromTriplets(trips.begin(), trips.end());
  S_.makeCompressed();
  St_ = S_.transpose();
  lu_.compute(S_);
  require(lu_.info() == Eigen::Success, "TransportOperator: step matrix factorization failed");
  lut_.compute(St_);
  require(lut_.info() == Eigen::Success, "TransportOperator: transpose factorization failed");
}

Vector TransportOperator::stepForward(const Vector& u) const { return lu_.solve(u); }
Matrix TransportOperator::stepForward(const Matrix& U) const { return lu_.solve(U); }
Vector TransportOperator::stepTranspose(const Vector& p) const { return lut_.solve(p); }
Matrix TransportOperator::stepTranspose(const Matrix& P) const { return lut_.solve(P); }

CandidateSet::CandidateSet(const Grid& grid, const TransportConfig& cfg, std::vector<double> xs,
                           std::vector<double> ys, std::vector<double> times, DesignMode mode)
    : grid_(&grid), mode_(mode) {
  require(xs.size() == ys.size(), "CandidateSet: coordinate list size mismatch");
  require(!xs.empty() && !times.empty(), "CandidateSet: need at least one position and time");
  for (size_t p = 0; p < xs.size(); ++p) {
    auto [i, j] = grid.cellAt(xs[p], ys[p]);
    require(!grid.isSolid(i, j), "CandidateSet: candidate position inside an obstacle");
    pos_cells_.push_back(grid.activeIndex(i, j));
    xs_.push_back(grid.centerX(i));
    ys_.push_back(grid.centerY(j));
  }
  const int n_steps = static_cast<int>(std::llround(cfg.T / cfg.dt));
  std::sort(times.begin(), times.end());
  for (double t : times) {
    const int k = static_cast<int>(std::llround(t / cfg.dt));
    require(std::abs(t - k * cfg.dt) < 1e-9 * std::max(1.0, cfg.T),
            "CandidateSet: observation time off the time grid");
    require(k >= 1 && k <= n_steps, "CandidateSet: observation time outside (0, T]");
    time_steps_.push_back(k);
    times_.push_back(k * cfg.dt);
  }
}

Vector CandidateSet::expandWeights(const Vector& w) const {
  require(w.size() == numWeights(), "expandWeights: weight vector size mismatch");
  if (mode_ == DesignMode::SpaceTime) return w;
  Vector out(numMeasurements());
  for (Index k = 0; k < numTimes(); ++k)
    out.segment(k * numPositions(), numPositions()) = w;
  return out;
}

Vector CandidateSet::reduceToWeights(const Vector& per_measurement) const {
  require(per_measurement.size() == numMeasurements(), "reduceToWeights: size mismatch");
  if (mode_ == DesignMode::SpaceTime) return per_measurement;
  Vector out = Vector::Zero(numPositions());
  for (Index k = 0; k < numTimes(); ++k)
    out += per_measurement.segment(k * numPositions(), numPositions());
  return out;
}

ForwardMap::ForwardMap(const TransportOperator& transport, const CandidateSet& candidates)
    : transport_(&transport), candidates_(&candidates) {
  steps_to_obs_.assign(static_cast<size_t>(transport.numSteps()) + 1, {});
  for (Index k = 0; k < candidates.numTimes(); ++k) {
    const int step = candidates.timeStep(k);
    require(step <= transport.numSteps(), "ForwardMap: observation time beyond final time");
    steps_to_obs_[static_cast<size_t>(step)].push_back(k);
    last_obs_step_ = std::max(last_obs_step_, step);
  }
}

Vector ForwardMap::apply(const Vector& m) const {
  require(m.size() == cols(), "ForwardMap::apply: dimension mismatch");
  const Index P = candidates_->numPositions();
  Vector out(rows());
  Vector u = m;
  for (int step = 1; step <= last_obs_step_; ++step) {
    u = transport_->stepForward(u);
    for (Index k : steps_to_obs_[static_cast<size_t>(step)])
      for (Index p = 0; p < P; ++p)
        out(candidates_->measurementIndex(k, p)) = u(candidates_->positionCell(p));
  }
  return out;
}

Matrix ForwardMap::applyBlock(const Matrix& M) const {
  require(M.rows() == cols(), "ForwardMap::applyBlock: dimension mismatch");
  const Index P = candidates_->numPositions();
  Matrix out(rows(), M.cols());
  Matrix U = M;
  for (int step = 1; step <= last_obs_step_; ++step) {
    U = transport_->stepForward(U);
    for (Index k : steps_to_obs_[static_cast<size_t>(step)])
      for (Index p = 0; p < P; ++p)
        out.row(candidates_->measurementIndex(k, p)) = U.row(candidates_->positionCell(p));
  }
  return out;
}

Vector ForwardMap::applyAdjoint(const Vector& y) const {
  require(y.size() == rows(), "ForwardMap::applyAdjoint: dimension mismatch");
  const Index P = candidates_->numPositions();
  Vector acc = Vector::Zero(cols());
  for (int step = last_obs_step_; step >= 1; --step) {
    for (Index k : steps_to_obs_[static_cast<size_t>(step)])
      for (Index p = 0; p < P; ++p)
        acc(candidates_->positionCell(p)) += y(candidates_->measurementIndex(k, p));
    acc = transport_->stepTranspose(acc);
  }
  return acc / transport_->grid().cellArea();  // M^{-1} F' y
}

Matrix ForwardMap::applyAdjointBlock(const Matrix& Y) const {
  require(Y.rows() == rows(), "ForwardMap::applyAdjointBlock: dimension mismatch");
  const Index P = candidates_->numPositions();
  Matrix acc = Matrix::Zero(cols(), Y.cols());
  for (int step = last_obs_step_; step >= 1; --step) {
    for (Index k : steps_to_obs_[static_cast<size_t>(step)])
      for (Index p = 0; p < P; ++p)
        acc.row(candidates_->positionCell(p)) += Y.row(candidates_->measurementIndex(k, p));
    acc = transport_->stepTranspose(acc);
  }
  return acc / transport_->grid().cellArea();
}

LinearMap ForwardMap::asLinearMap() const {
  LinearMap map(rows(), cols(), [this](const Vector& m) { return apply(m); },
                [this](const Vector& y) { return applyAdjoint(y); });
  map.setBlockApply([this](const Matrix& M) { return applyBlock(M); },
                    [this](const Matrix& Y) { return applyAdjointBlock(Y); });
  return map;
}

ForwardSolution solve_forward(const ScalarField& m, const TransportOperator& transport,
                              const CandidateSet& candidates, int snapshot_stride) {
  require(m.grid == &transport.grid(), "solve_forward: field grid mismatch");
  ForwardMap fwd(transport, candidates);
  ForwardSolution sol;
  sol.observations.resize(fwd.rows());

  const Index P = candidates.numPositions();
  std::vector<std::vector<Index>> at_step(static_cast<size_t>(transport.numSteps()) + 1);
  for (Index k = 0; k < candidates.numTimes(); ++k)
    at_step[static_cast<size_t>(candidates.timeStep(k))].push_back(k);

  Vector u = m.values;
  if (snapshot_stride > 0) sol.snapshots.emplace_back(transport.grid(), u, 0.0);
  for (int step = 1; step <= transport.numSteps(); ++step) {
    u = transport.stepForward(u);
    const double t = step * transport.config().dt;
    for (Index k : at_step[static_cast<size_t>(step)])
      for (Index p = 0; p < P; ++p)
        sol.observations(candidates.measurementIndex(k, p)) = u(candidates.positionCell(p));
    if (snapshot_stride > 0 && (step % snapshot_stride == 0 || step == transport.numSteps()))
      sol.snapshots.emplace_back(transport.grid(), u, t);
  }
  return sol;
}

Observations simulate_measurements(const ScalarField& truth, const ForwardMap& fwd, double sigma,
                                   std::uint64_t seed) {
  require(sigma >= 0.0, "simulate_measurements: sigma must be non-negative");
  Observations obs;
  obs.candidates = &fwd.candidates();
  obs.sigma = sigma;
  obs.d = fwd.apply(truth.values);
  if (sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < obs.d.size(); ++i) obs.d(i) += sigma * normal(rng);
  }
  return obs;
}

}  // namespace oedsteer
