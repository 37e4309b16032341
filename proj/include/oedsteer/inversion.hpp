#pragma once

/// Design-weighted Gauss-Newton machinery: Hessian actions, MAP estimation,
/// the low-rank posterior obtained from the prior-preconditioned misfit
/// eigenproblem, and pointwise posterior variance.

#include "oedsteer/prior.hpp"
#include "oedsteer/transport.hpp"

namespace oedsteer {

/// Relaxed sensor weights in [0,1]^q, aligned with a CandidateSet's weight
/// slots (stationary-grid weights are broadcast over all observation times).
struct DesignWeights {
  Vector w;

  static DesignWeights ones(Index q) { return {Vector::Ones(q)}; }
  static DesignWeights zeros(Index q) { return {Vector::Zero(q)}; }
};

/// Misfit operator G = sigma^{-2} F' W F as a Euclidean-symmetric matrix-free
/// map (w_expanded holds one weight per measurement).
LinearMap misfit_action_map(const ForwardMap& fwd, const Vector& w_expanded, double sigma);

/// Hessian action H m = F*(sigma^{-2} W F m) + precision(m) in the M-weighted
/// operator convention.
Vector hessian_action(const Vector& m, const DesignWeights& w, const ForwardMap& fwd,
                      const BiLaplacianPrior& prior, double sigma);

/// Low-rank posterior: eigenpairs (lambda_i, v_i) of the design-weighted
/// misfit pencil G v = lambda R v with R = A M^{-1} A, giving
///   Gamma_post x ~= Gamma_pr x - V D V' M x,   D = diag(lambda/(1+lambda)).
class LowRankPosterior {
 public:
  LowRankPosterior(const BiLaplacianPrior& prior, Vector values, Matrix vectors,
                   Vector design = {});

  const BiLaplacianPrior& prior() const { return *prior_; }
  Index rank() const { return values_.size(); }
  const Vector& eigenvalues() const { return values_; }
  const Matrix& eigenvectors() const { return vectors_; }
  const Vector& design() const { return design_; }

  /// Posterior covariance operator action (prior fallback when rank() == 0).
  Vector applyPosteriorCov(const Vector& x) const;
  /// Posterior covariance matrix action Gamma_post M^{-1} x (the form whose
  /// diagonal is the pointwise variance of field values).
  Vector applyCovMatrix(const Vector& x) const;

 private:
  const BiLaplacianPrior* prior_;
  Vector values_;   // descending, >= retention floor
  Matrix vectors_;  // R-orthonormal columns
  Vector dr_;       // lambda/(1+lambda)
  Vector design_;   // weights snapshot (may be empty)
};

struct LowRankOptions {
  Index oversample = 10;
  int power_iters = 1;
  std::uint64_t seed = 0;
  double eigen_floor = 1e-10;  // drop pairs with lambda below this
};

LowRankPosterior build_lowrank(const DesignWeights& w, Index rank, const ForwardMap& fwd,
                               const BiLaplacianPrior& prior, double sigma,
                               const LowRankOptions& opts = {});

struct MapOptions {
  double tol = 1e-8;
  int maxiter = 2000;
  const LowRankPosterior* precond = nullptr;
};

/// MAP estimate: solves H(w) m = F*(sigma^{-2} W d) + precision(m_pr) by CG in
/// the M-weighted inner product, optionally preconditioned by a low-rank
/// posterior.
ScalarField solve_map(const Observations& obs, const DesignWeights& w, const ForwardMap& fwd,
                      const BiLaplacianPrior& prior, const MapOptions& opts = {});

/// Hutchinson estimate of the pointwise posterior variance (diagonal of the
/// posterior covariance matrix) with seeded Rademacher probes.
ScalarField pointwise_variance(const LowRankPosterior& lr, Index n_probe, std::uint64_t seed);

/// Exact diagonal via one A-solve per degree of freedom; O(n_dof) solves, for
/// small problems and acceptance checks.
ScalarField pointwise_variance_exact(const LowRankPosterior& lr);

}  // namespace oedsteer
