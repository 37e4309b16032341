#pragma once

/// Trace-class Gaussian prior built from the elliptic operator
/// A = eta*M + gamma*K + beta*B (reaction + stiffness + Robin boundary),
/// with covariance applied as A^{-1} M A^{-1} M through cached sparse solves.

#include <Eigen/SparseCholesky>

#include "oedsteer/field.hpp"

namespace oedsteer {

struct PriorConfig {
  double eta = 8.0;
  double gamma = 800.0;
  double beta = -1.0;  // < 0: use sqrt(gamma*eta)/1.42
};

class BiLaplacianPrior {
 public:
  BiLaplacianPrior(const Grid& grid, const PriorConfig& cfg, Vector mean = {});

  const Grid& grid() const { return *grid_; }
  double eta() const { return eta_; }
  double gamma() const { return gamma_; }
  double beta() const { return beta_; }
  const SparseMatrix& A() const { return A_; }
  const Vector& massDiag() const { return mass_; }
  const Vector& mean() const { return mean_; }

  Vector solveA(const Vector& b) const;
  Matrix solveA(const Matrix& B) const;

  /// Covariance operator action: A^{-1} M A^{-1} M x.
  Vector applyCovariance(const Vector& x) const;
  /// Precision operator action: M^{-1} A M^{-1} A x (matrix products only).
  Vector applyPrecision(const Vector& x) const;

  /// mean + A^{-1} M^{1/2} xi with standard normal xi; covariance matrix
  /// of the draws is A^{-1} M A^{-1}.
  ScalarField sample(std::uint64_t seed) const;

  /// Metric of the prior-preconditioned eigenproblem: R = A M^{-1} A.
  SparseMatrix metricR() const;

 private:
  const Grid* grid_;
  double eta_, gamma_, beta_;
  Vector mass_;
  Vector mean_;
  SparseMatrix A_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

}  // namespace oedsteer
