#pragma once

/// Matrix-free linear algebra kernels shared by the inversion stack:
/// a type-erased linear operator, preconditioned CG in a (possibly
/// mass-weighted) inner product, and randomized low-rank factorizations.

#include <functional>
#include <optional>

#include "oedsteer/types.hpp"

namespace oedsteer {

/// Matrix-free linear operator with optional adjoint and optional blocked
/// application (one call for many right-hand columns, which is much faster
/// for operators backed by sparse factorizations).
class LinearMap {
 public:
  using Apply = std::function<Vector(const Vector&)>;
  using ApplyBlock = std::function<Matrix(const Matrix&)>;

  LinearMap() = default;
  LinearMap(Index rows, Index cols, Apply apply, Apply apply_adjoint = {})
      : rows_(rows), cols_(cols), apply_(std::move(apply)), adjoint_(std::move(apply_adjoint)) {}

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  bool hasAdjoint() const { return static_cast<bool>(adjoint_); }

  Vector apply(const Vector& x) const {
    require(x.size() == cols_, "LinearMap::apply: dimension mismatch");
    return apply_(x);
  }
  Vector applyAdjoint(const Vector& y) const {
    require(hasAdjoint(), "LinearMap::applyAdjoint: no adjoint provided");
    require(y.size() == rows_, "LinearMap::applyAdjoint: dimension mismatch");
    return adjoint_(y);
  }

  /// Blocked application; falls back to column-by-column if no block
  /// implementation was registered.
  Matrix applyBlock(const Matrix& X) const {
    require(X.rows() == cols_, "LinearMap::applyBlock: dimension mismatch");
    if (block_) return block_(X);
    Matrix Y(rows_, X.cols());
    for (Index j = 0; j < X.cols(); ++j) Y.col(j) = apply_(X.col(j));
    return Y;
  }
  Matrix applyAdjointBlock(const Matrix& Y) const {
    require(hasAdjoint(), "LinearMap::applyAdjointBlock: no adjoint provided");
    require(Y.rows() == rows_, "LinearMap::applyAdjointBlock: dimension mismatch");
    if (adjoint_block_) return adjoint_block_(Y);
    Matrix X(cols_, Y.cols());
    for (Index j = 0; j < Y.cols(); ++j) X.col(j) = adjoint_(Y.col(j));
    return X;
  }

  void setBlockApply(ApplyBlock block, ApplyBlock adjoint_block = {}) {
    block_ = std::move(block);
    adjoint_block_ = std::move(adjoint_block);
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  Apply apply_;
  Apply adjoint_;
  ApplyBlock block_;
  ApplyBlock adjoint_block_;
};

LinearMap linear_map_from(const SparseMatrix& A);
LinearMap linear_map_from(const Matrix& A);

/// Generalized eigenpairs of a symmetric pencil, sorted descending.
/// Vectors are orthonormal in the metric that defined the pencil.
struct EigenPairs {
  Vector values;        // descending
  Matrix vectors;       // one column per retained pair
  Vector residuals;     // ||G v_i - lambda_i R v_i||_2 per retained pair

  Index rank() const { return values.size(); }
};

struct CgOptions {
  double tol = 1e-10;       // relative residual target
  int maxiter = 1000;
  const LinearMap* precond = nullptr;  // approximate inverse, self-adjoint in the metric
  Vector metric;            // diagonal of inner-product weights; empty = Euclidean
  std::vector<double>* residual_history = nullptr;  // optional output
};

/// Preconditioned conjugate gradients for operators that are self-adjoint
/// positive definite in the inner product <x,y> = x' diag(metric) y.
/// Throws SolveError on breakdown (p'Ap <= 0) or if maxiter is reached
/// before ||A x - b|| <= tol ||b|| in the metric norm.
Vector cg_solve(const LinearMap& op, const Vector& rhs, const CgOptions& opts = {});

struct RandomizedSvdOptions {
  Index oversample = 10;
  int power_iters = 1;
  std::uint64_t seed = 0;
};

struct SvdFactors {
  Matrix U;        // rows() x rank, orthonormal columns
  Vector S;        // descending, non-negative
  Matrix V;        // cols() x rank, orthonormal columns
  double probed_residual = 0.0;   // power-iteration estimate of ||op - U S V'||_2
  double next_singular = 0.0;     // sigma_{rank+1} estimate from the oversampled sketch
};

/// Randomized truncated SVD of a matrix-free operator (Halko-style range
/// finder with power iteration, then SVD of the projected sketch).
/// Deterministic for a fixed seed.
SvdFactors randomized_svd(const LinearMap& op, Index rank, const RandomizedSvdOptions& opts = {});

struct GenEigOptions {
  Index oversample = 10;
  int power_iters = 1;
  std::uint64_t seed = 0;
  bool compute_residuals = false;  // extra applications of G and R per retained pair
};

/// Randomized solution of the symmetric generalized eigenvalue problem
///   G v = lambda R v,   G symmetric PSD, R symmetric positive definite,
/// returning the leading pairs with R-orthonormal eigenvectors.
/// Internally works on C = L^{-1} G L^{-T} for a sparse Cholesky factor
/// L L^T = R, so only applications of G and one factorization of R are needed.
EigenPairs randomized_gen_eig(const LinearMap& misfit_action, const SparseMatrix& metric,
                              Index rank, const GenEigOptions& opts = {});

/// Gaussian test matrix with a fixed seed; the sampling order is fixed so the
/// result is independent of how callers parallelize downstream work.
Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed);

}  // namespace oedsteer
