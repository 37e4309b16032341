#include "oedsteer/linalg.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <random>

namespace oedsteer {

LinearMap linear_map_from(const SparseMatrix& A) {
  LinearMap map(A.rows(), A.cols(), [&A](const Vector& x) { return Vector(A * x); },
                [&A](const Vector& y) { return Vector(A.transpose() * y); });
  map.setBlockApply([&A](const Matrix& X) { return Matrix(A * X); },
                    [&A](const Matrix& Y) { return Matrix(A.transpose() * Y); });
  return map;
}

LinearMap linear_map_from(const Matrix& A) {
  LinearMap map(A.rows(), A.cols(), [&A](const Vector& x) { return Vector(A * x); },
                [&A](const Vector& y) { return Vector(A.transpose() * y); });
  map.setBlockApply([&A](const Matrix& X) { return Matrix(A * X); },
                    [&A](const Matrix& Y) { return Matrix(A.transpose() * Y); });
  return map;
}

namespace {

double weighted_dot(const Vector& x, const Vector& y, const Vector& metric) {
  if (metric.size() == 0) return x.dot(y);
  return x.dot(metric.cwiseProduct(y));
}

}  // namespace

Vector cg_solve(const LinearMap& op, const Vector& rhs, const CgOptions& opts) {
  require(op.rows() == op.cols(), "cg_solve: operator must be square");
  require(rhs.size() == op.cols(), "cg_solve: rhs dimension mismatch");
  require(opts.tol > 0.0, "cg_solve: tol must be positive");
  if (opts.metric.size() != 0)
    require(opts.metric.size() == rhs.size(), "cg_solve: metric dimension mismatch");

  std::vector<double> history;
  const double rhs_norm = std::sqrt(weighted_dot(rhs, rhs, opts.metric));
  Vector x = Vector::Zero(rhs.size());
  if (rhs_norm == 0.0) {
    if (opts.residual_history) *opts.residual_history = {0.0};
    return x;
  }

  Vector r = rhs;
  Vector z = opts.precond ? opts.precond->apply(r) : r;
  Vector p = z;
  double rz = weighted_dot(r, z, opts.metric);
  double res_norm = std::sqrt(weighted_dot(r, r, opts.metric));
  history.push_back(res_norm / rhs_norm);

  for (int it = 0; it < opts.maxiter; ++it) {
    if (res_norm <= opts.tol * rhs_norm) break;
    Vector Ap = op.apply(p);
    const double pAp = weighted_dot(p, Ap, opts.metric);
    if (pAp <= 0.0) {
      if (opts.residual_history) *opts.residual_history = history;
      throw SolveError("cg_solve: breakdown, operator not positive definite (p'Ap <= 0)", history);
    }
    const double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    res_norm = std::sqrt(weighted_dot(r, r, opts.metric));
    history.push_back(res_norm / rhs_norm);
    if (res_norm <= opts.tol * rhs_norm) break;
    z = opts.precond ? opts.precond->apply(r) : r;
    const double rz_new = weighted_dot(r, z, opts.metric);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }

  if (opts.residual_history) *opts.residual_history = history;
  if (res_norm > opts.tol * rhs_norm) {
    throw SolveError("cg_solve: no convergence after " + std::to_string(opts.maxiter) +
                         " iterations, relative residual " + std::to_string(res_norm / rhs_norm),
                     history);
  }
  return x;
}

Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix G(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) G(i, j) = normal(rng);
  return G;
}

namespace {

Matrix orthonormalize(const Matrix& Y) {
  Eigen::HouseholderQR<Matrix> qr(Y);
  Matrix Q = qr.householderQ() * Matrix::Identity(Y.rows(), std::min(Y.rows(), Y.cols()));
  return Q;
}

}  // namespace

SvdFactors randomized_svd(const LinearMap& op, Index rank, const RandomizedSvdOptions& opts) {
  require(op.hasAdjoint(), "randomized_svd: operator must provide an adjoint");
  const Index m = op.rows();
  const Index n = op.cols();
  const Index min_dim = std::min(m, n);
  require(rank >= 1 && rank <= min_dim, "randomized_svd: rank out of range");
  const Index sketch = std::min(rank + std::max<Index>(opts.oversample, 0), min_dim);

  Matrix omega = gaussian_matrix(n, sketch, opts.seed);
  Matrix Y = op.applyBlock(omega);
  Matrix Q = orthonormalize(Y);
  for (int it = 0; it < opts.power_iters; ++it) {
    Matrix Z = orthonormalize(op.applyAdjointBlock(Q));
    Q = orthonormalize(op.applyBlock(Z));
  }
  // Sketch B' = A' Q; SVD of the small factor gives the truncated factors.
  Matrix Bt = op.applyAdjointBlock(Q);  // n x sketch
  Eigen::BDCSVD<Matrix> svd(Bt, Eigen::ComputeThinU | Eigen::ComputeThinV);

  SvdFactors out;
  out.S = svd.singularValues().head(rank);
  out.V = svd.matrixU().leftCols(rank);
  out.U = Q * svd.matrixV().leftCols(rank);
  out.next_singular = (rank < svd.singularValues().size()) ? svd.singularValues()(rank) : 0.0;

  // Probe ||op - U S V'||_2 with a short power iteration on the residual.
  std::mt19937_64 rng(opts.seed + 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(n);
  for (Index i = 0; i < n; ++i) x(i) = normal(rng);
  x.normalize();
  double est = 0.0;
  for (int it = 0; it < 6; ++it) {
    Vector y = op.apply(x) - out.U * (out.S.asDiagonal() * (out.V.transpose() * x));
    Vector xz = op.applyAdjoint(y) - out.V * (out.S.asDiagonal() * (out.U.transpose() * y));
    est = std::sqrt(xz.norm());
    if (xz.norm() == 0.0) break;
    x = xz / xz.norm();
  }
  out.probed_residual = est;
  return out;
}

EigenPairs randomized_gen_eig(const LinearMap& misfit_action, const SparseMatrix& metric,
                              Index rank, const GenEigOptions& opts) {
  const Index n = metric.rows();
  require(metric.rows() == metric.cols(), "randomized_gen_eig: metric must be square");
  require(misfit_action.rows() == n && misfit_action.cols() == n,
          "randomized_gen_eig: operator/metric dimension mismatch");
  require(rank >= 1 && rank <= n, "randomized_gen_eig: rank exceeds dimension");

  Eigen::SimplicialLLT<SparseMatrix> llt(metric);
  require(llt.info() == Eigen::Success, "randomized_gen_eig: metric is not SPD");

  // With R = Lhat Lhat' (Lhat = P' L for the permuted factor), the pencil
  // G v = lambda R v maps to the symmetric problem C u = lambda u with
  // C = Lhat^{-1} G Lhat^{-T} and v = Lhat^{-T} u.
  const auto& L = llt.matrixL();
  const auto& U = llt.matrixU();
  const auto& P = llt.permutationP();
  const auto Pinv = llt.permutationPinv();

  auto lhat_inv_t = [&](const Matrix& X) -> Matrix {  // Lhat^{-T} X = P^{-1} L^{-T} X
    Matrix W = U.solve(X);
    return Pinv * W;
  };
  auto lhat_inv = [&](const Matrix& X) -> Matrix {  // Lhat^{-1} X = L^{-1} P X
    Matrix W = P * X;
    return L.solve(W);
  };
  auto apply_c = [&](const Matrix& X) -> Matrix {
    return lhat_inv(misfit_action.applyBlock(lhat_inv_t(X)));
  };

  const Index sketch = std::min(rank + std::max<Index>(opts.oversample, 0), n);
  Matrix omega = gaussian_matrix(n, sketch, opts.seed);
  Matrix Q = orthonormalize(apply_c(omega));
  for (int it = 0; it < opts.power_iters; ++it) Q = orthonormalize(apply_c(Q));

  Matrix T = Q.transpose() * apply_c(Q);
  T = 0.5 * (T + T.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(T);
  require(eig.info() == Eigen::Success, "randomized_gen_eig: small eigensolve failed");

  // Eigen returns ascending order; keep the top `rank` pairs descending.
  EigenPairs out;
  out.values.resize(rank);
  Matrix Ur(sketch, rank);
  for (Index i = 0; i < rank; ++i) {
    out.values(i) = eig.eigenvalues()(sketch - 1 - i);
    Ur.col(i) = eig.eigenvectors().col(sketch - 1 - i);
  }
  out.vectors = lhat_inv_t(Q * Ur);

  if (opts.compute_residuals) {
    out.residuals.resize(rank);
    Matrix Gv = misfit_action.applyBlock(out.vectors);
    Matrix Rv = metric * out.vectors;
    for (Index i = 0; i < rank; ++i)
      out.residuals(i) = (Gv.col(i) - out.values(i) * Rv.col(i)).norm();
  }
  return out;
}

}  // namespace oedsteer
