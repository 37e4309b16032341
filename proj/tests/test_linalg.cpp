#include <doctest.h>

#include <Eigen/Dense>

#include "oedsteer/linalg.hpp"

using namespace oedsteer;

namespace {

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  return gaussian_matrix(rows, cols, seed);
}

Matrix random_spd(Index n, std::uint64_t seed) {
  Matrix B = random_matrix(n, n, seed);
  return B * B.transpose() + static_cast<double>(n) * Matrix::Identity(n, n);
}

}  // namespace

TEST_CASE("cg on the identity returns the rhs immediately") {
  const Index n = 17;
  LinearMap id(n, n, [](const Vector& x) { return x; });
  Vector rhs = random_matrix(n, 1, 3).col(0);
  std::vector<double> hist;
  CgOptions opts;
  opts.residual_history = &hist;
  Vector x = cg_solve(id, rhs, opts);
  CHECK((x - rhs).norm() <= 1e-14 * rhs.norm());
  CHECK(hist.size() <= 2);  // converged after one iteration
}

TEST_CASE("cg solves a diagonal system") {
  const Index n = 12;
  Vector d(n);
  for (Index i = 0; i < n; ++i) d(i) = static_cast<double>(i + 1);
  LinearMap op(n, n, [d](const Vector& x) { return Vector(d.cwiseProduct(x)); });
  Vector x = cg_solve(op, Vector::Ones(n));
  for (Index i = 0; i < n; ++i) CHECK(x(i) == doctest::Approx(1.0 / (i + 1)).epsilon(1e-9));
}

TEST_CASE("cg matches a dense LU oracle on a random SPD system") {
  const Index n = 5;
  const Matrix A = random_spd(n, 11);
  const Vector rhs = random_matrix(n, 1, 12).col(0);
  const Vector expected = Eigen::FullPivLU<Matrix>(A).solve(rhs);
  Vector x = cg_solve(linear_map_from(A), rhs, {.tol = 1e-12});
  CHECK((x - expected).norm() <= 1e-8 * expected.norm());
}

TEST_CASE("cg converges within the dimension on small SPD systems") {
  for (Index n : {8, 32, 64}) {
    const Matrix A = random_spd(n, 100 + static_cast<std::uint64_t>(n));
    const Vector rhs = random_matrix(n, 1, 200 + static_cast<std::uint64_t>(n)).col(0);
    CgOptions opts;
    opts.tol = 1e-8;
    opts.maxiter = static_cast<int>(n);
    Vector x = cg_solve(linear_map_from(A), rhs, opts);
    CHECK((A * x - rhs).norm() <= 1e-8 * rhs.norm());
  }
}

TEST_CASE("cg respects a metric inner product") {
  const Index n = 24;
  Vector metric = random_matrix(n, 1, 5).col(0).cwiseAbs().array() + 0.5;
  // Operator self-adjoint in the metric: M^{-1} K with symmetric K.
  Matrix K = random_spd(n, 6);
  LinearMap op(n, n,
               [K, metric](const Vector& x) { return Vector((K * x).cwiseQuotient(metric)); });
  Vector rhs = random_matrix(n, 1, 7).col(0);
  CgOptions opts;
  opts.metric = metric;
  opts.tol = 1e-11;
  opts.maxiter = 500;
  Vector x = cg_solve(op, rhs, opts);
  CHECK((K * x - metric.cwiseProduct(rhs)).norm() <= 1e-9 * rhs.norm());
}

TEST_CASE("cg reports breakdown on an indefinite operator") {
  const Index n = 6;
  Matrix A = Matrix::Identity(n, n);
  A(n - 1, n - 1) = -1.0;
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  CHECK_THROWS_AS((void)cg_solve(linear_map_from(A), rhs), SolveError);
}

TEST_CASE("cg reports non-convergence with the residual history") {
  const Index n = 40;
  const Matrix A = random_spd(n, 21);
  CgOptions opts;
  opts.maxiter = 2;
  opts.tol = 1e-14;
  try {
    (void)cg_solve(linear_map_from(A), random_matrix(n, 1, 22).col(0), opts);
    FAIL("expected SolveError");
  } catch (const SolveError& e) {
    CHECK(e.residual_history.size() >= 2);
  }
}

TEST_CASE("cg rejects mismatched dimensions") {
  LinearMap op(4, 4, [](const Vector& x) { return x; });
  CHECK_THROWS_AS((void)cg_solve(op, Vector::Zero(5)), ContractError);
}

TEST_CASE("randomized svd recovers an exact rank-2 operator") {
  const Index m = 30, n = 20;
  Matrix A = random_matrix(m, 1, 31).col(0) * random_matrix(n, 1, 32).col(0).transpose() +
             0.25 * random_matrix(m, 1, 33).col(0) * random_matrix(n, 1, 34).col(0).transpose();
  SvdFactors f = randomized_svd(linear_map_from(A), 2);
  Eigen::BDCSVD<Matrix> dense(A);
  CHECK(f.S(0) == doctest::Approx(dense.singularValues()(0)).epsilon(1e-10));
  CHECK(f.S(1) == doctest::Approx(dense.singularValues()(1)).epsilon(1e-10));
  CHECK((A - f.U * f.S.asDiagonal() * f.V.transpose()).norm() <= 1e-9 * A.norm());
}

TEST_CASE("randomized svd on a diagonal operator") {
  Vector d(6);
  d << 1, 0.5, 0.25, 0.125, 0.0625, 0.03125;
  Matrix A = d.asDiagonal();
  SvdFactors f = randomized_svd(linear_map_from(A), 3);
  CHECK(f.S(0) == doctest::Approx(1.0));
  CHECK(f.S(1) == doctest::Approx(0.5));
  CHECK(f.S(2) == doctest::Approx(0.25));
}

TEST_CASE("randomized svd matches a dense oracle on a 50x30 map") {
  Matrix A = random_matrix(50, 30, 41);
  // Impose decay so the sketch captures the range well.
  Eigen::BDCSVD<Matrix> pre(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector s = pre.singularValues();
  for (Index i = 0; i < s.size(); ++i) s(i) *= std::pow(0.7, static_cast<double>(i));
  A = pre.matrixU() * s.asDiagonal() * pre.matrixV().transpose();

  SvdFactors f = randomized_svd(linear_map_from(A), 10, {.oversample = 15, .power_iters = 2});
  Eigen::BDCSVD<Matrix> dense(A);
  for (Index i = 0; i < 10; ++i)
    CHECK(f.S(i) == doctest::Approx(dense.singularValues()(i)).epsilon(1e-6));

  SUBCASE("factors are orthonormal and values descend") {
    CHECK((f.U.transpose() * f.U - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((f.V.transpose() * f.V - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff() <= 1e-8);
    for (Index i = 1; i < f.S.size(); ++i) CHECK(f.S(i) <= f.S(i - 1) + 1e-15);
  }
  SUBCASE("probed residual is on the order of the next singular value") {
    CHECK(f.probed_residual <= 10.0 * dense.singularValues()(10) + 1e-12);
  }
  SUBCASE("deterministic for a fixed seed") {
    SvdFactors g = randomized_svd(linear_map_from(A), 10, {.oversample = 15, .power_iters = 2});
    CHECK((f.U - g.U).norm() == 0.0);
    CHECK((f.S - g.S).norm() == 0.0);
  }
}

TEST_CASE("randomized svd requires an adjoint") {
  LinearMap op(4, 4, [](const Vector& x) { return x; });
  CHECK_THROWS_AS((void)randomized_svd(op, 2), ContractError);
}

namespace {

SparseMatrix sparse_spd(Index n, std::uint64_t seed) {
  Matrix D = random_matrix(n, n, seed);
  Matrix R = D * D.transpose() + static_cast<double>(n) * Matrix::Identity(n, n);
  return R.sparseView();
}

}  // namespace

TEST_CASE("generalized eigensolver: identity pencil and zero operator") {
  const Index n = 10;
  SparseMatrix R = sparse_spd(n, 51);
  LinearMap G = linear_map_from(R);
  EigenPairs pairs = randomized_gen_eig(G, R, 3);
  for (Index i = 0; i < 3; ++i) CHECK(pairs.values(i) == doctest::Approx(1.0).epsilon(1e-10));

  Matrix Z = Matrix::Zero(n, n);
  EigenPairs zero = randomized_gen_eig(linear_map_from(Z), R, 2);
  CHECK(std::abs(zero.values(0)) <= 1e-12);
  CHECK(std::abs(zero.values(1)) <= 1e-12);
}

TEST_CASE("generalized eigensolver matches a dense oracle on a 20-dof pencil") {
  const Index n = 20;
  SparseMatrix R = sparse_spd(n, 61);
  Matrix B = random_matrix(n, 8, 62);
  Matrix G = B * B.transpose();  // PSD, rank 8

  GenEigOptions opts;
  opts.oversample = n;  // full sketch: exact Rayleigh-Ritz
  opts.compute_residuals = true;
  EigenPairs pairs = randomized_gen_eig(linear_map_from(G), R, 5, opts);

  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> dense(G, Matrix(R));
  for (Index i = 0; i < 5; ++i) {
    const double expected = dense.eigenvalues()(n - 1 - i);
    CHECK(pairs.values(i) == doctest::Approx(expected).epsilon(1e-8));
  }

  SUBCASE("vectors are metric-orthonormal") {
    Matrix gram = pairs.vectors.transpose() * R * pairs.vectors;
    CHECK((gram - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-8);
  }
  SUBCASE("pencil residuals are small for retained pairs") {
    for (Index i = 0; i < 5; ++i)
      CHECK(pairs.residuals(i) <= 1e-6 * std::max(pairs.values(0), 1.0));
  }
}

TEST_CASE("generalized eigensolver rejects rank beyond the dimension") {
  SparseMatrix R = sparse_spd(6, 71);
  Matrix G = Matrix::Identity(6, 6);
  CHECK_THROWS_AS((void)randomized_gen_eig(linear_map_from(G), R, 7), ContractError);
}

TEST_CASE("linear maps are linear to round-off on random probes") {
  const Matrix A = random_matrix(15, 9, 81);
  LinearMap map = linear_map_from(A);
  const Vector x = random_matrix(9, 1, 82).col(0);
  const Vector y = random_matrix(9, 1, 83).col(0);
  const double a = 0.37, b = -1.21;
  Vector lhs = map.apply(a * x + b * y);
  Vector rhs = a * map.apply(x) + b * map.apply(y);
  const double scale = lhs.norm() + rhs.norm() + 1.0;
  CHECK((lhs - rhs).norm() <= 1e-10 * scale);
}
