#include "oedsteer/inversion.hpp"

#include <cmath>
#include <random>

namespace oedsteer {

LinearMap misfit_action_map(const ForwardMap& fwd, const Vector& w_expanded, double sigma) {
  require(w_expanded.size() == fwd.rows(), "misfit_action_map: weight vector size mismatch");
  require(sigma > 0.0, "misfit_action_map: sigma must be positive");
  const Index n = fwd.cols();
  const double inv_s2 = 1.0 / (sigma * sigma);
  const Vector mass = fwd.transport().grid().massDiag();
  // G x = sigma^{-2} F' W F x; F' = M F* with lumped M.
  LinearMap map(
      n, n,
      [&fwd, w_expanded, inv_s2, mass](const Vector& x) {
        Vector y = fwd.apply(x);
        y.array() *= inv_s2 * w_expanded.array();
        return Vector(mass.cwiseProduct(fwd.applyAdjoint(y)));
      },
      [&fwd, w_expanded, inv_s2, mass](const Vector& x) {
        Vector y = fwd.apply(x);
        y.array() *= inv_s2 * w_expanded.array();
        return Vector(mass.cwiseProduct(fwd.applyAdjoint(y)));
      });
  map.setBlockApply([&fwd, w_expanded, inv_s2, mass](const Matrix& X) {
    Matrix Y = fwd.applyBlock(X);
    Y.array().colwise() *= inv_s2 * w_expanded.array();
    Matrix Z = fwd.applyAdjointBlock(Y);
    Z.array().colwise() *= mass.array();
    return Z;
  });
  return map;
}

Vector hessian_action(const Vector& m, const DesignWeights& w, const ForwardMap& fwd,
                      const BiLaplacianPrior& prior, double sigma) {
  const Vector w_exp = fwd.candidates().expandWeights(w.w);
  Vector y = fwd.apply(m);
  y.array() *= w_exp.array() / (sigma * sigma);
  return fwd.applyAdjoint(y) + prior.applyPrecision(m);
}

LowRankPosterior::LowRankPosterior(const BiLaplacianPrior& prior, Vector values, Matrix vectors,
                                   Vector design)
    : prior_(&prior), values_(std::move(values)), vectors_(std::move(vectors)),
      design_(std::move(design)) {
  require(vectors_.cols() == values_.size(), "LowRankPosterior: factor size mismatch");
  dr_ = values_.array() / (1.0 + values_.array());
}

Vector LowRankPosterior::applyPosteriorCov(const Vector& x) const {
  Vector y = prior_->applyCovariance(x);
  if (rank() > 0) {
    Vector t = vectors_.transpose() * prior_->massDiag().cwiseProduct(x);
    y.noalias() -= vectors_ * dr_.cwiseProduct(t);
  }
  return y;
}

Vector LowRankPosterior::applyCovMatrix(const Vector& x) const {
  Vector y = prior_->solveA(prior_->massDiag().cwiseProduct(prior_->solveA(x)));
  if (rank() > 0) {
    Vector t = vectors_.transpose() * x;
    y.noalias() -= vectors_ * dr_.cwiseProduct(t);
  }
  return y;
}

LowRankPosterior build_lowrank(const DesignWeights& w, Index rank, const ForwardMap& fwd,
                               const BiLaplacianPrior& prior, double sigma,
                               const LowRankOptions& opts) {
  const Index n = fwd.cols();
  require(rank >= 0 && rank <= n, "build_lowrank: rank exceeds dimension");
  if (rank == 0 || w.w.maxCoeff() <= 0.0)
    return LowRankPosterior(prior, Vector(), Matrix(n, 0), w.w);

  const Vector w_exp = fwd.candidates().expandWeights(w.w);
  LinearMap G = misfit_action_map(fwd, w_exp, sigma);
  GenEigOptions go;
  go.oversample = opts.oversample;
  go.power_iters = opts.power_iters;
  go.seed = opts.seed;
  EigenPairs pairs = randomized_gen_eig(G, prior.metricR(), rank, go);

  Index keep = 0;
  while (keep < pairs.rank() && pairs.values(keep) >= opts.eigen_floor) ++keep;
  return LowRankPosterior(prior, pairs.values.head(keep), pairs.vectors.leftCols(keep), w.w);
}

ScalarField solve_map(const Observations& obs, const DesignWeights& w, const ForwardMap& fwd,
                      const BiLaplacianPrior& prior, const MapOptions& opts) {
  require(obs.candidates == &fwd.candidates(), "solve_map: observations/candidates mismatch");
  require(obs.d.size() == fwd.rows(), "solve_map: data size mismatch");
  const double sigma = obs.sigma;
  require(sigma > 0.0, "solve_map: sigma must be positive");

  const Vector w_exp = fwd.candidates().expandWeights(w.w);
  Vector rhs = fwd.applyAdjoint(Vector(w_exp.cwiseProduct(obs.d) / (sigma * sigma)));
  if (prior.mean().squaredNorm() > 0.0) rhs += prior.applyPrecision(prior.mean());

  const Index n = fwd.cols();
  LinearMap H(n, n, [&](const Vector& m) { return hessian_action(m, w, fwd, prior, sigma); });
  LinearMap precond;
  CgOptions cg;
  cg.tol = opts.tol;
  cg.maxiter = opts.maxiter;
  cg.metric = prior.massDiag();
  if (opts.precond) {
    precond = LinearMap(n, n,
                        [lr = opts.precond](const Vector& r) { return lr->applyPosteriorCov(r); });
    cg.precond = &precond;
  }
  Vector m = cg_solve(H, rhs, cg);
  return ScalarField(fwd.transport().grid(), std::move(m));
}

ScalarField pointwise_variance(const LowRankPosterior& lr, Index n_probe, std::uint64_t seed) {
  require(n_probe >= 1, "pointwise_variance: need at least one probe");
  const Grid& grid = lr.prior().grid();
  const Index n = grid.numActive();
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  Vector acc = Vector::Zero(n);
  Vector z(n);
  for (Index p = 0; p < n_probe; ++p) {
    for (Index i = 0; i < n; ++i) z(i) = coin(rng) ? 1.0 : -1.0;
    acc += z.cwiseProduct(lr.applyCovMatrix(z));
  }
  return ScalarField(grid, acc / static_cast<double>(n_probe));
}

ScalarField pointwise_variance_exact(const LowRankPosterior& lr) {
  const BiLaplacianPrior& prior = lr.prior();
  const Grid& grid = prior.grid();
  const Index n = grid.numActive();
  const Vector& mass = prior.massDiag();

  // diag(A^{-1} M A^{-1}) accumulated column-block by column-block.
  Vector diag = Vector::Zero(n);
  const Index chunk = 256;
  for (Index start = 0; start < n; start += chunk) {
    const Index cols = std::min(chunk, n - start);
    Matrix E = Matrix::Zero(n, cols);
    for (Index c = 0; c < cols; ++c) E(start + c, c) = 1.0;
    Matrix X = prior.solveA(E);
    for (Index c = 0; c < cols; ++c) diag += mass(start + c) * X.col(c).cwiseAbs2();
  }
  if (lr.rank() > 0) {
    const Vector d = lr.eigenvalues().array() / (1.0 + lr.eigenvalues().array());
    for (Index j = 0; j < lr.rank(); ++j)
      diag -= d(j) * lr.eigenvectors().col(j).cwiseAbs2();
  }
  return ScalarField(grid, std::move(diag));
}

}  // namespace oedsteer
