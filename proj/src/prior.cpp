#include "oedsteer/prior.hpp"

#include <cmath>
#include <random>

namespace oedsteer {

BiLaplacianPrior::BiLaplacianPrior(const Grid& grid, const PriorConfig& cfg, Vector mean)
    : grid_(&grid), eta_(cfg.eta), gamma_(cfg.gamma) {
  require(eta_ > 0.0, "BiLaplacianPrior: eta must be positive");
  require(gamma_ >= 0.0, "BiLaplacianPrior: gamma must be non-negative");
  beta_ = cfg.beta >= 0.0 ? cfg.beta : std::sqrt(gamma_ * eta_) / 1.42;
  mass_ = grid.massDiag();
  mean_ = mean.size() ? std::move(mean) : Vector::Zero(grid.numActive());
  require(mean_.size() == grid.numActive(), "BiLaplacianPrior: mean size mismatch");

  // A = eta*M + gamma*K + beta*B: K couples fluid neighbors through faces,
  // B adds the Robin term on every boundary face (outer domain and obstacles).
  const Index n = grid.numActive();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(5 * n));
  for (Index a = 0; a < n; ++a) {
    auto [i, j] = grid.cellOf(a);
    double diag = eta_ * grid.cellArea();
    const int di[4] = {1, -1, 0, 0};
    const int dj[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int ni = i + di[k], nj = j + dj[k];
      const double face_len = (dj[k] == 0) ? grid.dy() : grid.dx();
      const double dist = (dj[k] == 0) ? grid.dx() : grid.dy();
      if (grid.inBounds(ni, nj) && !grid.isSolid(ni, nj)) {
        const double coef = gamma_ * face_len / dist;
        diag += coef;
        trips.emplace_back(a, grid.activeIndex(ni, nj), -coef);
      } else {
        diag += beta_ * face_len;
      }
    }
    trips.emplace_back(a, a, diag);
  }
  A_.resize(n, n);
  A_.setFromTriplets(trips.begin(), trips.end());
  A_.makeCompressed();
  ldlt_.compute(A_);
  require(ldlt_.info() == Eigen::Success, "BiLaplacianPrior: factorization of A failed");
}

Vector BiLaplacianPrior::solveA(const Vector& b) const { return ldlt_.solve(b); }
Matrix BiLaplacianPrior::solveA(const Matrix& B) const { return ldlt_.solve(B); }

Vector BiLaplacianPrior::applyCovariance(const Vector& x) const {
  require(x.size() == grid_->numActive(), "applyCovariance: dimension mismatch");
  Vector y = solveA(mass_.cwiseProduct(x));
  return solveA(mass_.cwiseProduct(y));
}

Vector BiLaplacianPrior::applyPrecision(const Vector& x) const {
  require(x.size() == grid_->numActive(), "applyPrecision: dimension mismatch");
  Vector y = (A_ * x).cwiseQuotient(mass_);
  return (A_ * y).cwiseQuotient(mass_);
}

ScalarField BiLaplacianPrior::sample(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector xi(grid_->numActive());
  for (Index i = 0; i < xi.size(); ++i) xi(i) = normal(rng);
  Vector draw = mean_ + solveA(mass_.cwiseSqrt().cwiseProduct(xi));
  return ScalarField(*grid_, std::move(draw));
}

SparseMatrix BiLaplacianPrior::metricR() const {
  SparseMatrix Minv(A_.rows(), A_.rows());
  Minv.reserve(A_.rows());
  for (Index i = 0; i < A_.rows(); ++i) Minv.insert(i, i) = 1.0 / mass_(i);
  SparseMatrix R = A_ * Minv * A_;
  R.makeCompressed();
  return R;
}

}  // namespace oedsteer
