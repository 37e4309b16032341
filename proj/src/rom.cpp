#include "oedsteer/rom.hpp"

#include <Eigen/Cholesky>

namespace oedsteer {

Vector RomOperator::apply(const Vector& m) const {
  require(m.size() == numDof(), "RomOperator::apply: dimension mismatch");
  Vector t = U.transpose() * mass.cwiseProduct(m);
  return V * S.cwiseProduct(t);
}

Vector RomOperator::applyAdjoint(const Vector& y) const {
  require(y.size() == numMeasurements(), "RomOperator::applyAdjoint: dimension mismatch");
  Vector t = V.transpose() * y;
  return U * S.cwiseProduct(t);
}

RomOperator build_rom(const ForwardMap& fwd, const BiLaplacianPrior& prior, Index rank,
                      bool preconditioned, const RomOptions& opts) {
  const Index n = fwd.cols();
  const Index q = fwd.rows();
  require(rank >= 1 && rank <= std::min(n, q), "build_rom: rank out of range");
  const Vector mass = prior.massDiag();
  const Vector sqrt_mass = mass.cwiseSqrt();

  // Euclidean SVD of B = Op o M^{-1/2}; the M^{1/2} scaling converts the
  // factors back to the (M, Euclidean) metric pair.
  LinearMap B(
      q, n,
      [&fwd, &prior, sqrt_mass, preconditioned](const Vector& x) {
        Vector m = preconditioned ? prior.solveA(Vector(sqrt_mass.cwiseProduct(x)))
                                  : Vector(x.cwiseQuotient(sqrt_mass));
        return fwd.apply(m);
      },
      [&fwd, &prior, mass, sqrt_mass, preconditioned](const Vector& y) {
        Vector g = mass.cwiseProduct(fwd.applyAdjoint(y));  // F' y
        if (preconditioned) return Vector(sqrt_mass.cwiseProduct(prior.solveA(g)));
        return Vector(g.cwiseQuotient(sqrt_mass));
      });
  B.setBlockApply(
      [&fwd, &prior, sqrt_mass, preconditioned](const Matrix& X) {
        Matrix Mcols;
        if (preconditioned) {
          Matrix scaled = X;
          scaled.array().colwise() *= sqrt_mass.array();
          Mcols = prior.solveA(scaled);
        } else {
          Mcols = X;
          Mcols.array().colwise() /= sqrt_mass.array();
        }
        return fwd.applyBlock(Mcols);
      },
      [&fwd, &prior, mass, sqrt_mass, preconditioned](const Matrix& Y) {
        Matrix G = fwd.applyAdjointBlock(Y);
        G.array().colwise() *= mass.array();
        if (preconditioned) {
          Matrix Z = prior.solveA(G);
          Z.array().colwise() *= sqrt_mass.array();
          return Z;
        }
        G.array().colwise() /= sqrt_mass.array();
        return G;
      });

  RandomizedSvdOptions so;
  so.oversample = opts.oversample;
  so.power_iters = opts.power_iters;
  so.seed = opts.seed;
  SvdFactors f = randomized_svd(B, rank, so);

  RomOperator rom;
  rom.S = f.S;
  rom.V = f.U;  // measurement-side factor
  rom.U = f.V;
  rom.U.array().colwise() /= sqrt_mass.array();
  rom.preconditioned = preconditioned;
  rom.mass = mass;
  rom.probed_tail = (f.S(0) > 0.0) ? f.next_singular / f.S(0) : 0.0;
  return rom;
}

Vector operator_singular_values(const ForwardMap& fwd, const BiLaplacianPrior& prior, Index count,
                                bool preconditioned, const RomOptions& opts) {
  RomOperator rom = build_rom(fwd, prior, count, preconditioned, opts);
  return rom.S;
}

Vector rom_solve_map(const RomOperator& rom, const BiLaplacianPrior& prior,
                     const Vector& w_expanded, const Vector& d, double sigma) {
  require(rom.preconditioned, "rom_solve_map: needs the preconditioned ROM");
  require(w_expanded.size() == rom.numMeasurements() && d.size() == rom.numMeasurements(),
          "rom_solve_map: dimension mismatch");
  const Index r = rom.rank();
  const double s = std::max(sigma, 1e-12);
  const double inv_s2 = 1.0 / (s * s);
  Matrix T = Matrix::Zero(r, r);
  Vector rhs = Vector::Zero(r);
  for (Index j = 0; j < w_expanded.size(); ++j) {
    if (w_expanded(j) == 0.0) continue;
    const Vector row = rom.S.cwiseProduct(rom.V.row(j).transpose());
    T.noalias() += (inv_s2 * w_expanded(j)) * row * row.transpose();
    rhs += (inv_s2 * w_expanded(j) * d(j)) * row;
  }
  Eigen::LLT<Matrix> llt(Matrix::Identity(r, r) + T);
  require(llt.info() == Eigen::Success, "rom_solve_map: reduced system not SPD");
  const Vector z = llt.solve(rhs);
  return prior.solveA(prior.massDiag().cwiseProduct(rom.U * z));
}

}  // namespace oedsteer
