#pragma once

/// Offline reduced-order models of the parameter-to-observable map (plain or
/// prior-preconditioned), enabling matrix-vector-only online evaluation.

#include "oedsteer/inversion.hpp"

namespace oedsteer {

/// Truncated SVD factors of Op = F (preconditioned == false) or
/// Op = F o A^{-1} M (preconditioned == true), in the mixed metric:
///   Op ~= V S U' M,  U M-orthonormal (n x r), V Euclidean-orthonormal (q x r).
struct RomOperator {
  Matrix U;          // n_dof x r
  Vector S;          // descending, non-negative
  Matrix V;          // q x r
  bool preconditioned = false;
  Vector mass;       // lumped mass diagonal (the U-metric)
  double probed_tail = 0.0;  // sigma_{r+1} / sigma_1 from the oversampled sketch

  Index rank() const { return S.size(); }
  Index numDof() const { return U.rows(); }
  Index numMeasurements() const { return V.rows(); }

  /// Action of the factored operator: V S U' M m.
  Vector apply(const Vector& m) const;
  /// Exact M-adjoint of the factored operator: U S V' y.
  Vector applyAdjoint(const Vector& y) const;
};

struct RomOptions {
  Index oversample = 10;
  int power_iters = 1;
  std::uint64_t seed = 0;
};

RomOperator build_rom(const ForwardMap& fwd, const BiLaplacianPrior& prior, Index rank,
                      bool preconditioned, const RomOptions& opts = {});

inline Vector rom_apply(const Vector& m, const RomOperator& rom) { return rom.apply(m); }
inline Vector rom_apply_adjoint(const Vector& y, const RomOperator& rom) {
  return rom.applyAdjoint(y);
}

/// Singular values of the factored operator in the (M, Euclidean) metric pair,
/// for spectrum comparisons; thin wrapper over the ROM construction.
Vector operator_singular_values(const ForwardMap& fwd, const BiLaplacianPrior& prior,
                                Index count, bool preconditioned, const RomOptions& opts = {});

/// MAP estimate through the preconditioned ROM: with T = sigma^{-2} S V' W V S,
///   m_map = A^{-1} M U (I + T)^{-1} S V' (sigma^{-2} W d),
/// one sparse solve and otherwise reduced-order matrix products.
Vector rom_solve_map(const RomOperator& rom, const BiLaplacianPrior& prior,
                     const Vector& w_expanded, const Vector& d, double sigma);

}  // namespace oedsteer
