#pragma once

/// Cell-centered scalar fields and face-normal wind fields on a Grid,
/// plus the analytic scenario ingredients (source blobs, region indicators).

#include <functional>

#include "oedsteer/grid.hpp"

namespace oedsteer {

struct ScalarField {
  const Grid* grid = nullptr;
  Vector values;  // one entry per active cell
  double time = 0.0;

  ScalarField() = default;
  ScalarField(const Grid& g, Vector v, double t = 0.0)
      : grid(&g), values(std::move(v)), time(t) {
    require(values.size() == g.numActive(), "ScalarField: value count mismatch");
  }
  static ScalarField zero(const Grid& g) { return ScalarField(g, Vector::Zero(g.numActive())); }
  static ScalarField fromFunction(const Grid& g, const std::function<double(double, double)>& f);

  double mass() const { return values.sum() * grid->cellArea(); }
  /// M-weighted L2 norm.
  double normM() const { return std::sqrt(values.squaredNorm() * grid->cellArea()); }
  /// Active index of the maximal value (ties: lowest index).
  Index argmax() const;
};

/// Face-normal velocities: u on vertical faces ((nx+1) x ny), v on horizontal
/// faces (nx x (ny+1)). Faces touching solid cells or no-flux boundaries carry
/// zero normal velocity; the per-cell discrete divergence is checked at
/// construction.
class WindField {
 public:
  WindField(const Grid& g, Vector u_face, Vector v_face);

  const Grid& grid() const { return *grid_; }
  double u(int i, int j) const { return u_[static_cast<Index>(j) * (grid_->nx() + 1) + i]; }
  double v(int i, int j) const { return v_[static_cast<Index>(j) * grid_->nx() + i]; }
  const Vector& uFaces() const { return u_; }
  const Vector& vFaces() const { return v_; }

  double maxSpeed() const;
  /// Max over cells of |sum of outward face fluxes| / cell area.
  double maxDivergence() const;

  static WindField uniform(const Grid& g, double ux, double uy);

 private:
  const Grid* grid_;
  Vector u_, v_;
};

/// Potential-flow wind through the obstacle field: prescribed influx on one
/// side, matched outflux on the opposite side, no-flux elsewhere. Divergence-
/// free by construction. Throws DomainError if the fluid region is
/// disconnected or the flow has no outlet.
enum class Side { South, North, East, West };
WindField potential_flow_wind(const Grid& grid, double inflow_speed, Side inflow_side);

/// Radially symmetric source blob: min(cap, eps^(|x-center|^2 / radius^2)).
/// Reaches `cap` at the center and decays to `eps` at distance `radius`.
ScalarField gaussian_blob(const Grid& grid, double cx, double cy, double radius,
                          double cap = 0.5, double eps = 1e-3);

/// 1 on active cells whose centers lie in the region, 0 elsewhere.
/// Throws ContractError if the region covers no active cell center.
ScalarField region_indicator(const Grid& grid, const RegionRect& region);

}  // namespace oedsteer
