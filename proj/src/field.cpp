#include "oedsteer/field.hpp"

#include <cmath>

#include "oedsteer/linalg.hpp"

namespace oedsteer {

ScalarField ScalarField::fromFunction(const Grid& g,
                                      const std::function<double(double, double)>& f) {
  Vector v(g.numActive());
  for (Index a = 0; a < g.numActive(); ++a) {
    auto [i, j] = g.cellOf(a);
    v(a) = f(g.centerX(i), g.centerY(j));
  }
  return ScalarField(g, std::move(v));
}

Index ScalarField::argmax() const {
  Index best = 0;
  for (Index a = 1; a < values.size(); ++a)
    if (values(a) > values(best)) best = a;
  return best;
}

WindField::WindField(const Grid& g, Vector u_face, Vector v_face)
    : grid_(&g), u_(std::move(u_face)), v_(std::move(v_face)) {
  const int nx = g.nx(), ny = g.ny();
  require(u_.size() == static_cast<Index>(nx + 1) * ny, "WindField: u_face size mismatch");
  require(v_.size() == static_cast<Index>(nx) * (ny + 1), "WindField: v_face size mismatch");

  // Faces touching a solid cell must carry no normal flow.
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const bool left_solid = (i == 0) ? false : g.isSolid(i - 1, j);
      const bool right_solid = (i == nx) ? false : g.isSolid(i, j);
      if (left_solid || right_solid)
        require(u(i, j) == 0.0, "WindField: nonzero velocity on solid-adjacent face");
    }
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const bool below_solid = (j == 0) ? false : g.isSolid(i, j - 1);
      const bool above_solid = (j == ny) ? false : g.isSolid(i, j);
      if (below_solid || above_solid)
        require(v(i, j) == 0.0, "WindField: nonzero velocity on solid-adjacent face");
    }

  const double limit = 1e-8 * maxSpeed() / std::min(g.dx(), g.dy()) + 1e-14;
  require(maxDivergence() <= limit, "WindField: discrete divergence exceeds tolerance");
}

double WindField::maxSpeed() const {
  double m = 0.0;
  for (Index k = 0; k < u_.size(); ++k) m = std::max(m, std::abs(u_(k)));
  for (Index k = 0; k < v_.size(); ++k) m = std::max(m, std::abs(v_(k)));
  return m;
}

double WindField::maxDivergence() const {
  const Grid& g = *grid_;
  double worst = 0.0;
  for (Index a = 0; a < g.numActive(); ++a) {
    auto [i, j] = g.cellOf(a);
    const double flux = (u(i + 1, j) - u(i, j)) * g.dy() + (v(i, j + 1) - v(i, j)) * g.dx();
    worst = std::max(worst, std::abs(flux) / g.cellArea());
  }
  return worst;
}

WindField WindField::uniform(const Grid& g, double ux, double uy) {
  const int nx = g.nx(), ny = g.ny();
  Vector u = Vector::Constant(static_cast<Index>(nx + 1) * ny, ux);
  Vector v = Vector::Constant(static_cast<Index>(nx) * (ny + 1), uy);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const bool left_solid = (i > 0) && g.isSolid(i - 1, j);
      const bool right_solid = (i < nx) && g.isSolid(i, j);
      if (left_solid || right_solid) u[static_cast<Index>(j) * (nx + 1) + i] = 0.0;
    }
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const bool below_solid = (j > 0) && g.isSolid(i, j - 1);
      const bool above_solid = (j < ny) && g.isSolid(i, j);
      if (below_solid || above_solid) v[static_cast<Index>(j) * nx + i] = 0.0;
    }
  return WindField(g, std::move(u), std::move(v));
}

namespace {

void check_connected(const Grid& g) {
  std::vector<std::uint8_t> seen(static_cast<size_t>(g.numActive()), 0);
  std::vector<Index> stack{0};
  seen[0] = 1;
  size_t count = 1;
  const int di[4] = {1, -1, 0, 0};
  const int dj[4] = {0, 0, 1, -1};
  while (!stack.empty()) {
    const Index a = stack.back();
    stack.pop_back();
    auto [i, j] = g.cellOf(a);
    for (int k = 0; k < 4; ++k) {
      const int ni = i + di[k], nj = j + dj[k];
      if (!g.inBounds(ni, nj) || g.isSolid(ni, nj)) continue;
      const Index b = g.activeIndex(ni, nj);
      if (!seen[static_cast<size_t>(b)]) {
        seen[static_cast<size_t>(b)] = 1;
        ++count;
        stack.push_back(b);
      }
    }
  }
  if (count != static_cast<size_t>(g.numActive()))
    throw DomainError("potential_flow_wind: fluid region is disconnected (isolated pocket)");
}

}  // namespace

WindField potential_flow_wind(const Grid& g, double inflow_speed, Side inflow_side) {
  require(inflow_speed > 0.0, "potential_flow_wind: inflow speed must be positive");
  check_connected(g);

  const int nx = g.nx(), ny = g.ny();
  const Index n = g.numActive();
  const bool vertical = (inflow_side == Side::South || inflow_side == Side::North);

  // Count open boundary faces on the inflow side and its opposite.
  auto boundary_cell = [&](int k, bool inflow) -> std::pair<int, int> {
    switch (inflow_side) {
      case Side::South: return inflow ? std::pair{k, 0} : std::pair{k, ny - 1};
      case Side::North: return inflow ? std::pair{k, ny - 1} : std::pair{k, 0};
      case Side::West: return inflow ? std::pair{0, k} : std::pair{nx - 1, k};
      case Side::East: return inflow ? std::pair{nx - 1, k} : std::pair{0, k};
    }
    return {0, 0};
  };
  const int n_lateral = vertical ? nx : ny;
  int n_in = 0, n_out = 0;
  for (int k = 0; k < n_lateral; ++k) {
    auto [ii, ji] = boundary_cell(k, true);
    auto [io, jo] = boundary_cell(k, false);
    if (!g.isSolid(ii, ji)) ++n_in;
    if (!g.isSolid(io, jo)) ++n_out;
  }
  if (n_in == 0 || n_out == 0)
    throw DomainError("potential_flow_wind: inflow or outflow side fully blocked");
  const double outflow_speed = inflow_speed * static_cast<double>(n_in) / n_out;

  // Neumann Laplacian over fluid cells; prescribed fluxes enter the rhs.
  std::vector<Triplet> trips;
  Vector rhs = Vector::Zero(n);
  const double ax = g.dy() / g.dx();
  const double ay = g.dx() / g.dy();
  for (Index a = 0; a < n; ++a) {
    auto [i, j] = g.cellOf(a);
    double diag = 0.0;
    const int di[4] = {1, -1, 0, 0};
    const int dj[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int ni = i + di[k], nj = j + dj[k];
      if (g.inBounds(ni, nj) && !g.isSolid(ni, nj)) {
        const double coef = (dj[k] == 0) ? ax : ay;
        diag += coef;
        trips.emplace_back(a, g.activeIndex(ni, nj), -coef);
      }
    }
    trips.emplace_back(a, a, diag);
  }
  auto add_flux = [&](int i, int j, double outward_normal_speed, double face_len) {
    // sum_int a_f (phi_c - phi_nb) = -sum_presc A_f g_f
    rhs(g.activeIndex(i, j)) -= face_len * outward_normal_speed;
  };
  for (int k = 0; k < n_lateral; ++k) {
    const double face_len = vertical ? g.dx() : g.dy();
    auto [ii, ji] = boundary_cell(k, true);
    if (!g.isSolid(ii, ji)) add_flux(ii, ji, -inflow_speed, face_len);
    auto [io, jo] = boundary_cell(k, false);
    if (!g.isSolid(io, jo)) add_flux(io, jo, outflow_speed, face_len);
  }

  SparseMatrix K(n, n);
  K.setFromTriplets(trips.begin(), trips.end());
  rhs.array() -= rhs.mean();  // keep the rhs in the range of the singular Neumann operator

  CgOptions opts;
  opts.tol = 1e-13;
  opts.maxiter = 20 * static_cast<int>(n);
  Vector phi;
  try {
    phi = cg_solve(linear_map_from(K), rhs, opts);
  } catch (const SolveError& e) {
    throw DomainError(std::string("potential_flow_wind: potential solve failed: ") + e.what());
  }

  Vector u = Vector::Zero(static_cast<Index>(nx + 1) * ny);
  Vector v = Vector::Zero(static_cast<Index>(nx) * (ny + 1));
  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i)
      if (!g.isSolid(i - 1, j) && !g.isSolid(i, j))
        u(static_cast<Index>(j) * (nx + 1) + i) =
            (phi(g.activeIndex(i, j)) - phi(g.activeIndex(i - 1, j))) / g.dx();
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      if (!g.isSolid(i, j - 1) && !g.isSolid(i, j))
        v(static_cast<Index>(j) * nx + i) =
            (phi(g.activeIndex(i, j)) - phi(g.activeIndex(i, j - 1))) / g.dy();

  // Prescribed boundary faces; signs follow the global axis directions.
  for (int k = 0; k < n_lateral; ++k) {
    auto [ii, ji] = boundary_cell(k, true);
    auto [io, jo] = boundary_cell(k, false);
    switch (inflow_side) {
      case Side::South:
        if (!g.isSolid(ii, ji)) v(ii) = inflow_speed;
        if (!g.isSolid(io, jo)) v(static_cast<Index>(ny) * nx + io) = outflow_speed;
        break;
      case Side::North:
        if (!g.isSolid(ii, ji)) v(static_cast<Index>(ny) * nx + ii) = -inflow_speed;
        if (!g.isSolid(io, jo)) v(io) = -outflow_speed;
        break;
      case Side::West:
        if (!g.isSolid(ii, ji)) u(static_cast<Index>(ji) * (nx + 1)) = inflow_speed;
        if (!g.isSolid(io, jo)) u(static_cast<Index>(jo) * (nx + 1) + nx) = outflow_speed;
        break;
      case Side::East:
        if (!g.isSolid(ii, ji)) u(static_cast<Index>(ji) * (nx + 1) + nx) = -inflow_speed;
        if (!g.isSolid(io, jo)) u(static_cast<Index>(jo) * (nx + 1)) = -outflow_speed;
        break;
    }
  }
  return WindField(g, std::move(u), std::move(v));
}

ScalarField gaussian_blob(const Grid& grid, double cx, double cy, double radius, double cap,
                          double eps) {
  require(radius > 0.0, "gaussian_blob: radius must be positive");
  require(eps > 0.0 && eps < 1.0, "gaussian_blob: eps must lie in (0,1)");
  require(cap > 0.0, "gaussian_blob: cap must be positive");
  const double log_eps = std::log(eps);
  return ScalarField::fromFunction(grid, [=](double x, double y) {
    const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
    return std::min(cap, std::exp(log_eps * d2 / (radius * radius)));
  });
}

ScalarField region_indicator(const Grid& grid, const RegionRect& region) {
  require(region.valid(), "region_indicator: malformed region");
  auto field = ScalarField::fromFunction(
      grid, [&](double x, double y) { return region.contains(x, y) ? 1.0 : 0.0; });
  require(field.values.sum() > 0.0, "region_indicator: region covers no fluid cell center");
  return field;
}

}  // namespace oedsteer
