#include <doctest.h>

#include <cmath>

#include "oedsteer/transport.hpp"

using namespace oedsteer;

namespace {

struct Setup {
  Grid grid;
  WindField wind;
  TransportOperator transport;
  CandidateSet candidates;
  ForwardMap fwd;

  Setup(Grid g, WindField w, const TransportConfig& cfg, std::vector<double> xs,
        std::vector<double> ys, std::vector<double> times)
      : grid(std::move(g)), wind(grid, w.uFaces(), w.vFaces()), transport(grid, wind, cfg),
        candidates(grid, cfg, std::move(xs), std::move(ys), std::move(times),
                   DesignMode::SpaceTime),
        fwd(transport, candidates) {}
};

Setup obstacle_setup() {
  std::vector<RegionRect> obstacles = {{-30, -5, -20, 20}, {15, 40, -35, -10}};
  Grid g = build_grid(16, 16, 160.0, 160.0, obstacles, -80.0, -80.0);
  WindField w = potential_flow_wind(g, 8.0, Side::South);
  TransportConfig cfg{1.0, 0.1, 4.0};
  std::vector<double> xs = {-50.0, 0.0, 45.0, -20.0};
  std::vector<double> ys = {-50.0, 55.0, 10.0, 60.0};
  std::vector<double> times = {1.0, 2.5, 4.0};
  Grid g2 = g;  // keep a stable copy inside Setup
  return Setup(std::move(g2), w, cfg, xs, ys, times);
}

Vector random_vector(Index n, std::uint64_t seed) { return gaussian_matrix(n, 1, seed).col(0); }

}  // namespace

TEST_CASE("zero initial condition stays zero") {
  Setup s = obstacle_setup();
  Vector u = Vector::Zero(s.grid.numActive());
  u = s.transport.stepForward(u);
  CHECK(u.norm() == 0.0);
  CHECK(s.fwd.apply(Vector::Zero(s.grid.numActive())).norm() == 0.0);
}

TEST_CASE("pure diffusion conserves mass per step") {
  Grid g = build_grid(12, 12, 120.0, 120.0);
  WindField calm = WindField::uniform(g, 0.0, 0.0);
  TransportOperator transport(g, calm, {2.0, 0.05, 1.0});
  Vector u = random_vector(g.numActive(), 7).cwiseAbs();
  const double mass0 = u.sum() * g.cellArea();
  for (int k = 0; k < 10; ++k) {
    u = transport.stepForward(u);
    CHECK(u.sum() * g.cellArea() == doctest::Approx(mass0).epsilon(1e-10));
  }
}

TEST_CASE("a blob advects with the wind") {
  Grid g = build_grid(40, 40, 200.0, 200.0, {}, -100.0, -100.0);
  WindField w = potential_flow_wind(g, 5.0, Side::South);
  TransportConfig cfg{0.01, 0.2, 10.0};
  TransportOperator transport(g, w, cfg);
  Vector u = gaussian_blob(g, 0.0, -60.0, 12.0, 0.5, 1e-3).values;

  auto center_of_mass_y = [&](const Vector& v) {
    double m = 0.0, my = 0.0;
    for (Index a = 0; a < v.size(); ++a) {
      auto [i, j] = g.cellOf(a);
      m += v(a);
      my += v(a) * g.centerY(j);
    }
    return my / m;
  };
  double y0 = center_of_mass_y(u);
  for (int k = 0; k < 10; ++k) u = transport.stepForward(u);
  const double expected_shift = 5.0 * cfg.dt * 10;  // v * t
  const double shift = center_of_mass_y(u) - y0;
  CHECK(std::abs(shift - expected_shift) <= g.dy());  // within one cell over 10 steps
}

TEST_CASE("implicit upwind step satisfies a max principle") {
  Setup s = obstacle_setup();
  Vector u = random_vector(s.grid.numActive(), 9).cwiseAbs();
  double hi = u.maxCoeff();
  for (int k = 0; k < 8; ++k) {
    u = s.transport.stepForward(u);
    CHECK(u.maxCoeff() <= hi + 1e-12);
    CHECK(u.minCoeff() >= -1e-12);  // no spurious negative concentrations
    hi = u.maxCoeff();
  }
}

TEST_CASE("forward map is linear") {
  Setup s = obstacle_setup();
  const Index n = s.grid.numActive();
  Vector m1 = random_vector(n, 11), m2 = random_vector(n, 12);
  const double a = 1.7;
  Vector lhs = s.fwd.apply(a * m1 + m2);
  Vector rhs = a * s.fwd.apply(m1) + s.fwd.apply(m2);
  CHECK((lhs - rhs).norm() <= 1e-10 * (lhs.norm() + rhs.norm() + 1e-30));
}

TEST_CASE("discrete adjoint identity <F m, y> = <m, F* y>_M") {
  Setup s = obstacle_setup();
  const Index n = s.grid.numActive();
  const Index q = s.fwd.rows();
  const double area = s.grid.cellArea();
  for (int probe = 0; probe < 20; ++probe) {
    Vector m = random_vector(n, 100 + probe);
    Vector y = random_vector(q, 200 + probe);
    Vector fm = s.fwd.apply(m);
    Vector fsy = s.fwd.applyAdjoint(y);
    const double lhs = fm.dot(y);
    const double rhs = area * m.dot(fsy);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * fm.norm() * y.norm() + 1e-300);
  }
}

TEST_CASE("block applications agree with per-column applications") {
  Setup s = obstacle_setup();
  const Index n = s.grid.numActive();
  Matrix X = gaussian_matrix(n, 3, 31);
  Matrix Y = s.fwd.applyBlock(X);
  for (Index c = 0; c < 3; ++c)
    CHECK((Y.col(c) - s.fwd.apply(X.col(c))).norm() <= 1e-13 * (Y.col(c).norm() + 1e-30));
  Matrix Z = gaussian_matrix(s.fwd.rows(), 3, 32);
  Matrix W = s.fwd.applyAdjointBlock(Z);
  for (Index c = 0; c < 3; ++c)
    CHECK((W.col(c) - s.fwd.applyAdjoint(Z.col(c))).norm() <= 1e-13 * (W.col(c).norm() + 1e-30));
}

TEST_CASE("adjoint of a single late measurement is supported upstream only") {
  Grid g = build_grid(24, 24, 120.0, 120.0, {}, -60.0, -60.0);
  WindField w = potential_flow_wind(g, 6.0, Side::South);
  TransportConfig cfg{0.05, 0.1, 2.0};
  TransportOperator transport(g, w, cfg);
  // One sensor near the north (downstream) edge, observed at t = 2.
  CandidateSet cs(g, cfg, {0.0}, {50.0}, {2.0}, DesignMode::SpaceTime);
  ForwardMap fwd(transport, cs);
  Vector y = Vector::Ones(1);
  Vector sens = fwd.applyAdjoint(y);
  // Sensitivity w.r.t. the initial condition vanishes strictly downstream of
  // the sensor: with strong south wind and small kappa, cells well above the
  // sensor cannot influence it.
  auto [si, sj] = g.cellAt(0.0, 50.0);
  const double peak = sens.cwiseAbs().maxCoeff();
  for (Index a = 0; a < g.numActive(); ++a) {
    auto [i, j] = g.cellOf(a);
    if (j > sj + 2) CHECK(std::abs(sens(a)) <= 1e-12 * peak);
  }
  CHECK(peak > 0.0);
}

TEST_CASE("noise-free measurements equal the forward readings") {
  Setup s = obstacle_setup();
  ScalarField truth = gaussian_blob(s.grid, -40.0, -40.0, 20.0, 0.5, 1e-3);
  Observations clean = simulate_measurements(truth, s.fwd, 0.0, 99);
  CHECK((clean.d - s.fwd.apply(truth.values)).norm() == 0.0);

  Observations noisy1 = simulate_measurements(truth, s.fwd, 0.005, 42);
  Observations noisy2 = simulate_measurements(truth, s.fwd, 0.005, 42);
  CHECK((noisy1.d - noisy2.d).norm() == 0.0);  // seeded reproducibility
  CHECK((noisy1.d - clean.d).norm() > 0.0);
}

TEST_CASE("noise statistics match sigma") {
  Grid g = build_grid(8, 8, 80.0, 80.0);
  WindField calm = WindField::uniform(g, 0.0, 0.0);
  TransportConfig cfg{1.0, 0.5, 1.0};
  TransportOperator transport(g, calm, cfg);
  CandidateSet cs(g, cfg, {15.0, 55.0}, {15.0, 55.0}, {0.5, 1.0}, DesignMode::SpaceTime);
  ForwardMap fwd(transport, cs);
  ScalarField truth = ScalarField::zero(g);
  const double sigma = 0.005;
  double sum_sq = 0.0;
  Index count = 0;
  for (int rep = 0; rep < 2500; ++rep) {
    Observations obs = simulate_measurements(truth, fwd, sigma, 1000 + rep);
    sum_sq += obs.d.squaredNorm();
    count += obs.d.size();
  }
  const double sample_var = sum_sq / static_cast<double>(count);
  CHECK(sample_var == doctest::Approx(sigma * sigma).epsilon(0.05));
}

TEST_CASE("mass audit: concentration leaves through the outflow") {
  Grid g = build_grid(24, 24, 200.0, 200.0, {}, -100.0, -100.0);
  WindField w = potential_flow_wind(g, 10.0, Side::South);
  TransportConfig cfg{1.0, 0.1, 6.0};
  TransportOperator transport(g, w, cfg);
  Vector u = gaussian_blob(g, 0.0, -50.0, 25.0, 0.5, 1e-3).values;
  double prev = u.sum() * g.cellArea();
  double final_mass = prev;
  for (int k = 0; k < transport.numSteps(); ++k) {
    u = transport.stepForward(u);
    const double mass = u.sum() * g.cellArea();
    CHECK(mass <= prev + 1e-10 * prev);  // non-increasing: no interior sources
    prev = mass;
    final_mass = mass;
  }
  CHECK(final_mass < 0.5 * (gaussian_blob(g, 0.0, -50.0, 25.0, 0.5, 1e-3).values.sum() *
                            g.cellArea()));
}

TEST_CASE("candidate construction validates positions and times") {
  Grid g = build_grid(8, 8, 80.0, 80.0);
  TransportConfig cfg{1.0, 0.5, 2.0};
  RegionRect hole{30.0, 50.0, 30.0, 50.0};
  Grid masked = build_grid(8, 8, 80.0, 80.0, std::span<const RegionRect>(&hole, 1));
  CHECK_THROWS_AS(CandidateSet(masked, cfg, {40.0}, {40.0}, {1.0}, DesignMode::SpaceTime),
                  ContractError);
  CHECK_THROWS_AS(CandidateSet(g, cfg, {10.0}, {10.0}, {0.33}, DesignMode::SpaceTime),
                  ContractError);  // off the time grid
  CHECK_THROWS_AS(CandidateSet(g, cfg, {10.0}, {10.0}, {2.5}, DesignMode::SpaceTime),
                  ContractError);  // beyond T
}

TEST_CASE("stationary weight sharing expands and reduces consistently") {
  Grid g = build_grid(8, 8, 80.0, 80.0);
  TransportConfig cfg{1.0, 0.5, 2.0};
  CandidateSet cs(g, cfg, {10.0, 30.0, 50.0}, {10.0, 30.0, 50.0}, {1.0, 1.5, 2.0},
                  DesignMode::StationaryGrid);
  CHECK(cs.numWeights() == 3);
  CHECK(cs.numMeasurements() == 9);
  Vector w(3);
  w << 0.2, 0.5, 0.9;
  Vector expanded = cs.expandWeights(w);
  for (Index k = 0; k < 3; ++k)
    for (Index p = 0; p < 3; ++p) CHECK(expanded(cs.measurementIndex(k, p)) == w(p));
  Vector per_meas = Vector::Ones(9);
  Vector reduced = cs.reduceToWeights(per_meas);
  CHECK(reduced(0) == doctest::Approx(3.0));
}
