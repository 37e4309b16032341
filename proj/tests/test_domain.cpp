#include <doctest.h>

#include <cmath>

#include "oedsteer/field.hpp"

using namespace oedsteer;

TEST_CASE("grid counts fluid cells") {
  Grid g = build_grid(10, 10, 100.0, 100.0);
  CHECK(g.numActive() == 100);

  SUBCASE("one obstacle covering exactly cells (4..5, 4..5)") {
    // Cell centers at 45, 55 in both directions.
    RegionRect obstacle{40.0, 60.0, 40.0, 60.0};
    Grid masked = build_grid(10, 10, 100.0, 100.0, std::span<const RegionRect>(&obstacle, 1));
    CHECK(masked.numActive() == 96);
  }
}

TEST_CASE("grid masking matches a brute-force point-in-rect oracle") {
  std::vector<RegionRect> buildings = {{-120, -40, -80, 30}, {10, 90, -150, -60}, {50, 95, 60, 130}};
  Grid g = build_grid(64, 64, 400.0, 400.0, buildings, -200.0, -200.0);
  Index masked = 0;
  for (int j = 0; j < 64; ++j)
    for (int i = 0; i < 64; ++i) {
      const double x = -200.0 + (i + 0.5) * g.dx();
      const double y = -200.0 + (j + 0.5) * g.dy();
      bool inside = false;
      for (const auto& r : buildings)
        inside = inside || (x >= r.xmin && x <= r.xmax && y >= r.ymin && y <= r.ymax);
      if (inside) ++masked;
      CHECK(g.isSolid(i, j) == inside);
    }
  CHECK(g.numActive() == 64 * 64 - masked);
  SUBCASE("active index is a bijection") {
    std::vector<bool> seen(static_cast<size_t>(g.numActive()), false);
    for (int j = 0; j < 64; ++j)
      for (int i = 0; i < 64; ++i)
        if (!g.isSolid(i, j)) {
          const Index a = g.activeIndex(i, j);
          REQUIRE(a >= 0);
          REQUIRE(a < g.numActive());
          CHECK(!seen[static_cast<size_t>(a)]);
          seen[static_cast<size_t>(a)] = true;
          auto [ii, jj] = g.cellOf(a);
          CHECK(ii == i);
          CHECK(jj == j);
        }
  }
}

TEST_CASE("fully masked grid is rejected") {
  RegionRect all{-1e9, 1e9, -1e9, 1e9};
  CHECK_THROWS_AS(build_grid(8, 8, 10, 10, std::span<const RegionRect>(&all, 1)), DomainError);
}

TEST_CASE("potential flow through an empty rectangle is uniform") {
  Grid g = build_grid(12, 16, 120.0, 160.0);
  WindField w = potential_flow_wind(g, 10.0, Side::South);
  for (int j = 0; j <= 16; ++j)
    for (int i = 0; i < 12; ++i) CHECK(w.v(i, j) == doctest::Approx(10.0).epsilon(1e-9));
  for (int j = 0; j < 16; ++j)
    for (int i = 0; i <= 12; ++i) CHECK(w.u(i, j) == doctest::Approx(0.0).scale(10.0));
}

TEST_CASE("potential flow around an obstacle balances influx and outflux") {
  RegionRect obstacle{-20.0, 20.0, -25.0, 25.0};
  Grid g = build_grid(24, 24, 120.0, 120.0, std::span<const RegionRect>(&obstacle, 1), -60.0,
                      -60.0);
  WindField w = potential_flow_wind(g, 10.0, Side::South);

  double influx = 0.0, outflux = 0.0;
  for (int i = 0; i < 24; ++i) {
    if (!g.isSolid(i, 0)) influx += w.v(i, 0) * g.dx();
    if (!g.isSolid(i, 23)) outflux += w.v(i, 24) * g.dx();
  }
  CHECK(influx == doctest::Approx(outflux).epsilon(1e-10));

  SUBCASE("divergence-free by construction") {
    CHECK(w.maxDivergence() <= 1e-8 * w.maxSpeed() / std::min(g.dx(), g.dy()));
  }
  SUBCASE("flow accelerates around the obstruction") {
    CHECK(w.maxSpeed() > 10.0);
  }
}

TEST_CASE("potential flow rejects a disconnected fluid region") {
  // Wall across the full width splits the domain.
  RegionRect wall{-1000.0, 1000.0, -5.0, 5.0};
  Grid g = build_grid(16, 16, 160.0, 160.0, std::span<const RegionRect>(&wall, 1), -80.0, -80.0);
  CHECK_THROWS_AS((void)potential_flow_wind(g, 10.0, Side::South), DomainError);
}

TEST_CASE("gaussian blob hits its cap at the center and eps at one radius") {
  // Unit cells with centers at integer coordinates -100..100.
  Grid g = build_grid(201, 201, 201.0, 201.0, {}, -100.5, -100.5);
  ScalarField f = gaussian_blob(g, 0.0, 0.0, 25.0, 0.5, 0.001);
  auto [ci, cj] = g.cellAt(0.0, 0.0);
  CHECK(g.centerX(ci) == doctest::Approx(0.0));
  CHECK(f.values(g.activeIndex(ci, cj)) == doctest::Approx(0.5));

  auto [ri, rj] = g.cellAt(25.0, 0.0);  // distance 25 = one radius
  CHECK(f.values(g.activeIndex(ri, rj)) == doctest::Approx(0.001).epsilon(1e-9));

  SUBCASE("decays monotonically along a ray") {
    double prev = 1.0;
    for (int i = ci; i < 201; ++i) {
      const double v = f.values(g.activeIndex(i, cj));
      CHECK(v <= prev + 1e-15);
      prev = v;
    }
  }
  SUBCASE("radially symmetric at equidistant centers") {
    auto [ai, aj] = g.cellAt(10.0, 0.0);
    auto [bi, bj] = g.cellAt(0.0, 10.0);
    auto [di, dj] = g.cellAt(-10.0, 0.0);
    const double a = f.values(g.activeIndex(ai, aj));
    const double b = f.values(g.activeIndex(bi, bj));
    const double d = f.values(g.activeIndex(di, dj));
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
    CHECK(a == doctest::Approx(d).epsilon(1e-12));
  }
}

TEST_CASE("region indicator: full cover, empty region, counting oracle") {
  Grid g = build_grid(96, 96, 400.0, 400.0, {}, -200.0, -200.0);
  ScalarField all = region_indicator(g, RegionRect{-1e9, 1e9, -1e9, 1e9});
  CHECK(all.values.sum() == doctest::Approx(static_cast<double>(g.numActive())));

  CHECK_THROWS_AS((void)region_indicator(g, RegionRect{-200.0, -199.99, -200.0, -199.99}),
                  ContractError);

  // P1 from the first experiment: support area equals the counting oracle.
  RegionRect p1{75.0, 125.0, -100.0, -60.0};
  ScalarField ind = region_indicator(g, p1);
  Index count = 0;
  for (Index a = 0; a < g.numActive(); ++a) {
    auto [i, j] = g.cellOf(a);
    if (p1.contains(g.centerX(i), g.centerY(j))) ++count;
  }
  CHECK(ind.values.sum() == doctest::Approx(static_cast<double>(count)));
  CHECK(ind.values.sum() * g.cellArea() ==
        doctest::Approx(static_cast<double>(count) * g.cellArea()));

  SUBCASE("idempotent under intersection with the domain box") {
    // A region poking outside the domain covers the same cells as its clip.
    RegionRect oversized{75.0, 125.0, -1000.0, -60.0};
    RegionRect clipped{75.0, 125.0, -200.0, -60.0};
    ScalarField a = region_indicator(g, oversized);
    ScalarField b = region_indicator(g, clipped);
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("indicator additivity over disjoint rectangles") {
  Grid g = build_grid(32, 32, 100.0, 100.0);
  RegionRect a{5.0, 30.0, 5.0, 30.0};
  RegionRect b{60.0, 90.0, 55.0, 95.0};
  Vector sum = region_indicator(g, a).values + region_indicator(g, b).values;
  RegionRect hull{0, 100, 0, 100};
  (void)hull;
  for (Index k = 0; k < g.numActive(); ++k) {
    auto [i, j] = g.cellOf(k);
    const double expected = (a.contains(g.centerX(i), g.centerY(j)) ? 1.0 : 0.0) +
                            (b.contains(g.centerX(i), g.centerY(j)) ? 1.0 : 0.0);
    CHECK(sum(k) == doctest::Approx(expected));
  }
}

TEST_CASE("wind field constructor rejects flow through obstacles") {
  RegionRect obstacle{30.0, 70.0, 30.0, 70.0};
  Grid g = build_grid(10, 10, 100.0, 100.0, std::span<const RegionRect>(&obstacle, 1));
  const int nx = g.nx(), ny = g.ny();
  Vector u = Vector::Zero(static_cast<Index>(nx + 1) * ny);
  Vector v = Vector::Constant(static_cast<Index>(nx) * (ny + 1), 1.0);  // pierces the obstacle
  CHECK_THROWS_AS(WindField(g, u, v), ContractError);
}
