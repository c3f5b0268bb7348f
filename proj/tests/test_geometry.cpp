#include <catch2/catch_amalgamated.hpp>

#include "mmodsim/geometry.hpp"
#include "mmodsim/rng.hpp"
#include "oracles.hpp"

using namespace mmodsim;
using Catch::Approx;

namespace {

// x of the center of trace `index` in quadrant 0
double trace_center_x(const GridLayout& layout, int index) {
  return layout.edge_margin() + (index + 0.5) * layout.pitch();
}

}  // namespace

TEST_CASE("subgrid resistance, defaults") {
  GridLayout layout;
  layout.validate();

  const double r0 = *subgrid_resistance(layout, 0, 0.0);
  CHECK(r0 == Approx(402.44).margin(0.005));

  const double r1 = *subgrid_resistance(layout, 1, 0.0);
  CHECK(r1 - r0 == Approx(0.49).margin(0.005));

  const double r_hot = *subgrid_resistance(layout, 0, 35.0);
  CHECK(r_hot - r0 == Approx(0.28).margin(0.005));
}

TEST_CASE("subgrid resistance, edge cases") {
  GridLayout layout;
  CHECK_FALSE(subgrid_resistance(layout, layout.traces_per_subgrid, 0.0).has_value());
  CHECK_THROWS_AS(subgrid_resistance(layout, -1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(subgrid_resistance(layout, layout.traces_per_subgrid + 1, 0.0),
                  std::invalid_argument);
}

TEST_CASE("subgrid resistance is monotone in breaks and linear in temperature") {
  GridLayout layout;
  Rng rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    const int n1 = static_cast<int>(rng.below(819));
    const int n2 = n1 + 1 + static_cast<int>(rng.below(static_cast<uint64_t>(819 - n1)));
    REQUIRE(*subgrid_resistance(layout, n1, 0.0) < *subgrid_resistance(layout, n2, 0.0));

    const double t = rng.uniform(-60.0, 95.0);
    const double r_t = *subgrid_resistance(layout, n1, t);
    const double r_0 = *subgrid_resistance(layout, n1, 0.0);
    // exactly linear: R(t) = R(0) (1 + tcr t)
    REQUIRE(r_t == Approx(r_0 * (1.0 + layout.tcr * t)).epsilon(1e-12));
  }
}

TEST_CASE("empirical per-break calibration") {
  GridLayout layout;
  layout.empirical_break_ohms = 0.7;
  const double r0 = *subgrid_resistance(layout, 0, 0.0);
  const double r1 = *subgrid_resistance(layout, 1, 0.0);
  CHECK(r1 - r0 == Approx(0.7).epsilon(1e-9));
}

TEST_CASE("equal-break difference rejects common-mode temperature exactly") {
  GridLayout layout;
  for (int n : {0, 3, 100}) {
    for (double t : {-40.0, 0.0, 25.0, 70.0}) {
      const double ra = *subgrid_resistance(layout, n, t);
      const double rb = *subgrid_resistance(layout, n, t);
      CHECK(ra - rb == 0.0);
    }
  }
  // unequal breaks: the difference drifts only by tcr * dT * dR (second order)
  const double d0 = *subgrid_resistance(layout, 2, 0.0) - *subgrid_resistance(layout, 0, 0.0);
  const double d70 = *subgrid_resistance(layout, 2, 70.0) - *subgrid_resistance(layout, 0, 70.0);
  CHECK(std::fabs(d70 - d0) < d0 * layout.tcr * 70.0 * 1.01);
}

TEST_CASE("traces_intersected, spec cases") {
  GridLayout layout;

  SECTION("zero diameter") {
    const BreakState b = traces_intersected(layout, {0.1, 0.1}, 0.0);
    CHECK(b.total_broken() == 0);
    CHECK(b.partial_breaks == 0);
  }

  SECTION("60 um hole centered in a gap") {
    // gap center between traces 399 and 400 of quadrant 0
    const double gap_x = trace_center_x(layout, 399) + 0.5 * layout.pitch();
    const BreakState b = traces_intersected(layout, {gap_x, 0.12}, 60e-6);
    CHECK(b.total_broken() == 0);
    CHECK(b.partial_breaks <= 1);
  }

  SECTION("300 um hole centered on a trace") {
    const BreakState b = traces_intersected(layout, {trace_center_x(layout, 500), 0.1}, 300e-6);
    const int n = b.total_broken();
    CHECK(n >= 2);
    CHECK(n <= 3);
    // interleave splits adjacent breaks between subgrids
    CHECK(std::abs(b.broken[0][0] - b.broken[0][1]) <= 1);
  }

  SECTION("sub-50 um holes never sever") {
    const BreakState b = traces_intersected(layout, {trace_center_x(layout, 500), 0.1}, 45e-6);
    CHECK(b.total_broken() == 0);
    CHECK(b.partial_breaks >= 1);
  }

  SECTION("center outside the active area") {
    CHECK_THROWS_AS(traces_intersected(layout, {0.3, 0.0}, 1e-4), std::out_of_range);
  }
}

TEST_CASE("traces_intersected matches the sampling oracle") {
  GridLayout layout;
  Rng rng(1234);
  for (int trial = 0; trial < 60; ++trial) {
    const Vec2 c{rng.uniform(-0.24, 0.24), rng.uniform(-0.24, 0.24)};
    const double d = rng.uniform(0.0, 1.2e-3);
    const BreakState got = traces_intersected(layout, c, d);
    const BreakState want = oracle::traces_intersected(layout, c, d);
    for (int q = 0; q < kQuadrants; ++q) {
      REQUIRE(got.broken[q][0] == want.broken[q][0]);
      REQUIRE(got.broken[q][1] == want.broken[q][1]);
    }
    REQUIRE(got.partial_breaks == want.partial_breaks);
  }
}

TEST_CASE("break counts grow componentwise with diameter") {
  GridLayout layout;
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec2 c{rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
    const double d1 = rng.uniform(0.0, 1e-3);
    const double d2 = d1 + rng.uniform(0.0, 1e-3);
    const BreakState b1 = traces_intersected(layout, c, d1);
    const BreakState b2 = traces_intersected(layout, c, d2);
    for (int q = 0; q < kQuadrants; ++q)
      for (int s = 0; s < 2; ++s) REQUIRE(b1.broken[q][s] <= b2.broken[q][s]);
  }
}

TEST_CASE("break count times pitch brackets the hole diameter") {
  GridLayout layout;
  const double pitch = layout.pitch();
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int idx = 100 + static_cast<int>(rng.below(1400));
    const double d = rng.uniform(150e-6, 1e-3);
    const Vec2 c{trace_center_x(layout, idx), rng.uniform(0.05, 0.2)};
    const int n = traces_intersected(layout, c, d).total_broken();
    REQUIRE((n - 1) * pitch <= d + 1e-12);
    REQUIRE(d <= (n + 1) * pitch + 1e-12);
  }
}

TEST_CASE("geometry defaults validate") {
  const SensorGeometry g = SensorGeometry::with_defaults();
  CHECK_NOTHROW(g.validate());
  CHECK(g.layer_separation_h == Approx(0.15));
  CHECK(g.wave_speed[kTopLayer] == Approx(2360.0));
  CHECK(g.wave_speed[kBottomLayer] == Approx(1900.0));
  for (int layer = 0; layer < kLayers; ++layer) {
    // corner sensors, equidistant from the center
    const double r0 = g.sensor_positions[layer][0].norm();
    for (const auto& s : g.sensor_positions[layer])
      CHECK(s.norm() == Approx(r0).epsilon(1e-12));
  }

  SensorGeometry bad = g;
  bad.layer_separation_h = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = g;
  bad.sensor_positions[0][0] = {0.3, 0.3};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("grid layout invariants") {
  GridLayout layout;
  CHECK(layout.pitch() == Approx(150e-6));
  CHECK(layout.nominal_subgrid_resistance() == Approx(402.439).margin(0.001));
  GridLayout bad = layout;
  bad.traces_per_subgrid = 800;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
