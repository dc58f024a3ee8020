#include <catch2/catch_amalgamated.hpp>

#include "xbar/interconnect.hpp"

using namespace xbar;

TEST_CASE("metal table holds the full stack") {
  const MetalTable& t = MetalTable::asap7();
  REQUIRE(t.metals.size() == 9);
  REQUIRE(t.vias.size() == 8);
  const auto& m1 = t.layer("M1");
  REQUIRE(m1.thickness_nm == Catch::Approx(36.0));
  REQUIRE(m1.min_width_nm == Catch::Approx(18.0));
  REQUIRE(m1.min_spacing_nm == Catch::Approx(18.0));
  REQUIRE(m1.resistivity_ohm_nm == Catch::Approx(43.2));
  const auto& m9 = t.layer("M9");
  REQUIRE(m9.thickness_nm == Catch::Approx(80.0));
  REQUIRE(m9.resistivity_ohm_nm == Catch::Approx(28.8));
  REQUIRE(t.via_between(1, 2).resistance_ohm == Catch::Approx(17.0));
  REQUIRE(t.via_between(4, 5).resistance_ohm == Catch::Approx(12.0));
  REQUIRE(t.via_between(8, 9).resistance_ohm == Catch::Approx(6.0));
  REQUIRE_THROWS_AS(t.layer("M10"), std::invalid_argument);
  REQUIRE_THROWS_AS(t.via_between(1, 3), std::invalid_argument);
}

TEST_CASE("segment conductance formula") {
  const auto& m1 = MetalTable::asap7().layer("M1");
  // G = t*W/(rho*L): 36*18/(43.2*36) = 0.41666... S, i.e. 2.4 ohm.
  double g = metal_segment_conductance(m1, 36.0, 18.0);
  REQUIRE(g == Catch::Approx(36.0 * 18.0 / (43.2 * 36.0)).epsilon(1e-12));
  REQUIRE(1.0 / g == Catch::Approx(2.4).epsilon(1e-12));
  // Doubling length halves conductance; doubling width doubles it.
  REQUIRE(metal_segment_conductance(m1, 72.0, 18.0) == Catch::Approx(g / 2.0));
  REQUIRE(metal_segment_conductance(m1, 36.0, 36.0) == Catch::Approx(g * 2.0));
  REQUIRE_THROWS_AS(metal_segment_conductance(m1, 0.0, 18.0), std::invalid_argument);
  REQUIRE_THROWS_AS(metal_segment_conductance(m1, 36.0, 17.0), std::invalid_argument);
}

TEST_CASE("built-in line configurations and their pitches") {
  LineConfiguration c1 = builtin_line_config(1);
  LineConfiguration c2 = builtin_line_config(2);
  LineConfiguration c3 = builtin_line_config(3);
  REQUIRE_NOTHROW(c1.validate());
  REQUIRE_NOTHROW(c2.validate());
  REQUIRE_NOTHROW(c3.validate());
  REQUIRE_THROWS_AS(builtin_line_config(4), std::invalid_argument);

  CellPitch p1 = min_cell_pitch(c1);
  REQUIRE(p1.w_min_nm == Catch::Approx(36.0));
  REQUIRE(p1.l_min_nm == Catch::Approx(36.0));
  CellPitch p2 = min_cell_pitch(c2);
  REQUIRE(p2.w_min_nm == Catch::Approx(48.0));  // bit lines reach M5 (24+24)
  REQUIRE(p2.l_min_nm == Catch::Approx(80.0));  // word lines reach M8/M9 (40+40)
  CellPitch p3 = min_cell_pitch(c3);
  REQUIRE(p3.w_min_nm == Catch::Approx(36.0));  // bit line stays on M2
  REQUIRE(p3.l_min_nm == Catch::Approx(80.0));
}

TEST_CASE("line configuration validation") {
  LineConfiguration bad{"dup", {"M3"}, {"M3"}, {"M1"}};
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  LineConfiguration unknown{"unknown", {"M12"}, {"M2"}, {"M1"}};
  REQUIRE_THROWS_AS(unknown.validate(), std::invalid_argument);
  LineConfiguration empty{"empty", {}, {"M2"}, {"M1"}};
  REQUIRE_THROWS_AS(empty.validate(), std::invalid_argument);
  // Top/bottom word lines must be electrically identical.
  LineConfiguration lopsided{"lopsided", {"M3", "M8"}, {"M2"}, {"M1"}};
  REQUIRE_THROWS_AS(lopsided.validate(), std::invalid_argument);
  // Different layer names with matching electrical profiles are fine (M8/M9).
  LineConfiguration paired{"paired", {"M3", "M8"}, {"M2"}, {"M1", "M9"}};
  REQUIRE_NOTHROW(paired.validate());
}

TEST_CASE("geometry resolution fills configuration minima") {
  LineConfiguration c3 = builtin_line_config(3);
  SubarrayGeometry g;
  g.n_row = 64;
  g.n_column = 128;
  SubarrayGeometry r = g.resolved(c3);
  REQUIRE(r.w_cell_nm == Catch::Approx(36.0));
  REQUIRE(r.l_cell_nm == Catch::Approx(80.0));
  REQUIRE(r.r_driver_ohm == Catch::Approx(250.0));

  SubarrayGeometry small = g;
  small.l_cell_nm = 60.0;  // below the 80 nm word-line pitch of config 3
  REQUIRE_THROWS_AS(small.resolved(c3), std::invalid_argument);
  SubarrayGeometry degenerate = g;
  degenerate.n_row = 0;
  REQUIRE_THROWS_AS(degenerate.resolved(c3), std::invalid_argument);
  SubarrayGeometry neg = g;
  neg.r_driver_ohm = -1.0;
  REQUIRE_THROWS_AS(neg.resolved(c3), std::invalid_argument);
}

TEST_CASE("config 1 segment conductances at minimum pitch") {
  LineConfiguration c1 = builtin_line_config(1);
  SubarrayGeometry g;
  g.n_row = 4;
  g.n_column = 4;
  SubarrayGeometry r = g.resolved(c1);
  SegmentConductances s = line_config_conductances(c1, r);
  // Word line on M3: length = w_cell = 36, usable width = 36 - 18 = 18.
  double expect_y = 36.0 * 18.0 / (43.2 * 36.0);
  REQUIRE(s.g_y == Catch::Approx(expect_y).epsilon(1e-12));
  // Bit line on M2: length = l_cell = 36, same usable width.
  REQUIRE(s.g_x == Catch::Approx(expect_y).epsilon(1e-12));
}

TEST_CASE("wider cells give proportionally stronger word lines") {
  LineConfiguration c3 = builtin_line_config(3);
  SubarrayGeometry g;
  g.n_row = 4;
  g.n_column = 4;
  SubarrayGeometry base = g.resolved(c3);
  SubarrayGeometry fat = base;
  fat.l_cell_nm = 160.0;
  SegmentConductances s0 = line_config_conductances(c3, base);
  SegmentConductances s1 = line_config_conductances(c3, fat);
  // Longer cells widen word lines (much higher g_y) but lengthen the
  // bit-line run per cell (lower g_x).
  REQUIRE(s1.g_y > s0.g_y);
  REQUIRE(s1.g_x < s0.g_x);
  // Taller cells lengthen word-line segments instead.
  SubarrayGeometry tall = base;
  tall.w_cell_nm = 72.0;
  SegmentConductances s2 = line_config_conductances(c3, tall);
  REQUIRE(s2.g_y < s0.g_y);
  REQUIRE(s2.g_x > s0.g_x);
}

TEST_CASE("via-aware mode penalizes stacked layers only") {
  SubarrayGeometry g;
  g.n_row = 4;
  g.n_column = 4;

  LineConfiguration c1 = builtin_line_config(1);
  SubarrayGeometry r1 = g.resolved(c1);
  SegmentConductances plain1 = line_config_conductances(c1, r1, false);
  SegmentConductances via1 = line_config_conductances(c1, r1, true);
  // Single-layer lines have no stitches to pay for.
  REQUIRE(via1.g_x == Catch::Approx(plain1.g_x).epsilon(1e-12));
  REQUIRE(via1.g_y == Catch::Approx(plain1.g_y).epsilon(1e-12));

  LineConfiguration c3 = builtin_line_config(3);
  SubarrayGeometry r3 = g.resolved(c3);
  SegmentConductances plain3 = line_config_conductances(c3, r3, false);
  SegmentConductances via3 = line_config_conductances(c3, r3, true);
  REQUIRE(via3.g_y < plain3.g_y);
  // The home layer never pays a chain, so it bounds the result from below.
  double home_only = metal_segment_conductance(MetalTable::asap7().layer("M3"), 36.0, 40.0);
  REQUIRE(via3.g_y > home_only);
  // Config 3 keeps its bit line on a single layer.
  REQUIRE(via3.g_x == Catch::Approx(plain3.g_x).epsilon(1e-12));
}

TEST_CASE("multi-layer word lines beat single-layer ones") {
  SubarrayGeometry g;
  g.n_row = 4;
  g.n_column = 4;
  LineConfiguration c1 = builtin_line_config(1);
  LineConfiguration c3 = builtin_line_config(3);
  // Compare at the same cell footprint (config 3 minimum covers both).
  SubarrayGeometry r = g.resolved(c3);
  SegmentConductances s1 = line_config_conductances(c1, r);
  SegmentConductances s3 = line_config_conductances(c3, r);
  REQUIRE(s3.g_y > s1.g_y);
}
