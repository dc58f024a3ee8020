#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "support.hpp"
#include "xbar/margin.hpp"

using namespace xbar;

namespace {

SubarrayGeometry geom_of(int rows, int cols, const LineConfiguration& cfg,
                         double r_driver = 250.0) {
  SubarrayGeometry g;
  g.n_row = rows;
  g.n_column = cols;
  g.r_driver_ohm = r_driver;
  return g.resolved(cfg);
}

}  // namespace

TEST_CASE("parasitic-free window, single driven input") {
  VoltageWindow w = ideal_window(0);
  REQUIRE(w.v_lo == Catch::Approx(0.625).epsilon(1e-12));
  REQUIRE(w.v_hi == Catch::Approx(1.25).epsilon(1e-12));
  REQUIRE(w.valid());
  REQUIRE(w.mid() == Catch::Approx(0.9375).epsilon(1e-12));
  REQUIRE(w.margin() == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
  // The false-set bound is far away at this fan-in; the reset bound governs.
  IdealWindowDetail d = ideal_window_detail(0);
  REQUIRE(d.full_select_reset_bound == Catch::Approx(1.25).epsilon(1e-12));
  REQUIRE(d.false_set_bound > 70.0);
  REQUIRE_THROWS_AS(ideal_window(-1), std::invalid_argument);
}

TEST_CASE("parasitic-free window at 128 driven inputs") {
  IdealWindowDetail d = ideal_window_detail(127);
  REQUIRE(d.v_lo == Catch::Approx(129.0 / 128.0 * 0.3125).epsilon(1e-12));
  REQUIRE(d.window.v_hi == Catch::Approx(129.0 / 128.0 * 0.625).epsilon(1e-12));
  REQUIRE(d.false_set_bound ==
          Catch::Approx((1.0 / 160e-6 + 1.0 / (128.0 * 660e-9)) * 50e-6).epsilon(1e-12));
  REQUIRE(d.false_set_bound > d.window.v_hi);  // reset bound still governs here
}

TEST_CASE("false-set bound takes over at very large fan-in") {
  IdealWindowDetail d = ideal_window_detail(1023);
  REQUIRE(d.false_set_bound < d.full_select_reset_bound);
  REQUIRE(d.window.v_hi == Catch::Approx(d.false_set_bound).epsilon(1e-12));
  REQUIRE(d.window.valid());
}

TEST_CASE("window is valid and lower bound shrinks for every fan-in") {
  double prev_lo = 1e9;
  for (int n = 0; n < 4096; ++n) {
    VoltageWindow w = ideal_window(n);
    REQUIRE(w.valid());
    REQUIRE(w.v_lo < prev_lo);
    REQUIRE(w.v_lo > 0.3125);  // asymptote i_set/g_crystalline
    prev_lo = w.v_lo;
  }
}

TEST_CASE("window values match the independently generated table") {
  std::ifstream in(testsup::repo_path("data/window_golden.csv"));
  REQUIRE(in.good());
  std::string line;
  REQUIRE(std::getline(in, line));  // header
  REQUIRE(line == "n_other,v_lo,v_hi,false_set_bound");
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::getline(ss, tok, ',');
    int n_other = std::stoi(tok);
    std::getline(ss, tok, ',');
    double v_lo = std::stod(tok);
    std::getline(ss, tok, ',');
    double v_hi = std::stod(tok);
    std::getline(ss, tok, ',');
    double false_set = std::stod(tok);
    IdealWindowDetail d = ideal_window_detail(n_other);
    CAPTURE(n_other);
    REQUIRE(d.window.v_lo == Catch::Approx(v_lo).epsilon(1e-9));
    REQUIRE(d.window.v_hi == Catch::Approx(v_hi).epsilon(1e-9));
    REQUIRE(d.false_set_bound == Catch::Approx(false_set).epsilon(1e-9));
    ++rows;
  }
  REQUIRE(rows >= 128);
}

TEST_CASE("zero-parasitic margin limit") {
  PcmCellParams p;
  MarginOptions mo;
  mo.wires = WireModel::ideal();
  for (int id : {1, 2, 3}) {
    LineConfiguration cfg = builtin_line_config(id);
    SubarrayGeometry g = geom_of(256, 256, cfg, 0.0);
    NoiseMarginReport rep = noise_margin(g, cfg, p, mo);
    REQUIRE(rep.r_th == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(rep.alpha_th == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(rep.derated.v_lo == Catch::Approx(0.625).epsilon(1e-12));
    REQUIRE(rep.nm == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("pinned margin values at reference design points") {
  PcmCellParams p;
  LineConfiguration c3 = builtin_line_config(3);
  MarginOptions mo;
  REQUIRE(noise_margin(geom_of(64, 128, c3), c3, p, mo).nm ==
          Catch::Approx(0.612331).epsilon(2e-5));
  REQUIRE(noise_margin(geom_of(128, 128, c3), c3, p, mo).nm ==
          Catch::Approx(0.592460).epsilon(2e-5));
  REQUIRE(noise_margin(geom_of(256, 256, c3), c3, p, mo).nm ==
          Catch::Approx(0.551737).epsilon(2e-5));
  REQUIRE(noise_margin(geom_of(512, 512, c3), c3, p, mo).nm ==
          Catch::Approx(0.466614).epsilon(2e-5));
  REQUIRE(noise_margin(geom_of(1024, 1024, c3), c3, p, mo).nm ==
          Catch::Approx(0.283788).epsilon(2e-5));
  REQUIRE(noise_margin(geom_of(2048, 2048, c3), c3, p, mo).nm ==
          Catch::Approx(-0.113229).epsilon(2e-4));
  // Larger storage cells buy margin back at the same array size.
  SubarrayGeometry relaxed = geom_of(1024, 1024, c3);
  relaxed.l_cell_nm = 208.0;
  REQUIRE(noise_margin(relaxed, c3, p, mo).nm == Catch::Approx(0.348801).epsilon(2e-5));
}

TEST_CASE("margin ignores the column count") {
  PcmCellParams p;
  LineConfiguration c3 = builtin_line_config(3);
  MarginOptions mo;
  double nm128 = noise_margin(geom_of(256, 128, c3), c3, p, mo).nm;
  double nm1024 = noise_margin(geom_of(256, 1024, c3), c3, p, mo).nm;
  // The worst-case path runs down the word lines; the bit-line run is not
  // part of it, so the column count drops out exactly.
  REQUIRE(nm128 == Catch::Approx(nm1024).epsilon(1e-12));
}

TEST_CASE("margin against a measured port") {
  // The derated lower bound must equal the set current pushed through the
  // measured two-load port of the same scenario.
  PcmCellParams p;
  LineConfiguration c3 = builtin_line_config(3);
  SubarrayGeometry g = geom_of(96, 64, c3);
  MarginOptions mo;
  NoiseMarginReport rep = noise_margin(g, c3, p, mo);
  WireModel wires = WireModel::of(c3, g);
  testsup::MeasuredPort m = testsup::measure_port(g, c3, p, mo.scenario, wires);
  double v_min = p.i_set * (m.r_th + 2.0 / p.g_crystalline) / m.alpha;
  REQUIRE(rep.derated.v_lo == Catch::Approx(v_min).epsilon(1e-9));
}

TEST_CASE("region verdict is consistent with the margin sign") {
  PcmCellParams p;
  MarginOptions mo;
  for (int id : {1, 2, 3}) {
    LineConfiguration cfg = builtin_line_config(id);
    for (int rows : {64, 256, 1024, 2048, 4096}) {
      SubarrayGeometry g = geom_of(rows, 128, cfg);
      NoiseMarginReport rep = noise_margin(g, cfg, p, mo);
      Region verdict = classify_region(rep.alpha_th, rep.r_th, p);
      CAPTURE(id, rows, rep.nm);
      REQUIRE((verdict == Region::Acceptable) == (rep.nm >= 0.0));
    }
  }
  REQUIRE(classify_region(0.0, 100.0, p) == Region::Unacceptable);
  REQUIRE(classify_region(-1.0, 100.0, p) == Region::Unacceptable);
  REQUIRE(classify_region(1.0, 0.0, p) == Region::Acceptable);
}

TEST_CASE("sweeps report trends and skip infeasible points") {
  PcmCellParams p;
  LineConfiguration c3 = builtin_line_config(3);
  SubarrayGeometry base = geom_of(256, 128, c3);
  MarginOptions mo;

  SECTION("row count degrades the margin monotonically") {
    auto pts = sweep(SweepAxis::NRow, {64, 128, 256, 512, 1024, 2048}, base, c3, p, mo);
    REQUIRE(pts.size() == 6);
    for (size_t i = 0; i < pts.size(); ++i) {
      REQUIRE(pts[i].ok);
      if (i > 0) REQUIRE(pts[i].report.nm < pts[i - 1].report.nm);
    }
    REQUIRE(pts.back().report.nm < 0.0);
  }
  SECTION("cell length helps, cell width hurts") {
    auto len = sweep(SweepAxis::CellLength, {80, 120, 160, 208, 320}, base, c3, p, mo);
    for (size_t i = 1; i < len.size(); ++i) {
      REQUIRE(len[i].ok);
      REQUIRE(len[i].report.nm > len[i - 1].report.nm);
    }
    auto wid = sweep(SweepAxis::CellWidth, {36, 54, 72, 108}, base, c3, p, mo);
    for (size_t i = 1; i < wid.size(); ++i) {
      REQUIRE(wid[i].ok);
      REQUIRE(wid[i].report.nm < wid[i - 1].report.nm);
    }
  }
  SECTION("sub-pitch cells are skipped with a note") {
    auto pts = sweep(SweepAxis::CellLength, {40, 80}, base, c3, p, mo);
    REQUIRE_FALSE(pts[0].ok);
    REQUIRE(pts[0].note.find("skipped") != std::string::npos);
    REQUIRE(pts[1].ok);
  }
  SECTION("empty grids are rejected") {
    REQUIRE_THROWS_AS(sweep(SweepAxis::NRow, {}, base, c3, p, mo), std::invalid_argument);
  }
}

TEST_CASE("driver resistance sensitivity is monotone") {
  PcmCellParams p;
  LineConfiguration c3 = builtin_line_config(3);
  SubarrayGeometry g = geom_of(1024, 1024, c3);
  g.l_cell_nm = 208.0;
  auto table = driver_sensitivity(g, c3, p, {0.0, 100.0, 250.0, 500.0, 1000.0});
  REQUIRE(table.size() == 5);
  for (size_t i = 1; i < table.size(); ++i) {
    REQUIRE(table[i].first > table[i - 1].first);
    REQUIRE(table[i].second < table[i - 1].second);
  }
  // The pinned calibration point sits in the middle of the table.
  REQUIRE(table[2].first == Catch::Approx(250.0));
  REQUIRE(table[2].second == Catch::Approx(0.348801).epsilon(2e-5));
}

TEST_CASE("configuration dominance at a shared design point") {
  PcmCellParams p;
  MarginOptions mo;
  LineConfiguration c1 = builtin_line_config(1);
  LineConfiguration c2 = builtin_line_config(2);
  LineConfiguration c3 = builtin_line_config(3);
  // Compare at a cell size that is legal for all three allocations.
  for (int rows : {64, 256, 1024}) {
    SubarrayGeometry g;
    g.n_row = rows;
    g.n_column = 128;
    g.w_cell_nm = 48.0;
    g.l_cell_nm = 80.0;
    double nm1 = noise_margin(g, c1, p, mo).nm;
    double nm2 = noise_margin(g, c2, p, mo).nm;
    double nm3 = noise_margin(g, c3, p, mo).nm;
    CAPTURE(rows);
    REQUIRE(nm3 >= nm2);
    REQUIRE(nm2 >= nm1);
  }
}
