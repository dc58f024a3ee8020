#pragma once

// Closed-form reduction of the worst-case ladder: one driven word-line pair
// carrying a crystalline input cell in every row, reduced row by row toward
// the farthest row. Gives the equivalent source resistance and the open-port
// voltage transfer ratio seen by that row, without solving the full network.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "xbar/network.hpp"

namespace xbar {

struct TheveninEquivalent {
  double r_th = 0.0;   // ohms, seen by the last row's cell pair
  double alpha = 1.0;  // open-port voltage divided by the drive voltage
  double v_open(double v_dd) const { return alpha * v_dd; }
};

namespace detail {

inline double parallel(double a, double b) {
  if (std::isinf(a)) return b;
  if (std::isinf(b)) return a;
  double s = a + b;
  return s > 0.0 ? a * b / s : 0.0;
}

// All quantities of the ladder in resolved form. g_out holds the output-cell
// conductance of each row; wires are already stripped of the bit line when
// the scenario says to ignore it.
struct Ladder {
  int n_row = 1;
  int n_column = 1;
  double r_driver = 0.0;
  WireModel wires;
  double r_input = 0.0;  // crystalline input cell of every row
  std::vector<double> g_out;

  double rail_step() const { return wires.ideal_y() ? 0.0 : 2.0 / wires.g_y; }
  double bitline_run() const { return wires.ideal_x() ? 0.0 : n_column / wires.g_x; }
};

inline Ladder make_ladder(const SubarrayGeometry& geom, const PcmCellParams& params,
                          const CornerScenario& scen, WireModel wires) {
  if (geom.n_row < 1 || geom.n_column < 1)
    throw std::invalid_argument("ladder needs at least one row and one column");
  if (!scen.include_bitline) wires.g_x = std::numeric_limits<double>::infinity();
  Ladder lad;
  lad.n_row = geom.n_row;
  lad.n_column = geom.n_column;
  lad.r_driver = geom.r_driver_ohm;
  lad.wires = wires;
  lad.r_input = 1.0 / params.g_crystalline;
  lad.g_out.assign(static_cast<size_t>(geom.n_row),
                   cell_conductance(scen.upstream_outputs, params));
  lad.g_out.back() = cell_conductance(scen.last_row_output, params);
  return lad;
}

// Series resistance of row i's branch between the two word-line rails.
inline double ladder_row_resistance(const Ladder& lad, int i) {
  if (i < 0 || i >= lad.n_row) throw std::out_of_range("row index out of range");
  return lad.bitline_run() + lad.r_input + 1.0 / lad.g_out[static_cast<size_t>(i)];
}

inline TheveninEquivalent reduce_ladder(const Ladder& lad) {
  const int n = lad.n_row;
  const double d = lad.rail_step();

  // Source side folded forward: a[k] = resistance looking back toward the
  // driver from just before row k (rows 0..k-1 absorbed).
  double a = 2.0 * lad.r_driver;
  for (int k = 1; k < n; ++k) a = parallel(ladder_row_resistance(lad, k - 1), a + d);

  TheveninEquivalent eq;
  eq.r_th = d + lad.bitline_run() + a;

  if (n == 1) {
    eq.alpha = 1.0;
    return eq;
  }
  // Load side folded backward: b[j] = resistance looking downstream from just
  // after row j's junction, with the last row's branch removed (open port).
  std::vector<double> b(static_cast<size_t>(n - 1), 0.0);
  b[static_cast<size_t>(n - 2)] = ladder_row_resistance(lad, n - 2);
  for (int j = n - 3; j >= 0; --j)
    b[static_cast<size_t>(j)] = parallel(ladder_row_resistance(lad, j),
                                         b[static_cast<size_t>(j + 1)] + d);
  double denom = b[0] + d + 2.0 * lad.r_driver;
  double v = denom > 0.0 ? b[0] / denom : 1.0;
  for (int j = 1; j <= n - 2; ++j) {
    double bj = b[static_cast<size_t>(j)];
    v *= bj / (bj + d);
  }
  eq.alpha = v;
  return eq;
}

}  // namespace detail

// Series resistance of row i's branch (bit-line run, input cell, output cell)
// under the given worst-case scenario. Row 0 is nearest the driver.
inline double row_resistance(int i, const SubarrayGeometry& geom, const LineConfiguration& cfg,
                             const PcmCellParams& params, const CornerScenario& scen,
                             bool via_aware = false) {
  auto lad = detail::make_ladder(geom, params, scen, WireModel::of(cfg, geom, via_aware));
  return detail::ladder_row_resistance(lad, i);
}

inline TheveninEquivalent thevenin_equivalent(const SubarrayGeometry& geom,
                                              const LineConfiguration& cfg,
                                              const PcmCellParams& params,
                                              const CornerScenario& scen,
                                              bool via_aware = false) {
  return detail::reduce_ladder(
      detail::make_ladder(geom, params, scen, WireModel::of(cfg, geom, via_aware)));
}

// Same reduction with explicit wire conductances (used for ideal-wire limits
// and by the functional simulator's per-row derating).
inline TheveninEquivalent thevenin_equivalent_wires(const SubarrayGeometry& geom,
                                                    const PcmCellParams& params,
                                                    const CornerScenario& scen,
                                                    const WireModel& wires) {
  return detail::reduce_ladder(detail::make_ladder(geom, params, scen, wires));
}

inline double thevenin_resistance(const SubarrayGeometry& geom, const LineConfiguration& cfg,
                                  const PcmCellParams& params, const CornerScenario& scen,
                                  bool via_aware = false) {
  return thevenin_equivalent(geom, cfg, params, scen, via_aware).r_th;
}

inline double thevenin_voltage(const SubarrayGeometry& geom, const LineConfiguration& cfg,
                               const PcmCellParams& params, double v_dd,
                               const CornerScenario& scen, bool via_aware = false) {
  return thevenin_equivalent(geom, cfg, params, scen, via_aware).v_open(v_dd);
}

// First-order droop estimate along one word-line rail when every one of
// n_row rows draws i_row: segment k carries (n_row - k) * i_row, so the
// far-end drop sums to n(n+1)/2 * i / g.
inline double voltage_drop_estimate(int n_row, double i_row, double g_y) {
  if (n_row < 0) throw std::invalid_argument("negative row count");
  if (std::isinf(g_y)) return 0.0;
  return 0.5 * static_cast<double>(n_row) * static_cast<double>(n_row + 1) * i_row / g_y;
}

}  // namespace xbar
