#pragma once

// Shared helpers for the test binaries: repo-relative paths and the
// measurement-based Thevenin port extraction used to cross-check the
// analytic ladder reduction against full network solves.

#include <string>
#include <utility>

#include "xbar/network.hpp"
#include "xbar/thevenin.hpp"

#ifndef XBAR_SOURCE_DIR
#define XBAR_SOURCE_DIR "."
#endif

namespace testsup {

inline std::string repo_path(const std::string& rel) {
  return std::string(XBAR_SOURCE_DIR) + "/" + rel;
}

struct MeasuredPort {
  double r_th = 0.0;
  double alpha = 0.0;
};

// Two-load extraction: solve the corner network with the last row's output
// cell at each of the two phases. With the series load per phase
//   L = 1/g_in + R_bitline + 1/g_out,
// the pair of currents pins down the source seen by the last row:
//   R_hat = (I2*L2 - I1*L1) / (I1 - I2)   (excludes the bit-line run)
//   alpha_hat = I1 * (R_hat + L1) / v_dd.
// The analytic recursion folds the bit-line run into r_th, so R_hat + R_bl
// is directly comparable to TheveninEquivalent::r_th.
inline MeasuredPort measure_port(const xbar::SubarrayGeometry& geom,
                                 const xbar::LineConfiguration& cfg,
                                 const xbar::PcmCellParams& params,
                                 xbar::CornerScenario scen, const xbar::WireModel& wires,
                                 double v_dd = 0.5) {
  using namespace xbar;
  const double rbl = (wires.ideal_x() || !scen.include_bitline)
                         ? 0.0
                         : geom.n_column / wires.g_x;
  auto run = [&](Phase out_phase) {
    CornerScenario s = scen;
    s.last_row_output = out_phase;
    CornerNet cn = build_corner_network(geom, cfg, params, v_dd, s, wires);
    SolveResult sol = solve_network(cn.net);
    double i = last_row_current(cn, sol);
    double load = 1.0 / params.g_crystalline + rbl + 1.0 / cell_conductance(out_phase, params);
    return std::pair<double, double>(i, load);
  };
  auto [i1, l1] = run(Phase::Crystalline);
  auto [i2, l2] = run(Phase::Amorphous);
  double r_hat = (i2 * l2 - i1 * l1) / (i1 - i2);
  MeasuredPort m;
  m.r_th = r_hat + rbl;
  m.alpha = i1 * (r_hat + l1) / v_dd;
  return m;
}

}  // namespace testsup
