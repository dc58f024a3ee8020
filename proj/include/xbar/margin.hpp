#pragma once

// Safe operating-voltage windows and noise margins. The parasitic-free window
// comes from closed-form current bounds; the wire-loaded window derates the
// set threshold through the worst-case ladder reduction, and the margin
// combines the derated lower bound with the parasitic-free upper bound.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "xbar/thevenin.hpp"

namespace xbar {

struct VoltageWindow {
  double v_lo = 0.0;
  double v_hi = 0.0;
  bool valid() const { return v_hi >= v_lo; }
  double mid() const { return 0.5 * (v_lo + v_hi); }
  // Dimensionless width-over-midpoint margin; negative when the window is
  // inverted (lower bound above upper bound).
  double margin() const { return (v_hi - v_lo) / mid(); }
};

// Parasitic-free window for one thresholded output with n_other driven
// inputs besides the strongest one (so n_other + 1 inputs are driven).
//   lower: the fully selected input pattern must reach the set current;
//   upper: that pattern must not reach the reset current, and the fully
//          deselected pattern must not falsely reach the set current.
struct IdealWindowDetail {
  double v_lo = 0.0;
  double full_select_reset_bound = 0.0;
  double false_set_bound = 0.0;
  VoltageWindow window;
};

inline IdealWindowDetail ideal_window_detail(int n_other,
                                             const PcmCellParams& params = {}) {
  if (n_other < 0) throw std::invalid_argument("negative driven-input count");
  const double n1 = static_cast<double>(n_other) + 1.0;
  const double gc = params.g_crystalline, ga = params.g_amorphous;
  IdealWindowDetail d;
  d.v_lo = (n1 + 1.0) / n1 * params.i_set / gc;
  d.full_select_reset_bound = (n1 + 1.0) / n1 * params.i_reset / gc;
  d.false_set_bound = (n1 * ga + gc) / (n1 * ga * gc) * params.i_set;
  d.window = {d.v_lo, std::min(d.full_select_reset_bound, d.false_set_bound)};
  return d;
}

inline VoltageWindow ideal_window(int n_other, const PcmCellParams& params = {}) {
  return ideal_window_detail(n_other, params).window;
}

struct MarginOptions {
  CornerScenario scenario;   // include_bitline flipped to false below
  int v_max_inputs = 0;      // parasitic-free upper bound evaluated at this n_other
  bool via_aware = false;
  std::optional<WireModel> wires;  // override the config-derived wire model

  MarginOptions() { scenario.include_bitline = false; }
};

struct NoiseMarginReport {
  double r_th = 0.0;
  double alpha_th = 1.0;
  VoltageWindow ideal;    // parasitic-free window at v_max_inputs
  VoltageWindow derated;  // wire-loaded [V'_min, V'_max] at the farthest row
  VoltageWindow combined; // [derated.v_lo, ideal.v_hi]
  double v_mid = 0.0;
  double nm = 0.0;        // (v_hi - v_lo) / v_mid of the combined window
};

namespace detail {

inline TheveninEquivalent margin_port(const SubarrayGeometry& geom, const LineConfiguration& cfg,
                                      const PcmCellParams& params, const MarginOptions& opts) {
  // make_ladder drops the bit-line term itself when the scenario says so.
  WireModel wires = opts.wires ? *opts.wires : WireModel::of(cfg, geom, opts.via_aware);
  return thevenin_equivalent_wires(geom, params, opts.scenario, wires);
}

inline VoltageWindow derated_window(const TheveninEquivalent& eq, const PcmCellParams& params) {
  if (!(eq.alpha > 0.0))
    return {std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
  const double gc = params.g_crystalline, ga = params.g_amorphous;
  double v_min = params.i_set * (eq.r_th + 2.0 / gc) / eq.alpha;
  double v_max_reset = params.i_reset * (eq.r_th + 2.0 / gc) / eq.alpha;
  double v_max_false_set = params.i_set * (eq.r_th + 1.0 / ga + 1.0 / gc) / eq.alpha;
  return {v_min, std::min(v_max_reset, v_max_false_set)};
}

}  // namespace detail

// Wire-loaded safe window [V'_min, V'_max] for the farthest output.
inline VoltageWindow last_row_window(const SubarrayGeometry& geom, const LineConfiguration& cfg,
                                     const PcmCellParams& params,
                                     const MarginOptions& opts = {}) {
  return detail::derated_window(detail::margin_port(geom, cfg, params, opts), params);
}

inline NoiseMarginReport noise_margin(const SubarrayGeometry& geom, const LineConfiguration& cfg,
                                      const PcmCellParams& params,
                                      const MarginOptions& opts = {}) {
  TheveninEquivalent eq = detail::margin_port(geom, cfg, params, opts);
  NoiseMarginReport rep;
  rep.r_th = eq.r_th;
  rep.alpha_th = eq.alpha;
  rep.ideal = ideal_window(opts.v_max_inputs, params);
  rep.derated = detail::derated_window(eq, params);
  rep.combined = {rep.derated.v_lo, rep.ideal.v_hi};
  rep.v_mid = rep.combined.mid();
  rep.nm = rep.combined.margin();
  return rep;
}

enum class Region { Acceptable, Unacceptable };

// Verdict in the (alpha, r_th) plane: the derated set threshold must fit
// under the parasitic-free upper bound. Never throws; alpha <= 0 means no
// usable signal reaches the output.
inline Region classify_region(double alpha_th, double r_th, const PcmCellParams& params = {},
                              int n_other = 0) {
  if (!(alpha_th > 0.0)) return Region::Unacceptable;
  double v_min = params.i_set * (r_th + 2.0 / params.g_crystalline) / alpha_th;
  return v_min <= ideal_window(n_other, params).v_hi ? Region::Acceptable
                                                     : Region::Unacceptable;
}

// ---------------------------------------------------------------------------
// Parameter sweeps.

enum class SweepAxis { NRow, NColumn, CellLength, CellWidth, DriverResistance };

inline const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::NRow: return "n_row";
    case SweepAxis::NColumn: return "n_column";
    case SweepAxis::CellLength: return "l_cell";
    case SweepAxis::CellWidth: return "w_cell";
    case SweepAxis::DriverResistance: return "r_driver";
  }
  return "?";
}

struct SweepPoint {
  double value = 0.0;
  bool ok = false;
  std::string note;
  NoiseMarginReport report;
};

inline std::vector<SweepPoint> sweep(SweepAxis axis, const std::vector<double>& values,
                                     SubarrayGeometry base, const LineConfiguration& cfg,
                                     const PcmCellParams& params,
                                     const MarginOptions& opts = {}) {
  if (values.empty()) throw std::invalid_argument("sweep: empty value list");
  std::vector<SweepPoint> out;
  out.reserve(values.size());
  for (double v : values) {
    SweepPoint pt;
    pt.value = v;
    SubarrayGeometry geom = base;
    try {
      switch (axis) {
        case SweepAxis::NRow: geom.n_row = static_cast<int>(v); break;
        case SweepAxis::NColumn: geom.n_column = static_cast<int>(v); break;
        case SweepAxis::CellLength: geom.l_cell_nm = v; break;
        case SweepAxis::CellWidth: geom.w_cell_nm = v; break;
        case SweepAxis::DriverResistance: geom.r_driver_ohm = v; break;
      }
      geom = geom.resolved(cfg);
      geom.validate(cfg);
      pt.report = noise_margin(geom, cfg, params, opts);
      pt.ok = true;
    } catch (const std::exception& e) {
      pt.ok = false;
      pt.note = std::string("skipped: ") + e.what();
    }
    out.push_back(std::move(pt));
  }
  return out;
}

// Margin as a function of the contact/driver resistance, for documenting how
// sensitive a design point is to that parameter.
inline std::vector<std::pair<double, double>> driver_sensitivity(
    SubarrayGeometry geom, const LineConfiguration& cfg, const PcmCellParams& params,
    const std::vector<double>& r_values, const MarginOptions& opts = {}) {
  std::vector<std::pair<double, double>> out;
  out.reserve(r_values.size());
  for (double r : r_values) {
    geom.r_driver_ohm = r;
    out.emplace_back(r, noise_margin(geom, cfg, params, opts).nm);
  }
  return out;
}

}  // namespace xbar
