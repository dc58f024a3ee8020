#pragma once

// Functional thresholded matrix-vector multiplication on one subarray:
// binary TMVM in analytic and network-oracle modes, effective input-count
// thresholds, multi-bit weight layouts, and energy/area estimates.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "xbar/margin.hpp"
#include "xbar/network.hpp"
#include "xbar/thevenin.hpp"

namespace xbar {

using BitMatrix = std::vector<std::vector<int>>;

// ---------------------------------------------------------------------------
// Subarray state.

struct SubarrayState {
  SubarrayGeometry geometry;
  LineConfiguration config;
  CellMatrix top_cells;     // weights
  CellMatrix bottom_cells;  // outputs

  void validate() const {
    geometry.validate(config);
    auto dims = [&](const CellMatrix& m) {
      if (static_cast<int>(m.size()) != geometry.n_row) return false;
      for (const auto& row : m)
        if (static_cast<int>(row.size()) != geometry.n_column) return false;
      return true;
    };
    if (!dims(top_cells) || !dims(bottom_cells))
      throw std::invalid_argument("cell matrices do not match geometry");
  }
};

inline SubarrayState make_subarray_state(const SubarrayGeometry& geom,
                                         const LineConfiguration& cfg,
                                         Phase fill = Phase::Amorphous) {
  SubarrayState s;
  s.geometry = geom.resolved(cfg);
  s.config = cfg;
  s.top_cells = make_cells(geom.n_row, geom.n_column, fill);
  s.bottom_cells = make_cells(geom.n_row, geom.n_column, Phase::Amorphous);
  return s;
}

// ---------------------------------------------------------------------------
// Execution results.

struct DisturbEvent {
  int row = 0;
  int column = 0;
  bool top_level = false;  // true: weight cell, false: output cell
  double current = 0.0;
  EventFlag event = EventFlag::NoEvent;
};

using DisturbReport = std::vector<DisturbEvent>;

struct TmvmRecord {
  int row = 0;
  double current_sustain = 0.0;    // output-cell current with the cell held crystalline
  double current_delivered = 0.0;  // current at the cell's settled state
  int bit = 0;
};

struct ExecutionTrace {
  double v_dd = 0.0;
  double duration = 0.0;
  int output_column = -1;
  int n_driven = 0;
  std::vector<TmvmRecord> rows;
};

struct TmvmResult {
  std::vector<int> bits;  // one per row
  DisturbReport disturbs;
  ExecutionTrace trace;
};

enum class ExecMode { Analytic, Oracle };

struct ExecOptions {
  std::optional<WireModel> wires;  // default: derived from the configuration
  bool via_aware = false;
  bool require_preset = true;   // target-column outputs must start amorphous
  bool check_weight_disturb = true;
};

// ---------------------------------------------------------------------------
// Parasitic-free dot-product current for one row of the target column:
// the driven inputs' cell conductances sum in parallel against the output
// load. Floated inputs contribute no branch at all.
inline double ideal_dot_current(int row, const SubarrayState& state, const DrivePattern& drive,
                                double g_out, const PcmCellParams& params = {}) {
  if (row < 0 || row >= state.geometry.n_row) throw std::out_of_range("row out of range");
  double s = 0.0;
  int driven = 0;
  for (int c = 0; c < state.geometry.n_column; ++c)
    if (drive.wlt[static_cast<size_t>(c)] == LineState::Driven) {
      ++driven;
      s += cell_conductance(state.top_cells[static_cast<size_t>(row)][static_cast<size_t>(c)],
                            params);
    }
  if (driven == 0) throw std::invalid_argument("no driven input lines");
  return drive.v_dd * s * g_out / (s + g_out);
}

namespace detail {

// Source derating pair for a given output row: the ladder spanning rows
// 0..row with upstream outputs amorphous (preset state) and the row itself
// holding the crystalline sustain load.
inline TheveninEquivalent row_port(int row, const SubarrayGeometry& geom,
                                   const PcmCellParams& params, const WireModel& wires) {
  if (wires.ideal_x() && wires.ideal_y() && geom.r_driver_ohm == 0.0) return {};
  SubarrayGeometry sub = geom;
  sub.n_row = row + 1;
  CornerScenario scen;  // amorphous upstream, crystalline last, bit line kept
  return thevenin_equivalent_wires(sub, params, scen, wires);
}

// Delivered current through the target cell of one row given the parallel
// input conductance s and the output-cell load.
inline double derated_current(const TheveninEquivalent& eq, double v_dd, double s,
                              double g_out) {
  if (s <= 0.0) return 0.0;
  return eq.alpha * v_dd / (eq.r_th + 1.0 / s + 1.0 / g_out);
}

inline void validate_drive_shape(const SubarrayState& state, const DrivePattern& drive) {
  if (static_cast<int>(drive.wlt.size()) != state.geometry.n_column ||
      static_cast<int>(drive.wlb.size()) != state.geometry.n_column ||
      static_cast<int>(drive.bl.size()) != state.geometry.n_row)
    throw std::invalid_argument("drive pattern does not match geometry");
  for (auto s : drive.wlt)
    if (s != LineState::Driven && s != LineState::Floating)
      throw std::invalid_argument("top word lines may only be driven or floated");
  for (auto s : drive.wlb)
    if (s != LineState::Grounded && s != LineState::Floating)
      throw std::invalid_argument("bottom word lines may only be grounded or floated");
  for (auto s : drive.bl)
    if (s != LineState::Connected && s != LineState::Floating)
      throw std::invalid_argument("bit lines may only be active or floated");
}

}  // namespace detail

// Executes one TMVM step against the target column. Output bits follow the
// sustain criterion: the cell switches iff the current with the cell already
// crystalline stays at or above the set current for the pulse duration.
// Currents at or above the reset current are reported as disturbs, as are
// spurious set-level currents through amorphous weight cells.
inline TmvmResult tmvm_execute(const SubarrayState& state, const DrivePattern& drive,
                               ExecMode mode, const PcmCellParams& params = {},
                               const ExecOptions& opt = {}) {
  state.validate();
  detail::validate_drive_shape(state, drive);
  const int R = state.geometry.n_row;
  const int out_col = drive.output_column();

  if (opt.require_preset)
    for (int r = 0; r < R; ++r)
      if (drive.bl[static_cast<size_t>(r)] != LineState::Floating &&
          state.bottom_cells[static_cast<size_t>(r)][static_cast<size_t>(out_col)] !=
              Phase::Amorphous)
        throw std::invalid_argument("output cells must be preset amorphous");

  TmvmResult res;
  res.bits.assign(static_cast<size_t>(R), 0);
  res.trace.v_dd = drive.v_dd;
  res.trace.duration = drive.duration;
  res.trace.output_column = out_col;
  res.trace.n_driven = drive.driven_count();
  res.trace.rows.reserve(static_cast<size_t>(R));

  const WireModel wires =
      opt.wires ? *opt.wires : WireModel::of(state.config, state.geometry, opt.via_aware);
  const bool long_enough_set = drive.duration >= params.t_set;

  if (res.trace.n_driven == 0) {
    // Nothing is driven: no current anywhere, every output stays 0.
    for (int r = 0; r < R; ++r) res.trace.rows.push_back({r, 0.0, 0.0, 0});
    return res;
  }

  auto classify_output = [&](int r, double i_sustain, double i_amorphous) {
    TmvmRecord rec;
    rec.row = r;
    rec.current_sustain = i_sustain;
    rec.bit = (long_enough_set && i_sustain >= params.i_set) ? 1 : 0;
    rec.current_delivered = rec.bit ? i_sustain : i_amorphous;
    res.trace.rows.push_back(rec);
    res.bits[static_cast<size_t>(r)] = rec.bit;
    PulseResult pr = pulse_outcome(Phase::Amorphous, rec.current_delivered, drive.duration, params);
    if (pr.event == EventFlag::ResetEvent)
      res.disturbs.push_back({r, out_col, false, rec.current_delivered, pr.event});
  };

  if (mode == ExecMode::Analytic) {
    std::vector<int> driven_cols;
    for (int c = 0; c < state.geometry.n_column; ++c)
      if (drive.wlt[static_cast<size_t>(c)] == LineState::Driven) driven_cols.push_back(c);
    for (int r = 0; r < R; ++r) {
      if (drive.bl[static_cast<size_t>(r)] == LineState::Floating) {
        res.trace.rows.push_back({r, 0.0, 0.0, 0});
        continue;
      }
      double s = 0.0;
      for (int c : driven_cols)
        s += cell_conductance(
            state.top_cells[static_cast<size_t>(r)][static_cast<size_t>(c)], params);
      TheveninEquivalent eq = detail::row_port(r, state.geometry, params, wires);
      double i_sustain = detail::derated_current(eq, drive.v_dd, s, params.g_crystalline);
      double i_amorph = detail::derated_current(eq, drive.v_dd, s, params.g_amorphous);
      classify_output(r, i_sustain, i_amorph);
      if (opt.check_weight_disturb) {
        // Input cells split the delivered current in proportion to their
        // conductance within the parallel group.
        double i_total = res.trace.rows.back().current_delivered;
        for (int c : driven_cols) {
          Phase ph = state.top_cells[static_cast<size_t>(r)][static_cast<size_t>(c)];
          double ic = i_total * cell_conductance(ph, params) / s;
          PulseResult pr = pulse_outcome(ph, ic, drive.duration, params);
          bool spurious_set = pr.event == EventFlag::SetEvent && ph == Phase::Amorphous;
          if (pr.event == EventFlag::ResetEvent || spurious_set)
            res.disturbs.push_back({r, c, true, ic, pr.event});
        }
      }
    }
    return res;
  }

  // Oracle mode: one exact solve with every in-play output cell held at the
  // crystalline sustain load, then a second solve with the amorphous load to
  // obtain delivered currents for rows that do not switch.
  auto solve_with_outputs = [&](Phase out_phase) {
    CellMatrix bottom = state.bottom_cells;
    for (int r = 0; r < R; ++r) bottom[static_cast<size_t>(r)][static_cast<size_t>(out_col)] = out_phase;
    BuildOptions bopt;
    bopt.wires = wires;
    CrossbarNet cn = build_crossbar_network(state.geometry, state.config, params,
                                            state.top_cells, bottom, drive, bopt);
    SolveResult sol = solve_network(cn.net);
    return std::make_pair(std::move(cn), std::move(sol));
  };
  auto [cn_c, sol_c] = solve_with_outputs(Phase::Crystalline);
  auto [cn_a, sol_a] = solve_with_outputs(Phase::Amorphous);

  for (int r = 0; r < R; ++r) {
    if (drive.bl[static_cast<size_t>(r)] == LineState::Floating) {
      res.trace.rows.push_back({r, 0.0, 0.0, 0});
      continue;
    }
    int bc = cn_c.bottom_branch[static_cast<size_t>(r)][static_cast<size_t>(out_col)];
    int ba = cn_a.bottom_branch[static_cast<size_t>(r)][static_cast<size_t>(out_col)];
    double i_sustain = std::abs(sol_c.branch_currents[static_cast<size_t>(bc)]);
    double i_amorph = std::abs(sol_a.branch_currents[static_cast<size_t>(ba)]);
    classify_output(r, i_sustain, i_amorph);
    if (opt.check_weight_disturb) {
      // Both builds are structurally identical, so branch indices coincide;
      // read currents from the solve matching the row's settled output.
      const SolveResult& sol = res.bits[static_cast<size_t>(r)] ? sol_c : sol_a;
      for (int c = 0; c < state.geometry.n_column; ++c) {
        int tb = cn_c.top_branch[static_cast<size_t>(r)][static_cast<size_t>(c)];
        if (tb < 0) continue;
        Phase ph = state.top_cells[static_cast<size_t>(r)][static_cast<size_t>(c)];
        double ic = std::abs(sol.branch_currents[static_cast<size_t>(tb)]);
        PulseResult pr = pulse_outcome(ph, ic, drive.duration, params);
        bool spurious_set = pr.event == EventFlag::SetEvent && ph == Phase::Amorphous;
        if (pr.event == EventFlag::ResetEvent || spurious_set)
          res.disturbs.push_back({r, c, true, ic, pr.event});
      }
    }
  }
  return res;
}

// Minimum number of active (driven and crystalline) inputs that pushes the
// output current to the set threshold, with the remaining driven inputs
// amorphous. Returns n_driven + 1 when even the all-active pattern falls
// short. Row selects the derating ladder depth; with ideal wires and a zero
// driver resistance the row does not matter.
inline int effective_threshold(double v_dd, int n_driven, const SubarrayGeometry& geom,
                               const LineConfiguration& cfg, const PcmCellParams& params,
                               int row, const std::optional<WireModel>& wires_opt = {}) {
  if (!(v_dd > 0.0)) throw std::invalid_argument("v_dd must be positive");
  if (n_driven < 1) throw std::invalid_argument("need at least one driven input");
  WireModel wires = wires_opt ? *wires_opt : WireModel::of(cfg, geom);
  TheveninEquivalent eq = detail::row_port(row, geom, params, wires);
  for (int k = 0; k <= n_driven; ++k) {
    double s = k * params.g_crystalline + (n_driven - k) * params.g_amorphous;
    if (detail::derated_current(eq, v_dd, s, params.g_crystalline) >= params.i_set) return k;
  }
  return n_driven + 1;
}

// Pure integer reference: bit_r = [count of driven crystalline weights in
// row r >= k_threshold(r)].
inline std::vector<int> reference_tmvm(const SubarrayState& state, const DrivePattern& drive,
                                       const std::vector<int>& k_threshold) {
  if (static_cast<int>(k_threshold.size()) != state.geometry.n_row)
    throw std::invalid_argument("threshold vector does not match row count");
  std::vector<int> bits(static_cast<size_t>(state.geometry.n_row), 0);
  for (int r = 0; r < state.geometry.n_row; ++r) {
    if (drive.bl[static_cast<size_t>(r)] == LineState::Floating) continue;
    int k = 0;
    for (int c = 0; c < state.geometry.n_column; ++c)
      if (drive.wlt[static_cast<size_t>(c)] == LineState::Driven &&
          state.top_cells[static_cast<size_t>(r)][static_cast<size_t>(c)] == Phase::Crystalline)
        ++k;
    bits[static_cast<size_t>(r)] = k >= k_threshold[static_cast<size_t>(r)] ? 1 : 0;
  }
  return bits;
}

// ---------------------------------------------------------------------------
// Multi-bit weight layouts.

enum class MultiBitScheme { AreaEfficient, LowPower };

inline const char* to_string(MultiBitScheme s) {
  return s == MultiBitScheme::AreaEfficient ? "area_efficient" : "low_power";
}

struct MultiBitLayout {
  MultiBitScheme scheme = MultiBitScheme::AreaEfficient;
  int bits = 1;
  int cells_per_element = 1;
  std::vector<double> voltage_multipliers;  // per cell column
  std::vector<int> bit_of_cell;             // weight bit stored in each cell

  double max_multiplier() const {
    double m = 0.0;
    for (double v : voltage_multipliers) m = std::max(m, v);
    return m;
  }
  double max_wlt_voltage(double base_v) const { return base_v * max_multiplier(); }
};

// AreaEfficient: one cell per bit, drive voltage doubled per significance.
// LowPower: one drive voltage, bit k replicated across 2^k adjacent cells.
inline MultiBitLayout multibit_layout(int bits, MultiBitScheme scheme) {
  if (bits < 1 || bits > 30) throw std::invalid_argument("bits out of range");
  MultiBitLayout lay;
  lay.scheme = scheme;
  lay.bits = bits;
  if (scheme == MultiBitScheme::AreaEfficient) {
    lay.cells_per_element = bits;
    for (int k = 0; k < bits; ++k) {
      lay.voltage_multipliers.push_back(static_cast<double>(1u << k));
      lay.bit_of_cell.push_back(k);
    }
  } else {
    lay.cells_per_element = (1 << bits) - 1;
    for (int k = 0; k < bits; ++k)
      for (int copy = 0; copy < (1 << k); ++copy) {
        lay.voltage_multipliers.push_back(1.0);
        lay.bit_of_cell.push_back(k);
      }
  }
  return lay;
}

struct MultiBitFeasibility {
  double max_voltage = 0.0;
  double limit = 5.0;
  bool feasible = true;
};

inline MultiBitFeasibility assess_feasibility(const MultiBitLayout& lay, double base_v,
                                              double limit = 5.0) {
  MultiBitFeasibility f;
  f.max_voltage = lay.max_wlt_voltage(base_v);
  f.limit = limit;
  f.feasible = f.max_voltage <= limit;
  return f;
}

struct MultiBitEnergy {
  double energy_j = 0.0;
  double output_current = 0.0;
};

// Static dissipation of one element evaluation: each cell column drives its
// scaled voltage into the shared output node, the output cell returns the
// summed current to ground at the crystalline sustain load.
inline MultiBitEnergy multibit_element_energy(const MultiBitLayout& lay, std::uint32_t value,
                                              double base_v, const PcmCellParams& params = {},
                                              double duration = 80e-9) {
  if (lay.bits < 31 && value >= (1u << lay.bits))
    throw std::invalid_argument("value does not fit in the layout's bit width");
  double gsum = 0.0, isum = 0.0;
  std::vector<double> g(lay.voltage_multipliers.size(), 0.0);
  for (size_t i = 0; i < g.size(); ++i) {
    bool set = (value >> lay.bit_of_cell[i]) & 1u;
    g[i] = cell_conductance(set ? Phase::Crystalline : Phase::Amorphous, params);
    gsum += g[i];
    isum += g[i] * base_v * lay.voltage_multipliers[i];
  }
  double v_out = isum / (gsum + params.g_crystalline);
  double p = params.g_crystalline * v_out * v_out;
  for (size_t i = 0; i < g.size(); ++i) {
    double dv = base_v * lay.voltage_multipliers[i] - v_out;
    p += g[i] * dv * dv;
  }
  MultiBitEnergy e;
  e.energy_j = p * duration;
  e.output_current = v_out * params.g_crystalline;
  return e;
}

// ---------------------------------------------------------------------------
// Energy and area.

// Source-delivered energy of one executed step: sum of v_dd * I * duration
// over the rows of the target column.
inline double estimate_energy(const ExecutionTrace& trace) {
  double e = 0.0;
  for (const auto& rec : trace.rows)
    e += trace.v_dd * rec.current_delivered * trace.duration;
  return e;
}

// Footprint of one logical weight element under a layout. The geometry must
// have resolved cell dimensions.
inline double estimate_area(const SubarrayGeometry& geom, const MultiBitLayout& lay) {
  if (geom.w_cell_nm <= 0.0 || geom.l_cell_nm <= 0.0)
    throw std::invalid_argument("geometry has unresolved cell dimensions");
  return static_cast<double>(lay.cells_per_element) * geom.w_cell_nm * geom.l_cell_nm;
}

inline double cell_area(const SubarrayGeometry& geom) {
  return estimate_area(geom, multibit_layout(1, MultiBitScheme::AreaEfficient));
}

}  // namespace xbar
