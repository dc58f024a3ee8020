#pragma once

// Multi-subarray fabric: bit-line-to-bit-line and bit-line-to-word-line
// chaining between two subarrays, per-step line-status management, and the
// two-phase schedule that runs a two-layer thresholded NN across the pair.

#include <json.hpp>

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "xbar/compute.hpp"

namespace xbar {

enum class LinkMode { BLtoBL, BLtoWLT };

inline const char* to_string(LinkMode m) {
  return m == LinkMode::BLtoBL ? "bl_to_bl" : "bl_to_wlt";
}

struct FabricLink {
  int source = 0;
  int sink = 1;
  LinkMode mode = LinkMode::BLtoWLT;
  double switch_resistance_ohm = 0.0;  // closed-switch series resistance
};

struct FabricPlan {
  std::vector<SubarrayState> subarrays;
  std::vector<FabricLink> links;
};

inline FabricPlan chain(std::vector<SubarrayState> subarrays, LinkMode mode,
                        double switch_resistance_ohm = 0.0) {
  FabricPlan plan;
  plan.subarrays = std::move(subarrays);
  if (plan.subarrays.empty()) throw std::invalid_argument("chain: no subarrays");
  for (auto& s : plan.subarrays) s.validate();
  for (size_t i = 0; i + 1 < plan.subarrays.size(); ++i) {
    const auto& a = plan.subarrays[i].geometry;
    const auto& b = plan.subarrays[i + 1].geometry;
    if (mode == LinkMode::BLtoBL && a.n_row != b.n_row)
      throw std::invalid_argument("bl_to_bl link needs equal bit-line counts");
    if (mode == LinkMode::BLtoWLT && a.n_row > b.n_column)
      throw std::invalid_argument(
          "bl_to_wlt link needs at least as many sink word lines as source bit lines");
    plan.links.push_back({static_cast<int>(i), static_cast<int>(i + 1), mode,
                          switch_resistance_ohm});
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Per-step line statuses for a linked pair, as drive patterns. The source
// subarray always computes (word lines driven per input, bottom lines float,
// bit lines active into the link). The sink differs by mode:
//   BLtoWLT: sink word lines all carry the link ("active"), sink bit lines
//            all float except the target row which is grounded, sink bottom
//            lines all float; the result lands at the sink's top level.
//   BLtoBL:  sink bit lines all carry the link, sink word lines float, sink
//            bottom lines all float except the output column's, which is
//            grounded; the result lands at the sink's bottom level.

struct LinkedStepDrives {
  DrivePattern source;
  DrivePattern sink;
};

inline LinkedStepDrives linked_step_drives(const FabricPlan& plan, const FabricLink& link,
                                           const std::vector<int>& input_bits, int sink_target,
                                           double v_dd, double duration) {
  const auto& sg = plan.subarrays[static_cast<size_t>(link.source)].geometry;
  const auto& kg = plan.subarrays[static_cast<size_t>(link.sink)].geometry;
  if (static_cast<int>(input_bits.size()) != sg.n_column)
    throw std::invalid_argument("input bit vector does not match source columns");

  LinkedStepDrives d;
  d.source.wlt.assign(static_cast<size_t>(sg.n_column), LineState::Floating);
  for (int c = 0; c < sg.n_column; ++c)
    if (input_bits[static_cast<size_t>(c)]) d.source.wlt[static_cast<size_t>(c)] = LineState::Driven;
  d.source.wlb.assign(static_cast<size_t>(sg.n_column), LineState::Floating);
  d.source.bl.assign(static_cast<size_t>(sg.n_row), LineState::Connected);
  d.source.v_dd = v_dd;
  d.source.duration = duration;

  d.sink.v_dd = v_dd;
  d.sink.duration = duration;
  if (link.mode == LinkMode::BLtoWLT) {
    if (sink_target < 0 || sink_target >= kg.n_row)
      throw std::invalid_argument("sink target row out of range");
    d.sink.wlt.assign(static_cast<size_t>(kg.n_column), LineState::Floating);
    for (int r = 0; r < sg.n_row; ++r)
      d.sink.wlt[static_cast<size_t>(r)] = LineState::Connected;
    d.sink.wlb.assign(static_cast<size_t>(kg.n_column), LineState::Floating);
    d.sink.bl.assign(static_cast<size_t>(kg.n_row), LineState::Floating);
    d.sink.bl[static_cast<size_t>(sink_target)] = LineState::Grounded;
  } else {
    if (sink_target < 0 || sink_target >= kg.n_column)
      throw std::invalid_argument("sink output column out of range");
    d.sink.wlt.assign(static_cast<size_t>(kg.n_column), LineState::Floating);
    d.sink.wlb.assign(static_cast<size_t>(kg.n_column), LineState::Floating);
    d.sink.wlb[static_cast<size_t>(sink_target)] = LineState::Grounded;
    d.sink.bl.assign(static_cast<size_t>(kg.n_row), LineState::Connected);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Linked-step execution.

class FabricDisturbError : public std::runtime_error {
 public:
  int step_index;
  DisturbReport report;
  FabricDisturbError(int step, DisturbReport rep)
      : std::runtime_error("disturb event at step " + std::to_string(step)),
        step_index(step),
        report(std::move(rep)) {}
};

struct LinkedStepResult {
  std::vector<int> bits;  // one per source row: the bit written at the sink
  DisturbReport disturbs;
  ExecutionTrace trace;
};

namespace detail {

// Appends `other` into `base`, returning the node-id offset.
inline int merge_networks(ResistiveNetwork& base, const ResistiveNetwork& other) {
  int offset = base.n_nodes;
  base.n_nodes += other.n_nodes;
  for (const auto& b : other.branches)
    base.branches.push_back({b.a + offset, b.b + offset, b.conductance, b.tag});
  for (const auto& [node, v] : other.sources) base.sources.emplace_back(node + offset, v);
  for (const auto& [node, a] : other.injections) base.injections.emplace_back(node + offset, a);
  return offset;
}

inline int link_edge_node(const CrossbarNet& cn, int row) {
  const auto& nodes = cn.bl_node[static_cast<size_t>(row)];
  if (nodes.empty() || nodes.back() < 0)
    throw std::logic_error("source bit line missing for link");
  return nodes.back();
}

}  // namespace detail

// Runs one chained step: the source subarray's dot-product currents cross
// the link and write cells at the sink. Analytic mode treats every source
// row independently through the parasitic-free chain (link and sink wires
// ideal); Oracle mode solves the merged two-subarray network exactly.
inline LinkedStepResult execute_linked_step(const FabricPlan& plan, const FabricLink& link,
                                            const std::vector<int>& input_bits, int sink_target,
                                            double v_dd, ExecMode mode,
                                            const PcmCellParams& params = {},
                                            const ExecOptions& opt = {},
                                            double duration = 80e-9) {
  const auto& src = plan.subarrays[static_cast<size_t>(link.source)];
  const auto& snk = plan.subarrays[static_cast<size_t>(link.sink)];
  LinkedStepDrives drives =
      linked_step_drives(plan, link, input_bits, sink_target, v_dd, duration);

  const int Rs = src.geometry.n_row;
  LinkedStepResult res;
  res.bits.assign(static_cast<size_t>(Rs), 0);
  res.trace.v_dd = v_dd;
  res.trace.duration = duration;
  res.trace.n_driven = drives.source.driven_count();
  res.trace.output_column = sink_target;
  const bool long_enough = duration >= params.t_set;

  if (res.trace.n_driven == 0) {
    for (int r = 0; r < Rs; ++r) res.trace.rows.push_back({r, 0.0, 0.0, 0});
    return res;
  }

  if (mode == ExecMode::Analytic) {
    for (int r = 0; r < Rs; ++r) {
      double s = 0.0;
      for (int c = 0; c < src.geometry.n_column; ++c)
        if (drives.source.wlt[static_cast<size_t>(c)] == LineState::Driven)
          s += cell_conductance(src.top_cells[static_cast<size_t>(r)][static_cast<size_t>(c)],
                                params);
      // Series path: source inputs in parallel, the link switch, and the
      // sink cell being written, evaluated at the crystalline sustain load.
      double r_series = 1.0 / s + link.switch_resistance_ohm + 1.0 / params.g_crystalline;
      double i_sustain = v_dd / r_series;
      double i_amorph =
          v_dd / (1.0 / s + link.switch_resistance_ohm + 1.0 / params.g_amorphous);
      TmvmRecord rec;
      rec.row = r;
      rec.current_sustain = i_sustain;
      rec.bit = (long_enough && i_sustain >= params.i_set) ? 1 : 0;
      rec.current_delivered = rec.bit ? i_sustain : i_amorph;
      res.trace.rows.push_back(rec);
      res.bits[static_cast<size_t>(r)] = rec.bit;
      PulseResult pr = pulse_outcome(Phase::Amorphous, rec.current_delivered, duration, params);
      if (pr.event == EventFlag::ResetEvent)
        res.disturbs.push_back({r, sink_target, link.mode == LinkMode::BLtoWLT,
                                rec.current_delivered, pr.event});
    }
    return res;
  }

  // Oracle: merge both crossbars and the link switches into one network.
  auto run_with_targets = [&](Phase target_phase) {
    CellMatrix sink_top = snk.top_cells;
    CellMatrix sink_bottom = snk.bottom_cells;
    for (int r = 0; r < Rs; ++r) {
      if (link.mode == LinkMode::BLtoWLT)
        sink_top[static_cast<size_t>(sink_target)][static_cast<size_t>(r)] = target_phase;
      else
        sink_bottom[static_cast<size_t>(r)][static_cast<size_t>(sink_target)] = target_phase;
    }
    BuildOptions bopt;
    bopt.wires = opt.wires ? *opt.wires : WireModel::ideal();
    CrossbarNet a = build_crossbar_network(src.geometry, src.config, params, src.top_cells,
                                           src.bottom_cells, drives.source, bopt);
    CrossbarNet b = build_crossbar_network(snk.geometry, snk.config, params, sink_top,
                                           sink_bottom, drives.sink, bopt);
    // Merging renumbers the sink's nodes by `offset` and appends its
    // branches after the source's, so sink branch indices shift too.
    const int branch_base = static_cast<int>(a.net.branches.size());
    int offset = detail::merge_networks(a.net, b.net);
    double g_switch = link.switch_resistance_ohm > 0.0
                          ? 1.0 / link.switch_resistance_ohm
                          : 1e9;  // effectively ideal closed switch
    for (int r = 0; r < Rs; ++r) {
      int from = detail::link_edge_node(a, r);
      int to = link.mode == LinkMode::BLtoWLT
                   ? b.wlt_contact[static_cast<size_t>(r)]
                   : b.bl_node[static_cast<size_t>(r)].front();
      if (to < 0) throw std::logic_error("sink line missing for link");
      a.net.add_branch(from, to + offset, g_switch, "link:" + std::to_string(r));
    }
    SolveResult sol = solve_network(a.net);
    std::vector<double> currents(static_cast<size_t>(Rs), 0.0);
    for (int r = 0; r < Rs; ++r) {
      int br = link.mode == LinkMode::BLtoWLT
                   ? b.top_branch[static_cast<size_t>(sink_target)][static_cast<size_t>(r)]
                   : b.bottom_branch[static_cast<size_t>(r)][static_cast<size_t>(sink_target)];
      if (br < 0) throw std::logic_error("sink cell branch missing");
      currents[static_cast<size_t>(r)] =
          std::abs(sol.branch_currents[static_cast<size_t>(branch_base + br)]);
    }
    return currents;
  };
  std::vector<double> i_sustain = run_with_targets(Phase::Crystalline);
  std::vector<double> i_amorph = run_with_targets(Phase::Amorphous);
  for (int r = 0; r < Rs; ++r) {
    TmvmRecord rec;
    rec.row = r;
    rec.current_sustain = i_sustain[static_cast<size_t>(r)];
    rec.bit = (long_enough && rec.current_sustain >= params.i_set) ? 1 : 0;
    rec.current_delivered = rec.bit ? rec.current_sustain : i_amorph[static_cast<size_t>(r)];
    res.trace.rows.push_back(rec);
    res.bits[static_cast<size_t>(r)] = rec.bit;
    PulseResult pr = pulse_outcome(Phase::Amorphous, rec.current_delivered, duration, params);
    if (pr.event == EventFlag::ResetEvent)
      res.disturbs.push_back({r, sink_target, link.mode == LinkMode::BLtoWLT,
                              rec.current_delivered, pr.event});
  }
  return res;
}

// ---------------------------------------------------------------------------
// Two-layer NN schedule: hidden phase then output phase, batched by the
// sink's row capacity.

struct NnStep {
  enum class Kind { Hidden, Output };
  Kind kind = Kind::Hidden;
  int batch = 0;
  int image = -1;        // hidden steps: which image this step computes
  int neuron = -1;       // output steps: which output neuron
  int sink_target = 0;   // hidden: sink row; output: sink output column
  std::vector<int> wlt_bits;  // output steps: second-layer weight row
};

struct NnSchedule {
  int n_images = 0;
  int images_per_batch = 0;  // capacity of a full batch
  int n_batches = 0;
  int hidden_steps = 0;
  int output_steps = 0;
  std::vector<NnStep> steps;
};

// weights1: hidden neurons x inputs (first layer); weights2: output neurons x
// hidden neurons. The first layer lives at the source's top cells row-per-
// neuron; hidden bits land at the sink's top level (image row, neuron
// column); the output phase drives the second-layer weights as voltages on
// the sink's word lines, one step per output neuron, all batched images at
// once.
inline NnSchedule schedule_multilayer_nn(const BitMatrix& weights1, const BitMatrix& weights2,
                                         int n_images, const SubarrayGeometry& geom) {
  if (n_images < 1) throw std::invalid_argument("need at least one image");
  if (weights1.empty() || weights2.empty()) throw std::invalid_argument("empty weight matrix");
  const int n_hidden = static_cast<int>(weights1.size());
  const int n_inputs = static_cast<int>(weights1.front().size());
  const int n_out = static_cast<int>(weights2.size());
  for (const auto& row : weights1)
    if (static_cast<int>(row.size()) != n_inputs)
      throw std::invalid_argument("ragged first-layer weights");
  for (const auto& row : weights2)
    if (static_cast<int>(row.size()) != n_hidden)
      throw std::invalid_argument("second-layer width must equal hidden count");
  if (n_hidden > geom.n_row)
    throw std::invalid_argument("hidden layer exceeds source rows");
  if (n_inputs > geom.n_column)
    throw std::invalid_argument("input layer exceeds source columns");
  if (n_hidden > geom.n_column)
    throw std::invalid_argument("hidden layer exceeds sink word lines");
  if (n_out > geom.n_column)
    throw std::invalid_argument("output layer exceeds sink columns");

  NnSchedule sch;
  sch.n_images = n_images;
  sch.images_per_batch = std::min(geom.n_row, n_images);
  sch.n_batches = (n_images + sch.images_per_batch - 1) / sch.images_per_batch;
  for (int b = 0, img = 0; b < sch.n_batches; ++b) {
    int m = std::min(sch.images_per_batch, n_images - img);
    for (int i = 0; i < m; ++i, ++img) {
      NnStep st;
      st.kind = NnStep::Kind::Hidden;
      st.batch = b;
      st.image = img;
      st.sink_target = i;  // sink row holding this image's hidden bits
      sch.steps.push_back(std::move(st));
      ++sch.hidden_steps;
    }
    for (int j = 0; j < n_out; ++j) {
      NnStep st;
      st.kind = NnStep::Kind::Output;
      st.batch = b;
      st.neuron = j;
      st.sink_target = j;  // output column
      st.wlt_bits = weights2[static_cast<size_t>(j)];
      sch.steps.push_back(std::move(st));
      ++sch.output_steps;
    }
  }
  return sch;
}

struct PlanRunResult {
  std::vector<std::vector<int>> hidden;   // [image][hidden neuron]
  std::vector<std::vector<int>> outputs;  // [image][output neuron]
  int steps_executed = 0;
  double energy_j = 0.0;
};

// Executes the two-layer schedule on a two-subarray plan linked BL-to-WLT.
// Aborts with FabricDisturbError at the first step reporting a disturb.
inline PlanRunResult execute_plan(FabricPlan plan, const NnSchedule& schedule,
                                  const std::vector<std::vector<int>>& images, double v_dd,
                                  ExecMode mode, const PcmCellParams& params = {},
                                  const ExecOptions& opt_in = {}) {
  if (plan.subarrays.size() < 2 || plan.links.empty())
    throw std::invalid_argument("plan needs two linked subarrays");
  if (static_cast<int>(images.size()) != schedule.n_images)
    throw std::invalid_argument("image count does not match schedule");
  const FabricLink& link = plan.links.front();
  if (link.mode != LinkMode::BLtoWLT)
    throw std::invalid_argument("two-layer schedule needs a bl_to_wlt link");
  SubarrayState& snk = plan.subarrays[static_cast<size_t>(link.sink)];
  const int n_hidden = plan.subarrays[static_cast<size_t>(link.source)].geometry.n_row;

  ExecOptions opt = opt_in;
  if (!opt.wires) opt.wires = WireModel::ideal();
  opt.require_preset = false;  // the sink accumulates state across steps

  PlanRunResult out;
  out.hidden.assign(images.size(), {});
  out.outputs.assign(images.size(), std::vector<int>(
      static_cast<size_t>(schedule.output_steps / std::max(schedule.n_batches, 1)), 0));

  std::vector<int> batch_images;  // images resident in the sink this batch
  int step_index = 0;
  for (const NnStep& st : schedule.steps) {
    if (st.kind == NnStep::Kind::Hidden) {
      if (st.sink_target == 0) {
        // New batch: clear the sink's hidden storage.
        for (auto& row : snk.top_cells)
          std::fill(row.begin(), row.end(), Phase::Amorphous);
        batch_images.clear();
      }
      LinkedStepResult r =
          execute_linked_step(plan, link, images[static_cast<size_t>(st.image)],
                              st.sink_target, v_dd, mode, params, opt);
      if (!r.disturbs.empty()) throw FabricDisturbError(step_index, r.disturbs);
      out.energy_j += estimate_energy(r.trace);
      auto& hid = out.hidden[static_cast<size_t>(st.image)];
      hid.assign(r.bits.begin(), r.bits.begin() + n_hidden);
      for (int c = 0; c < n_hidden; ++c)
        snk.top_cells[static_cast<size_t>(st.sink_target)][static_cast<size_t>(c)] =
            hid[static_cast<size_t>(c)] ? Phase::Crystalline : Phase::Amorphous;
      batch_images.push_back(st.image);
    } else {
      // Standalone TMVM on the sink: second-layer weights as voltages.
      std::vector<int> driven;
      for (int c = 0; c < static_cast<int>(st.wlt_bits.size()); ++c)
        if (st.wlt_bits[static_cast<size_t>(c)]) driven.push_back(c);
      DrivePattern d = DrivePattern::standard(snk.geometry.n_row, snk.geometry.n_column,
                                              driven, st.sink_target, v_dd);
      // Clear this output column before the step (fresh write target).
      for (auto& row : snk.bottom_cells)
        row[static_cast<size_t>(st.sink_target)] = Phase::Amorphous;
      TmvmResult r = tmvm_execute(snk, d, mode, params, opt);
      if (!r.disturbs.empty()) throw FabricDisturbError(step_index, r.disturbs);
      out.energy_j += estimate_energy(r.trace);
      for (size_t slot = 0; slot < batch_images.size(); ++slot) {
        int img = batch_images[slot];
        out.outputs[static_cast<size_t>(img)][static_cast<size_t>(st.neuron)] =
            r.bits[slot];
      }
    }
    ++step_index;
  }
  out.steps_executed = step_index;
  return out;
}

// ---------------------------------------------------------------------------
// JSON serialization for inspection and replay.

inline nlohmann::json to_json(const NnSchedule& sch) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& st : sch.steps) {
    nlohmann::json j;
    j["kind"] = st.kind == NnStep::Kind::Hidden ? "hidden" : "output";
    j["batch"] = st.batch;
    if (st.image >= 0) j["image"] = st.image;
    if (st.neuron >= 0) j["neuron"] = st.neuron;
    j["sink_target"] = st.sink_target;
    if (!st.wlt_bits.empty()) j["wlt_bits"] = st.wlt_bits;
    steps.push_back(std::move(j));
  }
  return nlohmann::json{{"n_images", sch.n_images},
                        {"images_per_batch", sch.images_per_batch},
                        {"n_batches", sch.n_batches},
                        {"hidden_steps", sch.hidden_steps},
                        {"output_steps", sch.output_steps},
                        {"steps", std::move(steps)}};
}

inline nlohmann::json to_json(const FabricPlan& plan) {
  nlohmann::json links = nlohmann::json::array();
  for (const auto& l : plan.links)
    links.push_back({{"source", l.source},
                     {"sink", l.sink},
                     {"mode", to_string(l.mode)},
                     {"switch_resistance_ohm", l.switch_resistance_ohm}});
  nlohmann::json subs = nlohmann::json::array();
  for (const auto& s : plan.subarrays)
    subs.push_back({{"rows", s.geometry.n_row},
                    {"cols", s.geometry.n_column},
                    {"config", s.config.name}});
  return nlohmann::json{{"subarrays", std::move(subs)}, {"links", std::move(links)}};
}

}  // namespace xbar
