#pragma once

// Brute-force resistive-network ground truth. Assembles the full wire/cell
// network of a subarray under a drive pattern and solves the nodal system
// exactly (sparse LDLT plus iterative refinement).

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "xbar/device.hpp"
#include "xbar/interconnect.hpp"

namespace xbar {

// ---------------------------------------------------------------------------
// Wire model: per-segment conductances, infinity() meaning a perfect wire
// (the builder then merges all nodes of that line into one).

struct WireModel {
  double g_x = std::numeric_limits<double>::infinity();
  double g_y = std::numeric_limits<double>::infinity();

  bool ideal_x() const { return std::isinf(g_x); }
  bool ideal_y() const { return std::isinf(g_y); }

  static WireModel ideal() { return {}; }

  static WireModel of(const LineConfiguration& cfg, const SubarrayGeometry& geom,
                      bool via_aware = false, const MetalTable& table = MetalTable::asap7()) {
    SegmentConductances s = line_config_conductances(cfg, geom, via_aware, table);
    return {s.g_x, s.g_y};
  }
};

// ---------------------------------------------------------------------------
// Raw network representation and solver.

struct Branch {
  int a;
  int b;
  double conductance;
  std::string tag;
};

struct ResistiveNetwork {
  int n_nodes = 0;
  std::vector<Branch> branches;
  std::vector<std::pair<int, double>> sources;  // (node, fixed voltage)
  std::vector<std::pair<int, double>> injections;  // (node, amperes in)

  int new_node() { return n_nodes++; }

  int add_branch(int a, int b, double g, std::string tag = {}) {
    if (a < 0 || b < 0 || a >= n_nodes || b >= n_nodes || a == b)
      throw std::invalid_argument("branch endpoints invalid");
    if (!(g > 0.0)) throw std::invalid_argument("branch conductance must be positive");
    branches.push_back({a, b, g, std::move(tag)});
    return static_cast<int>(branches.size()) - 1;
  }

  void add_source(int node, double volts) { sources.emplace_back(node, volts); }
  void add_injection(int node, double amps) { injections.emplace_back(node, amps); }

  int find_branch(const std::string& tag) const {
    for (int i = 0; i < static_cast<int>(branches.size()); ++i)
      if (branches[i].tag == tag) return i;
    return -1;
  }
};

struct SolveResult {
  std::vector<double> node_voltages;
  std::vector<double> branch_currents;  // positive a -> b
  double residual_norm = 0.0;
};

class SingularNetworkError : public std::runtime_error {
 public:
  std::vector<int> floating_nodes;
  explicit SingularNetworkError(std::vector<int> nodes)
      : std::runtime_error("singular network: " + std::to_string(nodes.size()) +
                           " node(s) have no path to a source"),
        floating_nodes(std::move(nodes)) {}
};

inline SolveResult solve_network(const ResistiveNetwork& net) {
  if (net.sources.empty())
    throw std::invalid_argument("network has no voltage source");

  // Connectivity check: every node must reach some source through branches.
  std::vector<int> parent(net.n_nodes);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& b : net.branches) parent[find(b.a)] = find(b.b);
  std::vector<char> root_has_source(net.n_nodes, 0);
  for (const auto& [node, v] : net.sources) root_has_source[find(node)] = 1;
  std::vector<int> floating;
  for (int n = 0; n < net.n_nodes; ++n)
    if (!root_has_source[find(n)]) floating.push_back(n);
  if (!floating.empty()) throw SingularNetworkError(std::move(floating));

  std::vector<double> fixed(net.n_nodes, 0.0);
  std::vector<char> is_fixed(net.n_nodes, 0);
  for (const auto& [node, v] : net.sources) {
    fixed[node] = v;
    is_fixed[node] = 1;
  }

  std::vector<int> unknown_index(net.n_nodes, -1);
  std::vector<int> unknown_nodes;
  for (int n = 0; n < net.n_nodes; ++n)
    if (!is_fixed[n]) {
      unknown_index[n] = static_cast<int>(unknown_nodes.size());
      unknown_nodes.push_back(n);
    }
  const int m = static_cast<int>(unknown_nodes.size());

  SolveResult result;
  result.node_voltages = fixed;

  if (m > 0) {
    Eigen::SparseMatrix<double> A(m, m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(net.branches.size() * 4 + m);
    for (const auto& b : net.branches) {
      int ia = unknown_index[b.a], ib = unknown_index[b.b];
      if (ia >= 0) trips.emplace_back(ia, ia, b.conductance);
      if (ib >= 0) trips.emplace_back(ib, ib, b.conductance);
      if (ia >= 0 && ib >= 0) {
        trips.emplace_back(ia, ib, -b.conductance);
        trips.emplace_back(ib, ia, -b.conductance);
      } else if (ia >= 0) {
        rhs[ia] += b.conductance * fixed[b.b];
      } else if (ib >= 0) {
        rhs[ib] += b.conductance * fixed[b.a];
      }
    }
    for (const auto& [node, amps] : net.injections) {
      int i = unknown_index[node];
      if (i >= 0) rhs[i] += amps;
    }
    A.setFromTriplets(trips.begin(), trips.end());

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    solver.compute(A);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("network solve failed (factorization)");
    Eigen::VectorXd x = solver.solve(rhs);

    // Mixed-precision iterative refinement: accumulating the residual in
    // long double lets the correction steps push the *forward* error of the
    // node voltages toward machine epsilon instead of stalling near
    // kappa(A)*epsilon. Amorphous cells next to metal segments make these
    // systems stiff (conductances span ~8 orders of magnitude), and the
    // port-extraction consumers compare against analytic values at 1e-9
    // relative, so plain double residuals are not enough.
    double bnorm = std::max(rhs.norm(), 1e-300);
    Eigen::VectorXd r(m);
    auto extended_residual = [&]() {
      std::vector<long double> acc(static_cast<size_t>(m));
      for (int i = 0; i < m; ++i) acc[static_cast<size_t>(i)] = rhs[i];
      for (int k = 0; k < A.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
          acc[static_cast<size_t>(it.row())] -=
              static_cast<long double>(it.value()) * static_cast<long double>(x[it.col()]);
      for (int i = 0; i < m; ++i) r[i] = static_cast<double>(acc[static_cast<size_t>(i)]);
      return r.norm() / bnorm;
    };
    for (int pass = 0; pass < 10; ++pass) {
      if (extended_residual() < 1e-16) break;
      Eigen::VectorXd dx = solver.solve(r);
      x += dx;
      double xnorm = std::max(x.norm(), 1e-300);
      if (dx.norm() / xnorm < 1e-16) break;
    }
    result.residual_norm = extended_residual();
    for (int i = 0; i < m; ++i) result.node_voltages[unknown_nodes[i]] = x[i];
  }

  result.branch_currents.reserve(net.branches.size());
  for (const auto& b : net.branches)
    result.branch_currents.push_back(
        b.conductance * (result.node_voltages[b.a] - result.node_voltages[b.b]));
  return result;
}

// Largest net nodal-current imbalance over non-source, non-injection nodes.
inline double kcl_residual(const ResistiveNetwork& net, const SolveResult& r) {
  std::vector<double> inflow(net.n_nodes, 0.0);
  std::vector<char> skip(net.n_nodes, 0);
  for (const auto& [node, v] : net.sources) skip[node] = 1;
  for (const auto& [node, a] : net.injections) skip[node] = 1;
  double scale = 0.0;
  for (size_t i = 0; i < net.branches.size(); ++i) {
    const auto& b = net.branches[i];
    inflow[b.a] -= r.branch_currents[i];
    inflow[b.b] += r.branch_currents[i];
    scale = std::max(scale, std::abs(r.branch_currents[i]));
  }
  double worst = 0.0;
  for (int n = 0; n < net.n_nodes; ++n)
    if (!skip[n]) worst = std::max(worst, std::abs(inflow[n]));
  return scale > 0.0 ? worst / scale : worst;
}

// Plain-text netlist: one "a b conductance tag" line per branch, then sources.
inline void dump_netlist(const ResistiveNetwork& net, std::ostream& os) {
  os << "# nodes " << net.n_nodes << "\n";
  for (const auto& b : net.branches) {
    os << b.a << " " << b.b << " " << b.conductance;
    if (!b.tag.empty()) os << " " << b.tag;
    os << "\n";
  }
  for (const auto& [node, v] : net.sources) os << "V " << node << " " << v << "\n";
}

// ---------------------------------------------------------------------------
// Drive patterns and cell matrices.

enum class LineState { Driven, Grounded, Connected, Floating };

using CellMatrix = std::vector<std::vector<Phase>>;

inline CellMatrix make_cells(int n_row, int n_column, Phase fill = Phase::Amorphous) {
  return CellMatrix(static_cast<size_t>(n_row),
                    std::vector<Phase>(static_cast<size_t>(n_column), fill));
}

struct DrivePattern {
  std::vector<LineState> wlt;  // one per column: Driven or Floating
  std::vector<LineState> wlb;  // one per column: Grounded or Floating
  std::vector<LineState> bl;   // one per row: Connected, Grounded, or Floating
  double v_dd = 0.0;
  double duration = 80e-9;

  static DrivePattern standard(int n_row, int n_column, const std::vector<int>& driven_inputs,
                               int output_column, double v_dd, double duration = 80e-9) {
    DrivePattern d;
    d.wlt.assign(n_column, LineState::Floating);
    d.wlb.assign(n_column, LineState::Floating);
    d.bl.assign(n_row, LineState::Connected);
    for (int c : driven_inputs) d.wlt.at(c) = LineState::Driven;
    d.wlb.at(output_column) = LineState::Grounded;
    d.v_dd = v_dd;
    d.duration = duration;
    return d;
  }

  int output_column() const {
    int found = -1;
    for (int c = 0; c < static_cast<int>(wlb.size()); ++c)
      if (wlb[c] == LineState::Grounded) {
        if (found >= 0) throw std::invalid_argument("drive: more than one grounded bottom line");
        found = c;
      }
    if (found < 0) throw std::invalid_argument("drive: no grounded bottom line");
    return found;
  }

  int driven_count() const {
    int n = 0;
    for (auto s : wlt) n += (s == LineState::Driven);
    return n;
  }
};

// ---------------------------------------------------------------------------
// Full rectangular crossbar builder.
//
// Physical node layout per line:
//   word line (top/bottom), column c: contact node (driver side, before row 0)
//     then one node per row crossing; segments of g_y between consecutive
//     nodes, so row i sits i+1 segments from the contact.
//   bit line, row r: one node per column crossing, segments of g_x.
// Floated lines are removed together with every cell branch that lands on
// them. With ideal wires a line collapses to a single node.

enum class OtsMode { AssumeOn, Explicit };

struct BuildOptions {
  WireModel wires;
  OtsMode ots = OtsMode::AssumeOn;
  OtsParams ots_params;
  bool include_driver_resistance = true;
};

struct CrossbarNet {
  ResistiveNetwork net;
  int ground = -1;
  int supply = -1;
  // -1 where a line or cell is absent.
  std::vector<std::vector<int>> wlt_node;  // [column][row]
  std::vector<std::vector<int>> wlb_node;  // [column][row]
  std::vector<std::vector<int>> bl_node;   // [row][column]
  std::vector<int> wlt_contact;            // [column]
  std::vector<int> wlb_contact;            // [column]
  std::vector<int> bl_contact;             // [row], set when the bit line is grounded/linked
  std::vector<std::vector<int>> top_branch;     // [row][column] branch index
  std::vector<std::vector<int>> bottom_branch;  // [row][column]
};

namespace detail {
// Adds one full line (contact + crossings) to the network. Returns crossing
// node ids; contact_out receives the contact node id.
inline std::vector<int> add_line(ResistiveNetwork& net, int crossings, double g_segment,
                                 bool ideal, bool with_contact, int& contact_out,
                                 const std::string& tag) {
  std::vector<int> nodes(static_cast<size_t>(crossings), -1);
  if (ideal) {
    int n = net.new_node();
    for (auto& x : nodes) x = n;
    contact_out = with_contact ? n : -1;
    return nodes;
  }
  contact_out = with_contact ? net.new_node() : -1;
  int prev = contact_out;
  for (int i = 0; i < crossings; ++i) {
    nodes[static_cast<size_t>(i)] = net.new_node();
    if (prev >= 0)
      net.add_branch(prev, nodes[static_cast<size_t>(i)], g_segment,
                     tag + ":seg:" + std::to_string(i));
    prev = nodes[static_cast<size_t>(i)];
  }
  return nodes;
}

// Attaches a contact node to a rail (source or ground) through the driver
// resistance; with zero resistance the contact is pinned directly.
inline void bind_contact(ResistiveNetwork& net, int contact, double volts, double r_driver,
                         const std::string& tag) {
  if (r_driver > 0.0) {
    int rail = net.new_node();
    net.add_source(rail, volts);
    net.add_branch(rail, contact, 1.0 / r_driver, tag);
  } else {
    net.add_source(contact, volts);
  }
}

inline int add_cell_branch(ResistiveNetwork& net, int line_node, int bl, Phase state,
                           const PcmCellParams& params, const BuildOptions& opt,
                           const std::string& tag) {
  double g = cell_conductance(state, params);
  if (opt.ots == OtsMode::Explicit) {
    // PCM in series with the selector, selector on the bit-line side. The
    // selector starts on; re-evaluate with reevaluate_ots after a solve.
    int mid = net.new_node();
    net.add_branch(line_node, mid, g, tag);
    return net.add_branch(mid, bl, opt.ots_params.g_on, tag + ":ots");
  }
  return net.add_branch(line_node, bl, g, tag);
}
}  // namespace detail

inline CrossbarNet build_crossbar_network(const SubarrayGeometry& geom,
                                          const LineConfiguration& cfg,
                                          const PcmCellParams& params, const CellMatrix& top,
                                          const CellMatrix& bottom, const DrivePattern& drive,
                                          const BuildOptions& opt) {
  const int R = geom.n_row, C = geom.n_column;
  auto check = [&](const CellMatrix& m, const char* what) {
    if (static_cast<int>(m.size()) != R)
      throw std::invalid_argument(std::string(what) + ": row count mismatch");
    for (const auto& row : m)
      if (static_cast<int>(row.size()) != C)
        throw std::invalid_argument(std::string(what) + ": column count mismatch");
  };
  check(top, "top cells");
  check(bottom, "bottom cells");
  if (static_cast<int>(drive.wlt.size()) != C || static_cast<int>(drive.wlb.size()) != C ||
      static_cast<int>(drive.bl.size()) != R)
    throw std::invalid_argument("drive pattern dimensions mismatch");

  CrossbarNet cn;
  cn.wlt_node.assign(C, std::vector<int>(R, -1));
  cn.wlb_node.assign(C, std::vector<int>(R, -1));
  cn.bl_node.assign(R, std::vector<int>(C, -1));
  cn.wlt_contact.assign(C, -1);
  cn.wlb_contact.assign(C, -1);
  cn.bl_contact.assign(R, -1);
  cn.top_branch.assign(R, std::vector<int>(C, -1));
  cn.bottom_branch.assign(R, std::vector<int>(C, -1));

  ResistiveNetwork& net = cn.net;
  const double rd = opt.include_driver_resistance ? geom.r_driver_ohm : 0.0;
  bool any_source = false;

  for (int c = 0; c < C; ++c) {
    if (drive.wlt[c] != LineState::Floating) {
      int contact = -1;
      cn.wlt_node[c] = detail::add_line(net, R, opt.wires.g_y, opt.wires.ideal_y(), true,
                                        contact, "wlt:" + std::to_string(c));
      cn.wlt_contact[c] = contact >= 0 ? contact : cn.wlt_node[c][0];
      if (drive.wlt[c] == LineState::Driven) {
        detail::bind_contact(net, cn.wlt_contact[c], drive.v_dd, rd,
                             "drv:wlt:" + std::to_string(c));
        any_source = true;
      } else if (drive.wlt[c] == LineState::Grounded) {
        detail::bind_contact(net, cn.wlt_contact[c], 0.0, rd, "gnd:wlt:" + std::to_string(c));
        any_source = true;
      }
    }
    if (drive.wlb[c] != LineState::Floating) {
      int contact = -1;
      cn.wlb_node[c] = detail::add_line(net, R, opt.wires.g_y, opt.wires.ideal_y(), true, contact,
                                        "wlb:" + std::to_string(c));
      cn.wlb_contact[c] = contact >= 0 ? contact : cn.wlb_node[c][0];
      if (drive.wlb[c] == LineState::Grounded) {
        detail::bind_contact(net, cn.wlb_contact[c], 0.0, rd, "gnd:wlb:" + std::to_string(c));
        any_source = true;
      }
    }
  }

  for (int r = 0; r < R; ++r) {
    if (drive.bl[r] == LineState::Floating) continue;
    int contact = -1;
    cn.bl_node[r] = detail::add_line(net, C, opt.wires.g_x, opt.wires.ideal_x(),
                                     drive.bl[r] == LineState::Grounded, contact,
                                     "bl:" + std::to_string(r));
    cn.bl_contact[r] = contact >= 0 ? contact : cn.bl_node[r][0];
    if (drive.bl[r] == LineState::Grounded) {
      detail::bind_contact(net, cn.bl_contact[r], 0.0, rd, "gnd:bl:" + std::to_string(r));
      any_source = true;
    }
  }

  for (int r = 0; r < R; ++r) {
    if (drive.bl[r] == LineState::Floating) continue;
    for (int c = 0; c < C; ++c) {
      if (drive.wlt[c] != LineState::Floating)
        cn.top_branch[r][c] = detail::add_cell_branch(
            net, cn.wlt_node[c][r], cn.bl_node[r][c], top[r][c], params, opt,
            "top:" + std::to_string(r) + ":" + std::to_string(c));
      if (drive.wlb[c] != LineState::Floating)
        cn.bottom_branch[r][c] = detail::add_cell_branch(
            net, cn.wlb_node[c][r], cn.bl_node[r][c], bottom[r][c], params, opt,
            "bot:" + std::to_string(r) + ":" + std::to_string(c));
    }
  }

  if (!any_source)
    throw std::invalid_argument("drive pattern leaves the whole network floating");
  return cn;
}

// Re-evaluates explicit selector branches from a solved state. Returns how
// many selectors changed state; the caller re-solves once and reports any
// remaining divergence instead of iterating further.
inline int reevaluate_ots(ResistiveNetwork& net, const SolveResult& sol, const OtsParams& p) {
  int flipped = 0;
  for (size_t i = 0; i < net.branches.size(); ++i) {
    auto& b = net.branches[i];
    if (b.tag.size() < 4 || b.tag.substr(b.tag.size() - 4) != ":ots") continue;
    double v = std::abs(sol.node_voltages[b.a] - sol.node_voltages[b.b]);
    double want = ots_conductance(v, p);
    if (want != b.conductance) {
      b.conductance = want;
      ++flipped;
    }
  }
  return flipped;
}

// ---------------------------------------------------------------------------
// Synthetic worst-case ladder: a single driven word line whose rows all hold
// a crystalline input cell, with the output column the full array width away
// (the separation is idealized as n_column bit-line segments). Used for the
// recursive-reduction cross-checks and for margin bisection.

struct CornerScenario {
  Phase upstream_outputs = Phase::Amorphous;  // output cells of rows before the last
  Phase last_row_output = Phase::Crystalline;
  bool include_bitline = true;  // false: treat bit-line runs as perfect wires
};

struct CornerNet {
  ResistiveNetwork net;
  std::vector<int> wlt_node;  // per row
  std::vector<int> wlb_node;  // per row
  std::vector<int> in_branch;   // per row: input-cell branch index
  std::vector<int> out_branch;  // per row: output-cell branch index
  int last_row() const { return static_cast<int>(wlt_node.size()) - 1; }
};

inline CornerNet build_corner_network(const SubarrayGeometry& geom, const LineConfiguration& cfg,
                                      const PcmCellParams& params, double v_dd,
                                      const CornerScenario& scen, const WireModel& wires_in,
                                      bool exclude_last_row_cells = false) {
  WireModel wires = wires_in;
  if (!scen.include_bitline) wires.g_x = std::numeric_limits<double>::infinity();
  const int R = geom.n_row;
  CornerNet cn;
  ResistiveNetwork& net = cn.net;

  int wlt_contact = -1, wlb_contact = -1;
  cn.wlt_node =
      detail::add_line(net, R, wires.g_y, wires.ideal_y(), true, wlt_contact, "wlt");
  cn.wlb_node =
      detail::add_line(net, R, wires.g_y, wires.ideal_y(), true, wlb_contact, "wlb");
  if (wlt_contact < 0) wlt_contact = cn.wlt_node[0];
  if (wlb_contact < 0) wlb_contact = cn.wlb_node[0];
  detail::bind_contact(net, wlt_contact, v_dd, geom.r_driver_ohm, "drv:wlt");
  detail::bind_contact(net, wlb_contact, 0.0, geom.r_driver_ohm, "gnd:wlb");

  cn.in_branch.assign(R, -1);
  cn.out_branch.assign(R, -1);
  for (int r = 0; r < R; ++r) {
    if (exclude_last_row_cells && r == R - 1) continue;
    Phase out_phase = (r == R - 1) ? scen.last_row_output : scen.upstream_outputs;
    int upstream_end;  // bit-line node next to the input cell
    int downstream_end;
    if (wires.ideal_x()) {
      upstream_end = downstream_end = net.new_node();
    } else {
      // n_column segments between the input and output cells of one row.
      upstream_end = net.new_node();
      int prev = upstream_end;
      for (int s = 0; s < geom.n_column; ++s) {
        int nxt = net.new_node();
        net.add_branch(prev, nxt, wires.g_x,
                       "bl:" + std::to_string(r) + ":seg:" + std::to_string(s));
        prev = nxt;
      }
      downstream_end = prev;
    }
    cn.in_branch[r] = net.add_branch(cn.wlt_node[r], upstream_end, params.g_crystalline,
                                     "in:" + std::to_string(r));
    cn.out_branch[r] = net.add_branch(downstream_end, cn.wlb_node[r],
                                      cell_conductance(out_phase, params),
                                      "out:" + std::to_string(r));
  }
  return cn;
}

// Current through the output cell of the last (farthest) row.
inline double last_row_current(const CornerNet& cn, const SolveResult& sol) {
  int b = cn.out_branch[cn.last_row()];
  if (b < 0) throw std::invalid_argument("last row was excluded from the network");
  return std::abs(sol.branch_currents[static_cast<size_t>(b)]);
}

}  // namespace xbar
