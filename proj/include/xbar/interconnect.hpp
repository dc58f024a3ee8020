#pragma once

// Metal-stack data (ASAP7 design rules), word/bit-line layer allocation, and
// per-cell wire segment conductances.
//
// Geometry conventions used throughout:
//   - Word lines (top and bottom) run across the rows, one line per column.
//     A word-line segment spans one row pitch, i.e. its length is w_cell and
//     its drawn width fits inside the column pitch l_cell.
//   - Bit lines run along the rows, one line per row. A bit-line segment
//     spans one column pitch: length l_cell, width inside w_cell.
//   - g_y is the per-segment conductance of a word line, g_x of a bit line.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace xbar {

enum class LineDir { H, V };

struct MetalLayerSpec {
  std::string name;          // M1..M9
  double thickness_nm;       // t
  double min_width_nm;       // W_min
  double min_spacing_nm;     // S_min
  double resistivity_ohm_nm; // rho
  LineDir direction;
};

struct ViaSpec {
  std::string name;  // V12..V89
  double resistance_ohm;
  double size_nm;
  double min_spacing_nm;
};

struct MetalTable {
  std::vector<MetalLayerSpec> metals;
  std::vector<ViaSpec> vias;

  const MetalLayerSpec& layer(const std::string& name) const {
    for (const auto& m : metals)
      if (m.name == name) return m;
    throw std::invalid_argument("unknown metal layer: " + name);
  }

  // Via between two adjacent levels, e.g. ("M1","M2") -> V12.
  const ViaSpec& via_between(int lo_level, int hi_level) const {
    std::string want = "V" + std::to_string(lo_level) + std::to_string(hi_level);
    for (const auto& v : vias)
      if (v.name == want) return v;
    throw std::invalid_argument("unknown via: " + want);
  }

  static const MetalTable& asap7() {
    static const MetalTable t{
        {
            {"M1", 36.0, 18.0, 18.0, 43.2, LineDir::V},
            {"M2", 36.0, 18.0, 18.0, 43.2, LineDir::H},
            {"M3", 36.0, 18.0, 18.0, 43.2, LineDir::V},
            {"M4", 48.0, 24.0, 24.0, 36.9, LineDir::H},
            {"M5", 48.0, 24.0, 24.0, 36.9, LineDir::V},
            {"M6", 64.0, 32.0, 32.0, 32.0, LineDir::H},
            {"M7", 64.0, 32.0, 32.0, 32.0, LineDir::V},
            {"M8", 80.0, 40.0, 40.0, 28.8, LineDir::H},
            {"M9", 80.0, 40.0, 40.0, 28.8, LineDir::V},
        },
        {
            {"V12", 17.0, 18.0, 18.0},
            {"V23", 17.0, 18.0, 18.0},
            {"V34", 17.0, 18.0, 18.0},
            {"V45", 12.0, 24.0, 33.0},
            {"V56", 12.0, 24.0, 33.0},
            {"V67", 8.0, 32.0, 45.0},
            {"V78", 8.0, 32.0, 45.0},
            {"V89", 6.0, 40.0, 57.0},
        }};
    return t;
  }
};

inline int metal_level(const std::string& name) {
  if (name.size() < 2 || name[0] != 'M')
    throw std::invalid_argument("bad metal layer name: " + name);
  return std::stoi(name.substr(1));
}

// Conductance of one wire segment: G = t*W / (rho*L).
inline double metal_segment_conductance(const MetalLayerSpec& layer, double length_nm,
                                        double width_nm) {
  if (!(length_nm > 0.0))
    throw std::invalid_argument("segment length must be positive");
  if (width_nm < layer.min_width_nm - 1e-9)
    throw std::invalid_argument("segment width below design-rule minimum for " + layer.name);
  return layer.thickness_nm * width_nm / (layer.resistivity_ohm_nm * length_nm);
}

struct LineConfiguration {
  std::string name;
  std::vector<std::string> wlt_layers;
  std::vector<std::string> bl_layers;
  std::vector<std::string> wlb_layers;

  void validate(const MetalTable& table = MetalTable::asap7()) const {
    if (wlt_layers.empty() || bl_layers.empty() || wlb_layers.empty())
      throw std::invalid_argument("line configuration: every line needs at least one layer");
    std::vector<std::string> all;
    for (const auto* set : {&wlt_layers, &bl_layers, &wlb_layers})
      all.insert(all.end(), set->begin(), set->end());
    std::vector<std::string> sorted = all;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("line configuration: layer sets must be disjoint");
    for (const auto& n : all) table.layer(n);  // existence check
    // Top and bottom word lines must have identical electrical structure so
    // that both contribute the same per-segment conductance.
    auto profile = [&](const std::vector<std::string>& set) {
      std::vector<std::tuple<double, double, double, double>> p;
      for (const auto& n : set) {
        const auto& m = table.layer(n);
        p.emplace_back(m.thickness_nm, m.min_width_nm, m.min_spacing_nm, m.resistivity_ohm_nm);
      }
      std::sort(p.begin(), p.end());
      return p;
    };
    if (profile(wlt_layers) != profile(wlb_layers))
      throw std::invalid_argument(
          "line configuration: top and bottom word-line layer sets must match electrically");
  }
};

// Built-in allocations. The split of the upper layers keeps the top and
// bottom word lines electrically identical (paired layers have equal specs).
inline LineConfiguration builtin_line_config(int id) {
  switch (id) {
    case 1:
      return {"config1", {"M3"}, {"M2"}, {"M1"}};
    case 2:
      return {"config2", {"M3", "M6", "M8"}, {"M2", "M4", "M5"}, {"M1", "M7", "M9"}};
    case 3:
      return {"config3", {"M3", "M4", "M6", "M8"}, {"M2"}, {"M1", "M5", "M7", "M9"}};
    default:
      throw std::invalid_argument("builtin line config id must be 1, 2, or 3");
  }
}

struct CellPitch {
  double w_min_nm;  // bit-line direction pitch (cell width)
  double l_min_nm;  // word-line direction pitch (cell length)
};

// Per direction: pitch = max over allocated layers of (min width + min spacing).
inline CellPitch min_cell_pitch(const LineConfiguration& cfg,
                                const MetalTable& table = MetalTable::asap7()) {
  auto pitch = [&](const std::vector<std::string>& layers) {
    double p = 0.0;
    for (const auto& n : layers) {
      const auto& m = table.layer(n);
      p = std::max(p, m.min_width_nm + m.min_spacing_nm);
    }
    return p;
  };
  double wl_pitch = std::max(pitch(cfg.wlt_layers), pitch(cfg.wlb_layers));
  return {pitch(cfg.bl_layers), wl_pitch};
}

struct SubarrayGeometry {
  int n_row = 64;
  int n_column = 128;
  double w_cell_nm = 0.0;  // 0 means "use the configuration minimum"
  double l_cell_nm = 0.0;
  double r_driver_ohm = 250.0;

  SubarrayGeometry resolved(const LineConfiguration& cfg,
                            const MetalTable& table = MetalTable::asap7()) const {
    SubarrayGeometry g = *this;
    CellPitch p = min_cell_pitch(cfg, table);
    if (g.w_cell_nm <= 0.0) g.w_cell_nm = p.w_min_nm;
    if (g.l_cell_nm <= 0.0) g.l_cell_nm = p.l_min_nm;
    g.validate(cfg, table);
    return g;
  }

  void validate(const LineConfiguration& cfg,
                const MetalTable& table = MetalTable::asap7()) const {
    if (n_row < 1 || n_column < 1)
      throw std::invalid_argument("geometry: need at least one row and one column");
    if (r_driver_ohm < 0.0) throw std::invalid_argument("geometry: negative driver resistance");
    CellPitch p = min_cell_pitch(cfg, table);
    if (w_cell_nm < p.w_min_nm - 1e-9 || l_cell_nm < p.l_min_nm - 1e-9)
      throw std::invalid_argument("geometry: cell smaller than configuration minimum pitch");
  }
};

struct SegmentConductances {
  double g_x;  // bit-line segment (one column pitch)
  double g_y;  // word-line segment (one row pitch)
};

namespace detail {
// Usable drawn width inside a pitch: pitch minus the minimum spacing of the
// widest allocated layer. All layers in the set share that drawn width.
inline double usable_width(const std::vector<std::string>& layers, double pitch_nm,
                           const MetalTable& table) {
  double w_max = 0.0, spacing = 0.0;
  for (const auto& n : layers) {
    const auto& m = table.layer(n);
    if (m.min_width_nm > w_max) {
      w_max = m.min_width_nm;
      spacing = m.min_spacing_nm;
    }
  }
  return pitch_nm - spacing;
}

// Sum of parallel layer conductances for one line segment. In via-aware mode
// every layer above the lowest one pays the via-stitch chain (one stitch per
// cell) in series with its own segment.
inline double line_segment_conductance(const std::vector<std::string>& layers,
                                       double length_nm, double width_nm, bool via_aware,
                                       const MetalTable& table) {
  int home = 100;
  for (const auto& n : layers) home = std::min(home, metal_level(n));
  double g = 0.0;
  for (const auto& n : layers) {
    const auto& m = table.layer(n);
    double gl = metal_segment_conductance(m, length_nm, width_nm);
    if (via_aware) {
      double r_chain = 0.0;
      for (int lv = home; lv < metal_level(n); ++lv)
        r_chain += table.via_between(lv, lv + 1).resistance_ohm;
      if (r_chain > 0.0) gl = 1.0 / (1.0 / gl + r_chain);
    }
    g += gl;
  }
  return g;
}
}  // namespace detail

inline SegmentConductances line_config_conductances(
    const LineConfiguration& cfg, const SubarrayGeometry& geom, bool via_aware = false,
    const MetalTable& table = MetalTable::asap7()) {
  geom.validate(cfg, table);
  double wl_width = detail::usable_width(cfg.wlt_layers, geom.l_cell_nm, table);
  double wlb_width = detail::usable_width(cfg.wlb_layers, geom.l_cell_nm, table);
  double bl_width = detail::usable_width(cfg.bl_layers, geom.w_cell_nm, table);
  double g_y_top =
      detail::line_segment_conductance(cfg.wlt_layers, geom.w_cell_nm, wl_width, via_aware, table);
  double g_y_bot =
      detail::line_segment_conductance(cfg.wlb_layers, geom.w_cell_nm, wlb_width, via_aware, table);
  // validate() makes the two rails electrically identical as drawn, but the
  // via-stitch chains start at each rail's own home layer, so the rails can
  // differ in via-aware mode. Every current path crosses one top and one
  // bottom segment per row, so fold the pair into a single per-rail value
  // that preserves the series sum: 2/g_y = 1/g_top + 1/g_bot.
  double g_y = g_y_top == g_y_bot ? g_y_top
                                  : 2.0 * g_y_top * g_y_bot / (g_y_top + g_y_bot);
  double g_x =
      detail::line_segment_conductance(cfg.bl_layers, geom.l_cell_nm, bl_width, via_aware, table);
  return {g_x, g_y};
}

}  // namespace xbar
