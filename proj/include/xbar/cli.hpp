#pragma once

// Command-line front end, callable in-process for testing. Subcommands:
//   margin    one noise-margin report (exit 0 when NM >= 0, 2 when NM < 0)
//   sweep     margin table over a geometry axis
//   simulate  TMVM execution from weight/input CSV files
//   mnist     end-to-end workload run against the data fixtures
// All error paths exit 1 with a diagnostic on stderr.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "xbar/config.hpp"
#include "xbar/fabric.hpp"
#include "xbar/margin.hpp"
#include "xbar/workload.hpp"

namespace xbar {

namespace cli_detail {

struct CommonArgs {
  std::string config_path;
  int rows = -1;
  int cols = -1;
  std::string cell_length;
  std::string cell_width;
  std::string line_config;
  std::string r_driver;
  std::string vdd = "mid";
  std::string mode = "analytic";
  std::string format;
  std::string out;
  bool via_aware = false;
};

inline void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config_path, "JSON run configuration file");
  cmd->add_option("--rows", a.rows, "subarray rows");
  cmd->add_option("--cols", a.cols, "subarray columns");
  cmd->add_option("--cell-length", a.cell_length, "cell length, SI units (e.g. 80nm)");
  cmd->add_option("--cell-width", a.cell_width, "cell width, SI units (e.g. 36nm)");
  cmd->add_option("--line-config", a.line_config, "1|2|3 or a JSON allocation file");
  cmd->add_option("--r-driver", a.r_driver, "driver contact resistance (e.g. 250Ohm)");
  cmd->add_option("--vdd", a.vdd, "drive voltage (e.g. 0.63V) or 'mid'");
  cmd->add_option("--mode", a.mode, "analytic|oracle")
      ->check(CLI::IsMember({"analytic", "oracle"}));
  cmd->add_option("--format", a.format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--out", a.out, "output path (default stdout)");
  cmd->add_flag("--via-aware", a.via_aware, "charge upper metal layers their via chains");
}

inline RunConfig resolve(const CommonArgs& a) {
  RunConfig rc;
  if (!a.config_path.empty()) rc = load_run_config(a.config_path);
  if (a.rows > 0) rc.geometry.n_row = a.rows;
  if (a.cols > 0) rc.geometry.n_column = a.cols;
  if (!a.cell_length.empty()) rc.geometry.l_cell_nm = parse_length_nm(a.cell_length);
  if (!a.cell_width.empty()) rc.geometry.w_cell_nm = parse_length_nm(a.cell_width);
  if (!a.line_config.empty()) rc.line_config = load_line_config(a.line_config);
  if (!a.r_driver.empty()) rc.geometry.r_driver_ohm = parse_resistance(a.r_driver);
  if (a.vdd == "mid") {
    rc.vdd_policy = VddPolicy::MidWindow;
  } else {
    rc.vdd_policy = VddPolicy::Explicit;
    rc.v_dd = parse_voltage(a.vdd);
  }
  if (!a.format.empty()) rc.format = a.format;
  if (!a.out.empty()) rc.out_path = a.out;
  rc.via_aware = rc.via_aware || a.via_aware;
  rc.geometry = rc.geometry.resolved(rc.line_config);
  rc.geometry.validate(rc.line_config);
  return rc;
}

class Emitter {
 public:
  explicit Emitter(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot open output file: " + path);
    }
  }
  std::ostream& os() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

inline nlohmann::json margin_to_json(const NoiseMarginReport& r) {
  return nlohmann::json{{"r_th_ohm", r.r_th},
                        {"alpha_th", r.alpha_th},
                        {"v_min_ideal", r.ideal.v_lo},
                        {"v_max_ideal", r.ideal.v_hi},
                        {"v_min_prime", r.derated.v_lo},
                        {"v_max_prime", r.derated.v_hi},
                        {"v_lo", r.combined.v_lo},
                        {"v_hi", r.combined.v_hi},
                        {"v_mid", r.v_mid},
                        {"nm", r.nm},
                        {"nm_percent", r.nm * 100.0}};
}

inline int cmd_margin(const CommonArgs& a) {
  RunConfig rc = resolve(a);
  MarginOptions mo;
  mo.via_aware = rc.via_aware;
  NoiseMarginReport rep = noise_margin(rc.geometry, rc.line_config, rc.cell, mo);
  Emitter em(rc.out_path);
  std::ostream& os = em.os();
  os << std::setprecision(12);
  if (rc.format == "json") {
    nlohmann::json j = margin_to_json(rep);
    j["config"] = rc.line_config.name;
    j["rows"] = rc.geometry.n_row;
    j["cols"] = rc.geometry.n_column;
    os << j.dump(2) << "\n";
  } else {
    os << "config,rows,cols,v_min_prime,v_max,nm,nm_percent,alpha_th,r_th\n";
    os << rc.line_config.name << "," << rc.geometry.n_row << "," << rc.geometry.n_column << ","
       << rep.derated.v_lo << "," << rep.combined.v_hi << "," << rep.nm << ","
       << rep.nm * 100.0 << "," << rep.alpha_th << "," << rep.r_th << "\n";
  }
  return rep.nm >= 0.0 ? 0 : 2;
}

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "n_row" || s == "rows") return SweepAxis::NRow;
  if (s == "n_column" || s == "cols") return SweepAxis::NColumn;
  if (s == "l_cell") return SweepAxis::CellLength;
  if (s == "w_cell") return SweepAxis::CellWidth;
  if (s == "r_driver") return SweepAxis::DriverResistance;
  throw std::invalid_argument("unknown sweep axis: " + s);
}

inline int cmd_sweep(const CommonArgs& a, const std::string& axis_name,
                     const std::string& values_csv, bool all_configs) {
  RunConfig rc = resolve(a);
  SweepAxis axis = parse_axis(axis_name);
  std::vector<double> values;
  {
    std::stringstream ss(values_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      if (axis == SweepAxis::CellLength || axis == SweepAxis::CellWidth)
        values.push_back(parse_length_nm(tok));
      else if (axis == SweepAxis::DriverResistance)
        values.push_back(parse_resistance(tok));
      else
        values.push_back(std::stod(tok));
    }
  }
  if (values.empty()) throw std::invalid_argument("sweep: empty value grid");

  std::vector<LineConfiguration> configs;
  if (all_configs)
    configs = {builtin_line_config(1), builtin_line_config(2), builtin_line_config(3)};
  else
    configs = {rc.line_config};

  MarginOptions mo;
  mo.via_aware = rc.via_aware;
  Emitter em(rc.out_path);
  std::ostream& os = em.os();
  os << std::setprecision(12);
  if (rc.format == "json") {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& cfg : configs) {
      auto pts = sweep(axis, values, rc.geometry, cfg, rc.cell, mo);
      for (const auto& pt : pts) {
        nlohmann::json j;
        j["config"] = cfg.name;
        j["axis"] = to_string(axis);
        j["value"] = pt.value;
        j["feasible"] = pt.ok;
        if (pt.ok) {
          j.update(margin_to_json(pt.report));
        } else {
          j["note"] = pt.note;
        }
        rows.push_back(std::move(j));
      }
    }
    os << rows.dump(2) << "\n";
  } else {
    os << "config," << to_string(axis) << ",v_min_prime,v_max,nm,alpha_th,r_th,feasible\n";
    for (const auto& cfg : configs) {
      auto pts = sweep(axis, values, rc.geometry, cfg, rc.cell, mo);
      for (const auto& pt : pts) {
        os << cfg.name << "," << pt.value << ",";
        if (pt.ok)
          os << pt.report.derated.v_lo << "," << pt.report.combined.v_hi << ","
             << pt.report.nm << "," << pt.report.alpha_th << "," << pt.report.r_th << ",1\n";
        else
          os << ",,,,,0\n";
      }
    }
  }
  return 0;
}

inline int cmd_simulate(const CommonArgs& a, const std::string& weights_csv,
                        const std::string& inputs_csv, const std::string& netlist_path) {
  RunConfig rc = resolve(a);
  BitMatrix w = load_bit_matrix_csv(weights_csv);
  BitMatrix inputs = load_bit_matrix_csv(inputs_csv);
  const int R = static_cast<int>(w.size());
  const int C = static_cast<int>(w.front().size());
  SubarrayGeometry geom = rc.geometry;
  geom.n_row = R;
  geom.n_column = C;
  geom = geom.resolved(rc.line_config);

  SubarrayState state = make_subarray_state(geom, rc.line_config);
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c)
      state.top_cells[static_cast<size_t>(r)][static_cast<size_t>(c)] =
          w[static_cast<size_t>(r)][static_cast<size_t>(c)] ? Phase::Crystalline
                                                            : Phase::Amorphous;

  ExecMode mode = a.mode == "oracle" ? ExecMode::Oracle : ExecMode::Analytic;
  Emitter em(rc.out_path);
  std::ostream& os = em.os();
  os << std::setprecision(12);
  nlohmann::json jruns = nlohmann::json::array();
  if (rc.format != "json") os << "input,v_dd,bits,disturbs,energy_j\n";

  for (size_t i = 0; i < inputs.size(); ++i) {
    const auto& in_bits = inputs[i];
    if (static_cast<int>(in_bits.size()) != C)
      throw std::invalid_argument("input row width does not match weights");
    std::vector<int> driven;
    for (int c = 0; c < C; ++c)
      if (in_bits[static_cast<size_t>(c)]) driven.push_back(c);

    double v_dd = rc.v_dd;
    int n_driven = static_cast<int>(driven.size());
    if (rc.vdd_policy == VddPolicy::MidWindow)
      v_dd = ideal_window(std::max(n_driven - 1, 0), rc.cell).mid();

    VoltageWindow win = ideal_window(std::max(n_driven - 1, 0), rc.cell);
    if (n_driven > 0 && (v_dd < win.v_lo || v_dd > win.v_hi))
      std::cerr << "warning: v_dd " << v_dd << " V outside the safe window [" << win.v_lo
                << ", " << win.v_hi << "] V for " << n_driven << " driven inputs\n";

    std::vector<int> bits(static_cast<size_t>(R), 0);
    DisturbReport disturbs;
    double energy = 0.0;
    if (n_driven > 0) {
      DrivePattern d =
          DrivePattern::standard(R, C, driven, 0, v_dd, rc.cell.t_set);
      TmvmResult res = tmvm_execute(state, d, mode, rc.cell);
      bits = res.bits;
      disturbs = res.disturbs;
      energy = estimate_energy(res.trace);
      if (!netlist_path.empty() && mode == ExecMode::Oracle) {
        BuildOptions bopt;
        bopt.wires = WireModel::of(rc.line_config, geom, rc.via_aware);
        CrossbarNet cn = build_crossbar_network(geom, rc.line_config, rc.cell,
                                                state.top_cells, state.bottom_cells, d, bopt);
        std::ofstream nf(netlist_path);
        if (!nf) throw std::runtime_error("cannot open netlist path: " + netlist_path);
        dump_netlist(cn.net, nf);
      }
    }
    if (rc.format == "json") {
      nlohmann::json j;
      j["input"] = i;
      j["v_dd"] = v_dd;
      j["bits"] = bits;
      j["n_disturbs"] = disturbs.size();
      j["energy_j"] = energy;
      jruns.push_back(std::move(j));
    } else {
      os << i << "," << v_dd << ",";
      for (int b : bits) os << b;
      os << "," << disturbs.size() << "," << energy << "\n";
    }
  }
  if (rc.format == "json") os << jruns.dump(2) << "\n";
  return 0;
}

inline int cmd_mnist(const CommonArgs& a, std::string data_dir, std::string model_csv,
                     std::string thresholds_path, int limit) {
  RunConfig rc = resolve(a);
  if (data_dir.empty()) {
    const char* env = std::getenv("XBAR_DATA_DIR");
    data_dir = env ? env : "data";
  }
  if (model_csv.empty()) model_csv = data_dir + "/model_weights.csv";
  if (thresholds_path.empty()) thresholds_path = data_dir + "/model_thresholds.txt";

  MnistData data = load_mnist(data_dir);
  BinaryNnModel model = load_binary_model(model_csv, thresholds_path);
  const int fan_in = static_cast<int>(model.weights.front().front().size());

  std::vector<BinaryImage> images;
  std::vector<int> labels;
  size_t n = limit > 0 ? std::min<size_t>(static_cast<size_t>(limit), data.images.size())
                       : data.images.size();
  for (size_t i = 0; i < n; ++i) {
    BinaryImage b = downscale_binarize(data.images[i]);
    b.label = data.labels[i];
    images.push_back(b);
    labels.push_back(data.labels[i]);
  }

  double v_dd = rc.vdd_policy == VddPolicy::Explicit
                    ? rc.v_dd
                    : ideal_window(fan_in - 1, rc.cell).mid();
  MnistRunReport rep =
      map_and_run(model, images, rc.geometry, rc.line_config, v_dd, rc.cell);
  double acc = evaluate_accuracy(rep.predictions, labels);

  Emitter em(rc.out_path);
  std::ostream& os = em.os();
  os << std::setprecision(12);
  if (rc.format == "json") {
    nlohmann::json j{{"images", images.size()},
                     {"accuracy", acc},
                     {"images_per_step", rep.images_per_step},
                     {"steps", rep.steps},
                     {"v_dd", v_dd},
                     {"k_threshold", rep.k_threshold},
                     {"energy_total_j", rep.energy_j},
                     {"energy_per_image_j", rep.energy_per_image_j}};
    os << j.dump(2) << "\n";
  } else {
    os << "images,accuracy,images_per_step,steps,v_dd,k_threshold,energy_total_j,"
          "energy_per_image_j\n";
    os << images.size() << "," << acc << "," << rep.images_per_step << "," << rep.steps << ","
       << v_dd << "," << rep.k_threshold << "," << rep.energy_j << ","
       << rep.energy_per_image_j << "\n";
  }
  return 0;
}

}  // namespace cli_detail

inline int run_cli(std::vector<std::string> args) {
  CLI::App app{"two-level crosspoint subarray analyzer"};
  app.require_subcommand(1);

  cli_detail::CommonArgs margin_args, sweep_args, sim_args, mnist_args;

  CLI::App* margin = app.add_subcommand("margin", "noise-margin report for one design point");
  cli_detail::add_common(margin, margin_args);

  CLI::App* sw = app.add_subcommand("sweep", "margin table over a geometry axis");
  cli_detail::add_common(sw, sweep_args);
  std::string axis = "n_row", values;
  bool all_configs = false;
  sw->add_option("--axis", axis, "n_row|n_column|l_cell|w_cell|r_driver");
  sw->add_option("--values", values, "comma-separated grid (lengths need units)")->required();
  sw->add_flag("--all-configs", all_configs, "emit all three built-in configurations");

  CLI::App* sim = app.add_subcommand("simulate", "run TMVM from weight/input CSVs");
  cli_detail::add_common(sim, sim_args);
  std::string weights_csv, inputs_csv, netlist_path;
  sim->add_option("--weights", weights_csv, "weight bit-matrix CSV")->required();
  sim->add_option("--inputs", inputs_csv, "input bit-vectors CSV (one per line)")->required();
  sim->add_option("--dump-netlist", netlist_path, "write the oracle netlist to this path");

  CLI::App* mn = app.add_subcommand("mnist", "end-to-end workload run");
  cli_detail::add_common(mn, mnist_args);
  std::string data_dir, model_csv, thresholds_path;
  int limit = 0;
  mn->add_option("--data-dir", data_dir, "fixture directory (default $XBAR_DATA_DIR or data)");
  mn->add_option("--model", model_csv, "model weight CSV");
  mn->add_option("--thresholds", thresholds_path, "model threshold list");
  mn->add_option("--limit", limit, "evaluate only the first N images");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (margin->parsed()) return cli_detail::cmd_margin(margin_args);
    if (sw->parsed()) return cli_detail::cmd_sweep(sweep_args, axis, values, all_configs);
    if (sim->parsed())
      return cli_detail::cmd_simulate(sim_args, weights_csv, inputs_csv, netlist_path);
    if (mn->parsed())
      return cli_detail::cmd_mnist(mnist_args, data_dir, model_csv, thresholds_path, limit);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace xbar
