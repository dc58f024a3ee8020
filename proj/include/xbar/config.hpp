#pragma once

// Configuration plumbing: strict SI-quantity parsing and JSON run configs.
//
// Quantity grammar: <decimal number> [SI prefix] <unit symbol>, no spaces
// required, e.g. "36nm", "0.63V", "160uS", "80ns", "1kOhm". Dimensioned
// values without a unit are rejected; the numeric part is re-parsed through
// strtod with the combined power-of-ten exponent folded into the text, so
// "36nm" yields exactly the same double as the literal 36e-9.

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "xbar/device.hpp"
#include "xbar/interconnect.hpp"

namespace xbar {

enum class Dimension { Length, Voltage, Current, Time, Conductance, Resistance, Dimensionless };

namespace detail {

inline const std::map<char, int>& si_prefixes() {
  static const std::map<char, int> p = {{'f', -15}, {'p', -12}, {'n', -9}, {'u', -6},
                                        {'m', -3},  {'k', 3},   {'M', 6},  {'G', 9}};
  return p;
}

inline std::string unit_symbol(Dimension d) {
  switch (d) {
    case Dimension::Length: return "m";
    case Dimension::Voltage: return "V";
    case Dimension::Current: return "A";
    case Dimension::Time: return "s";
    case Dimension::Conductance: return "S";
    case Dimension::Resistance: return "Ohm";
    case Dimension::Dimensionless: return "";
  }
  return "";
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace detail

inline double parse_quantity(const std::string& text, Dimension dim) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  if (s.empty()) throw std::invalid_argument("empty quantity");

  // Split the leading decimal literal from the suffix.
  size_t i = 0;
  if (s[i] == '+' || s[i] == '-') ++i;
  bool saw_digit = false, saw_dot = false;
  while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) {
    if (s[i] == '.') {
      if (saw_dot) throw std::invalid_argument("malformed number: " + text);
      saw_dot = true;
    } else {
      saw_digit = true;
    }
    ++i;
  }
  if (!saw_digit) throw std::invalid_argument("malformed number: " + text);
  // Exponent part belongs to the number only when followed by a digit or a
  // signed digit, so "1e3" parses while "36n" keeps 'n' as a prefix.
  int explicit_exp = 0;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    size_t j = i + 1;
    if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
    if (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
      size_t k = j;
      while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
      explicit_exp = std::stoi(s.substr(i + 1, k - i - 1));
      i = k;
    }
  }
  std::string mantissa = s.substr(0, i);
  // Strip any exponent text from the mantissa copy; it is re-added below.
  if (explicit_exp != 0 || mantissa.find('e') != std::string::npos ||
      mantissa.find('E') != std::string::npos) {
    size_t epos = mantissa.find_first_of("eE");
    mantissa = mantissa.substr(0, epos);
  }
  std::string suffix = s.substr(i);

  int exp10 = explicit_exp;
  if (dim == Dimension::Dimensionless) {
    if (!suffix.empty()) throw std::invalid_argument("unexpected unit on " + text);
  } else {
    const std::string unit = detail::unit_symbol(dim);
    if (!detail::ends_with(suffix, unit))
      throw std::invalid_argument("expected a value in " + unit + ", got: " + text);
    std::string prefix = suffix.substr(0, suffix.size() - unit.size());
    if (prefix.size() > 1)
      throw std::invalid_argument("malformed unit prefix in: " + text);
    if (prefix.size() == 1) {
      auto it = detail::si_prefixes().find(prefix[0]);
      if (it == detail::si_prefixes().end())
        throw std::invalid_argument("unknown SI prefix in: " + text);
      exp10 += it->second;
    }
  }

  std::string rebuilt = mantissa + "e" + std::to_string(exp10);
  char* end = nullptr;
  double value = std::strtod(rebuilt.c_str(), &end);
  if (end == rebuilt.c_str() || *end != '\0')
    throw std::invalid_argument("could not parse quantity: " + text);
  return value;
}

// Convenience wrappers returning SI base units.
inline double parse_length_m(const std::string& s) { return parse_quantity(s, Dimension::Length); }
inline double parse_length_nm(const std::string& s) {
  return parse_quantity(s, Dimension::Length) * 1e9;
}
inline double parse_voltage(const std::string& s) { return parse_quantity(s, Dimension::Voltage); }
inline double parse_current(const std::string& s) { return parse_quantity(s, Dimension::Current); }
inline double parse_time(const std::string& s) { return parse_quantity(s, Dimension::Time); }
inline double parse_conductance(const std::string& s) {
  return parse_quantity(s, Dimension::Conductance);
}
inline double parse_resistance(const std::string& s) {
  return parse_quantity(s, Dimension::Resistance);
}

// ---------------------------------------------------------------------------
// JSON run configuration.

enum class VddPolicy { Explicit, MidWindow };

struct RunConfig {
  PcmCellParams cell;
  OtsParams ots;
  LineConfiguration line_config = builtin_line_config(3);
  SubarrayGeometry geometry;
  VddPolicy vdd_policy = VddPolicy::MidWindow;
  double v_dd = 0.0;  // volts, meaningful when policy is Explicit
  bool via_aware = false;
  std::string format = "csv";  // or "json"
  std::string out_path;        // empty: stdout
};

namespace detail {

inline double json_quantity(const nlohmann::json& j, Dimension dim) {
  if (j.is_string()) return parse_quantity(j.get<std::string>(), dim);
  if (j.is_number() && dim == Dimension::Dimensionless) return j.get<double>();
  throw std::invalid_argument("dimensioned config values must be unit strings");
}

}  // namespace detail

inline LineConfiguration line_config_from_json(const nlohmann::json& j) {
  LineConfiguration cfg;
  cfg.name = j.value("name", "custom");
  auto layers = [&](const char* key) {
    std::vector<std::string> v;
    for (const auto& x : j.at(key)) v.push_back(x.get<std::string>());
    return v;
  };
  cfg.wlt_layers = layers("wlt");
  cfg.bl_layers = layers("bl");
  cfg.wlb_layers = layers("wlb");
  cfg.validate();
  return cfg;
}

inline LineConfiguration load_line_config(const std::string& spec_text) {
  // "1", "2", "3" select the built-in allocations; anything else is a path
  // to a JSON file with {"wlt": [...], "bl": [...], "wlb": [...]}.
  if (spec_text == "1" || spec_text == "2" || spec_text == "3")
    return builtin_line_config(spec_text[0] - '0');
  std::ifstream in(spec_text);
  if (!in) throw std::invalid_argument("cannot open line configuration file: " + spec_text);
  nlohmann::json j;
  in >> j;
  return line_config_from_json(j);
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig rc;
  if (j.contains("cell")) {
    const auto& c = j.at("cell");
    if (c.contains("g_amorphous"))
      rc.cell.g_amorphous = detail::json_quantity(c.at("g_amorphous"), Dimension::Conductance);
    if (c.contains("g_crystalline"))
      rc.cell.g_crystalline = detail::json_quantity(c.at("g_crystalline"), Dimension::Conductance);
    if (c.contains("i_set")) rc.cell.i_set = detail::json_quantity(c.at("i_set"), Dimension::Current);
    if (c.contains("i_reset"))
      rc.cell.i_reset = detail::json_quantity(c.at("i_reset"), Dimension::Current);
    if (c.contains("t_set")) rc.cell.t_set = detail::json_quantity(c.at("t_set"), Dimension::Time);
    if (c.contains("t_reset"))
      rc.cell.t_reset = detail::json_quantity(c.at("t_reset"), Dimension::Time);
    rc.cell.validate();
  }
  if (j.contains("ots")) {
    const auto& o = j.at("ots");
    if (o.contains("v_threshold"))
      rc.ots.v_threshold = detail::json_quantity(o.at("v_threshold"), Dimension::Voltage);
    if (o.contains("g_on")) rc.ots.g_on = detail::json_quantity(o.at("g_on"), Dimension::Conductance);
    if (o.contains("g_off"))
      rc.ots.g_off = detail::json_quantity(o.at("g_off"), Dimension::Conductance);
    rc.ots.validate();
  }
  if (j.contains("line_config")) {
    const auto& lc = j.at("line_config");
    if (lc.is_number_integer())
      rc.line_config = builtin_line_config(lc.get<int>());
    else if (lc.is_string())
      rc.line_config = load_line_config(lc.get<std::string>());
    else
      rc.line_config = line_config_from_json(lc);
  }
  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    if (g.contains("rows")) rc.geometry.n_row = g.at("rows").get<int>();
    if (g.contains("cols")) rc.geometry.n_column = g.at("cols").get<int>();
    if (g.contains("l_cell"))
      rc.geometry.l_cell_nm = detail::json_quantity(g.at("l_cell"), Dimension::Length) * 1e9;
    if (g.contains("w_cell"))
      rc.geometry.w_cell_nm = detail::json_quantity(g.at("w_cell"), Dimension::Length) * 1e9;
    if (g.contains("r_driver"))
      rc.geometry.r_driver_ohm = detail::json_quantity(g.at("r_driver"), Dimension::Resistance);
  }
  if (j.contains("v_dd")) {
    const auto& v = j.at("v_dd");
    if (v.is_string() && v.get<std::string>() == "mid") {
      rc.vdd_policy = VddPolicy::MidWindow;
    } else {
      rc.vdd_policy = VddPolicy::Explicit;
      rc.v_dd = detail::json_quantity(v, Dimension::Voltage);
    }
  }
  if (j.contains("via_aware")) rc.via_aware = j.at("via_aware").get<bool>();
  if (j.contains("format")) rc.format = j.at("format").get<std::string>();
  if (j.contains("out")) rc.out_path = j.at("out").get<std::string>();
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config parse error in " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace xbar
