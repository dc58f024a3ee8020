#pragma once

// Electrical model of a two-state PCM storage cell and its OTS selector,
// plus the state-transition rule under current pulses.

#include <cmath>
#include <stdexcept>
#include <string>

namespace xbar {

// Cell phase doubles as the stored logic value: amorphous = 0, crystalline = 1.
enum class Phase { Amorphous, Crystalline };

inline const char* to_string(Phase p) {
  return p == Phase::Amorphous ? "amorphous" : "crystalline";
}

struct PcmCellParams {
  double g_amorphous = 660e-9;    // S
  double g_crystalline = 160e-6;  // S
  double i_set = 50e-6;           // A
  double i_reset = 100e-6;        // A
  double t_set = 80e-9;           // s
  double t_reset = 15e-9;         // s

  void validate() const {
    if (!(g_amorphous > 0.0) || !(g_amorphous < g_crystalline))
      throw std::invalid_argument("pcm params: need 0 < g_amorphous < g_crystalline");
    if (!(i_set > 0.0) || !(i_set < i_reset))
      throw std::invalid_argument("pcm params: need 0 < i_set < i_reset");
    if (!(t_reset > 0.0) || !(t_set > t_reset))
      throw std::invalid_argument("pcm params: need t_set > t_reset > 0");
  }
};

struct OtsParams {
  double v_threshold = 0.3;  // V
  double g_on = 10.0;        // S
  double g_off = 100e-9;     // S

  void validate() const {
    if (!(v_threshold > 0.0))
      throw std::invalid_argument("ots params: v_threshold must be positive");
    if (!(g_off > 0.0) || !(g_off < g_on))
      throw std::invalid_argument("ots params: need 0 < g_off < g_on");
  }
};

enum class EventFlag { NoEvent, SetEvent, ResetEvent };

inline const char* to_string(EventFlag e) {
  switch (e) {
    case EventFlag::SetEvent: return "set";
    case EventFlag::ResetEvent: return "reset";
    default: return "none";
  }
}

inline double cell_conductance(Phase state, const PcmCellParams& p) {
  return state == Phase::Crystalline ? p.g_crystalline : p.g_amorphous;
}

struct PulseResult {
  Phase state;
  EventFlag event;
};

// Static threshold rule for a current pulse. Comparisons at exactly the
// threshold current or duration count as triggering. A reset always wins
// over a set when both thresholds are exceeded: the higher current melts
// the cell regardless of how long the pulse lasts afterwards.
inline PulseResult pulse_outcome(Phase state, double current, double duration,
                                 const PcmCellParams& p) {
  if (current < 0.0) throw std::invalid_argument("pulse_outcome: negative current");
  if (!(duration > 0.0)) throw std::invalid_argument("pulse_outcome: non-positive duration");
  if (current >= p.i_reset && duration >= p.t_reset)
    return {Phase::Amorphous, EventFlag::ResetEvent};
  if (current >= p.i_set && duration >= p.t_set)
    return {Phase::Crystalline, EventFlag::SetEvent};
  return {state, EventFlag::NoEvent};
}

// Two-state selector. Strictly above the threshold voltage the switch is on;
// at exactly the threshold it stays off.
inline double ots_conductance(double v_across, const OtsParams& p) {
  return std::abs(v_across) > p.v_threshold ? p.g_on : p.g_off;
}

}  // namespace xbar
