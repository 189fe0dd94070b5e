// Reactive controller of a desk-level heater/fan device. The device runs on its
// own 30 s cycle: it reads the occupant-region temperature, evaluates the PMV
// surrogate at its current fan speed, and switches heater or fan to bring the
// PMV back into the occupant's band.
#pragma once

#include <cmath>
#include <limits>

#include "spotmpc/comfort.hpp"

namespace spotmpc {

enum class SpotMode { Off, Heat, Fan };

inline const char* to_string(SpotMode m) {
  switch (m) {
    case SpotMode::Off: return "off";
    case SpotMode::Heat: return "heat";
    case SpotMode::Fan: return "fan";
  }
  return "?";
}

inline constexpr int kFanLevels = 10;               // V = {0, 0.1, ..., 1.0} m/s
inline constexpr int kIntervalsPerSlot = 20;        // 30 s intervals in a 10 min slot
inline constexpr double kCheckPeriod = 30.0;        // s

inline double fan_speed_of(int index) { return index / static_cast<double>(kFanLevels); }

struct SpotDeviceState {
  SpotMode mode = SpotMode::Off;
  int fan_index = 0;
  int heated_intervals = 0;  // in the current 10 min slot
  bool heater_on = false;
  double last_x2 = std::numeric_limits<double>::quiet_NaN();

  double fan_speed() const { return fan_speed_of(fan_index); }
};

struct SpotPolicyParams {
  ComfortBand band;
  SimplifiedPmvModel model;
  // Temperature rise of the device region from one heated 30 s interval
  // (tau Q_h / C~ with the default parameters).
  double heater_step = 0.105;

  static SpotPolicyParams make(const ComfortBand& band, const SimplifiedPmvModel& model,
                               double heater_power = 0.7, double spot_capacity = 200.0) {
    return {band, model, kCheckPeriod * heater_power / spot_capacity};
  }
};

struct SpotAction {
  bool heater_on = false;
  double fan_speed = 0.0;
};

// One 30 s decision. The next-interval temperature is predicted from the last
// observed trend; the heater is kept on (or switched on early) when the
// prediction with the heater off would leave the band, and the fan is stepped
// up early or stepped down only when the prediction allows it.
inline SpotAction react(SpotDeviceState& dev, double x2, bool occupied, const SpotPolicyParams& p) {
  const double trend = std::isnan(dev.last_x2) ? 0.0 : x2 - dev.last_x2;
  const double x2_next_off = x2 + trend - (dev.heater_on ? p.heater_step : 0.0);
  dev.last_x2 = x2;

  if (!occupied) {
    dev.mode = SpotMode::Off;
    dev.fan_index = 0;
    dev.heater_on = false;
    return {};
  }

  const auto pmv = [&](double t, int idx) { return pmv_simplified(p.model, t, fan_speed_of(idx)); };
  const double now = pmv(x2, dev.fan_index);

  if (now > p.band.hi || (dev.fan_index > 0 && pmv(x2_next_off, dev.fan_index) > p.band.hi)) {
    dev.heater_on = false;
    dev.fan_index = std::min(dev.fan_index + 1, kFanLevels);
    dev.mode = SpotMode::Fan;
  } else if (now < p.band.lo) {
    dev.fan_index = 0;
    dev.heater_on = true;
    dev.mode = SpotMode::Heat;
  } else {
    if (dev.fan_index > 0) {
      const int lower = dev.fan_index - 1;
      if (pmv(x2, lower) <= p.band.hi && pmv(x2_next_off, lower) <= p.band.hi) dev.fan_index = lower;
    }
    dev.heater_on = dev.fan_index == 0 && pmv(x2_next_off, 0) < p.band.lo;
    dev.mode = dev.heater_on ? SpotMode::Heat : (dev.fan_index > 0 ? SpotMode::Fan : SpotMode::Off);
  }
  if (dev.heater_on) ++dev.heated_intervals;
  return {dev.heater_on, dev.fan_speed()};
}

inline double duty_fraction(const SpotDeviceState& dev) {
  return static_cast<double>(dev.heated_intervals) / kIntervalsPerSlot;
}

// Called at every 10 min boundary.
inline void begin_slot(SpotDeviceState& dev) { dev.heated_intervals = 0; }

}  // namespace spotmpc
