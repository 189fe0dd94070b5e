#include <gtest/gtest.h>

#include <random>

#include "spotmpc/spot.hpp"

using namespace spotmpc;

namespace {
SpotPolicyParams summer() {
  return SpotPolicyParams::make(homogeneous_band(Season::Summer), SimplifiedPmvModel::summer());
}
SpotPolicyParams winter() {
  return SpotPolicyParams::make(homogeneous_band(Season::Winter), SimplifiedPmvModel::winter());
}
}  // namespace

TEST(React, UnoccupiedIsOff) {
  SpotDeviceState d;
  d.fan_index = 5;
  d.mode = SpotMode::Fan;
  const SpotAction a = react(d, 30.0, false, summer());
  EXPECT_FALSE(a.heater_on);
  EXPECT_EQ(a.fan_speed, 0.0);
  EXPECT_EQ(d.mode, SpotMode::Off);
}

TEST(React, WarmRoomStepsFanUp) {
  SpotDeviceState d;
  const SpotAction a = react(d, 26.0, true, summer());
  EXPECT_NEAR(a.fan_speed, 0.1, 1e-12);
  EXPECT_FALSE(a.heater_on);
  EXPECT_EQ(d.mode, SpotMode::Fan);
}

TEST(React, FanSaturatesAtOneMetrePerSecond) {
  SpotDeviceState d;
  SpotAction a;
  for (int i = 0; i < 15; ++i) a = react(d, 35.0, true, summer());
  EXPECT_DOUBLE_EQ(a.fan_speed, 1.0);
}

TEST(React, CoolRoomTurnsHeaterOn) {
  SpotDeviceState d;
  const SpotAction a = react(d, 20.0, true, winter());
  EXPECT_TRUE(a.heater_on);
  EXPECT_EQ(a.fan_speed, 0.0);
  EXPECT_EQ(d.mode, SpotMode::Heat);
}

TEST(React, InBandWithFanAtRestSettlesOff) {
  SpotDeviceState d;
  d.fan_index = kFanLevels;
  d.mode = SpotMode::Fan;
  const auto p = summer();
  const double x2 = p.model.temp_for(-0.35);  // band middle at rest
  SpotAction a;
  for (int i = 0; i <= kFanLevels; ++i) a = react(d, x2, true, p);
  EXPECT_EQ(a.fan_speed, 0.0);
  EXPECT_FALSE(a.heater_on);
  EXPECT_EQ(d.mode, SpotMode::Off);
}

TEST(React, StepsDownOnlyWhenLowerSpeedStaysInBand) {
  const auto p = summer();
  SpotDeviceState d;
  d.fan_index = 3;
  d.mode = SpotMode::Fan;
  // Comfortable at 0.3 m/s but too warm at 0.2 m/s.
  double x2 = 25.0;
  while (pmv_simplified(p.model, x2, 0.2) <= p.band.hi) x2 += 0.01;
  ASSERT_LE(pmv_simplified(p.model, x2, 0.3), p.band.hi);
  react(d, x2, true, p);
  EXPECT_EQ(d.fan_index, 3);
}

TEST(React, NeverHeatsAndFansTogether) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> t(15, 32);
  std::bernoulli_distribution occ(0.8);
  for (const auto& p : {summer(), winter()}) {
    SpotDeviceState d;
    for (int i = 0; i < 5000; ++i) {
      const bool o = occ(rng);
      const SpotAction a = react(d, t(rng), o, p);
      EXPECT_FALSE(a.heater_on && a.fan_speed > 0);
      EXPECT_GE(d.fan_index, 0);
      EXPECT_LE(d.fan_index, kFanLevels);
      EXPECT_DOUBLE_EQ(a.fan_speed, fan_speed_of(d.fan_index));
      if (!o) {
        EXPECT_FALSE(a.heater_on);
        EXPECT_EQ(a.fan_speed, 0.0);
      }
    }
  }
}

TEST(Duty, CountsHeatedIntervalsPerSlot) {
  SpotDeviceState d;
  EXPECT_EQ(duty_fraction(d), 0.0);
  d.heated_intervals = 20;
  EXPECT_EQ(duty_fraction(d), 1.0);
  d.heated_intervals = 5;
  EXPECT_EQ(duty_fraction(d), 0.25);
  begin_slot(d);
  EXPECT_EQ(duty_fraction(d), 0.0);
}

TEST(Duty, AccumulatesFromReact) {
  SpotDeviceState d;
  const auto p = winter();
  for (int i = 0; i < 5; ++i) react(d, 18.0, true, p);
  EXPECT_EQ(duty_fraction(d), 0.25);
}

TEST(Policy, HeaterStepFromDeviceParameters) {
  EXPECT_NEAR(winter().heater_step, 0.105, 1e-12);
}
