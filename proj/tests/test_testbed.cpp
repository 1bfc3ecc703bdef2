#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "modnn/error.hpp"
#include "modnn/testbed/frame.hpp"
#include "modnn/testbed/rc.hpp"
#include "modnn/testbed/simulate.hpp"

using namespace modnn;
using namespace modnn::testbed;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("modnn_test_" + name)).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

TestbedConfig short_config(int days = 5, std::uint64_t seed = 1) {
  TestbedConfig c;
  c.days = days;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(RcStep, EquilibriumWhenFluxesCancel) {
  RCParams p;
  // envelope flow (t_out - T)/R cancels the internal gains exactly
  const double T = 25.0;
  const double gains = p.q_base + p.q_person * 2.0;
  const double t_out = T - gains * p.r_env;
  EXPECT_NEAR(rc_step(T, t_out, 0.0, 2.0, 0.0, p), T, 1e-12);
}

TEST(RcStep, EulerArithmetic) {
  RCParams p;
  p.c_zone = 9e5;
  p.r_env = 1.0;
  // 1000 W net: q_base 150 + solar 850 with a_solar 1, envelope zero
  p.q_base = 150.0;
  EXPECT_NEAR(rc_step(20.0, 20.0, 850.0, 0.0, 0.0, p) - 20.0, 1.0, 1e-12);
}

TEST(RcStep, MoreCoolingIsColder) {
  RCParams p;
  EXPECT_LT(rc_step(25.0, 30.0, 300.0, 3.0, -1000.0, p), rc_step(25.0, 30.0, 300.0, 3.0, -999.0, p));
}

TEST(RcStep, NonFiniteInputThrows) {
  RCParams p;
  EXPECT_THROW(rc_step(std::nan(""), 20.0, 0.0, 0.0, 0.0, p), SimulationError);
  EXPECT_THROW(rc_step(20.0, 20.0, 0.0, 0.0, INFINITY, p), SimulationError);
}

TEST(RcParams, StabilityGuard) {
  RCParams p;
  p.c_zone = 1e4;
  EXPECT_THROW(p.validate(), ConfigError);
  RCParams q;
  q.q_base = 0.0;
  EXPECT_THROW(q.validate(), ConfigError);
  EXPECT_NO_THROW(RCParams{}.validate());
}

TEST(HvacFromFlow, Examples) {
  HvacParams h;
  EXPECT_EQ(hvac_from_flow(0.0, 24.0, h), 0.0);
  EXPECT_FALSE(std::signbit(hvac_from_flow(0.0, 24.0, h)));
  EXPECT_NEAR(hvac_from_flow(0.16, 24.0, h), 0.16 * 1.2 * 1005.0 * (13.0 - 24.0), 1e-9);
  EXPECT_NEAR(hvac_from_flow(0.16, 24.0, h), -2122.56, 1e-6);
  EXPECT_EQ(hvac_from_flow(0.1, 13.0, h), 0.0);
  EXPECT_THROW(hvac_from_flow(0.2, 24.0, h), ActuationError);
  EXPECT_THROW(hvac_from_flow(-0.01, 24.0, h), ActuationError);
}

TEST(OnOff, DeadbandExamples) {
  EXPECT_TRUE(onoff_controller(24.5, 24.0, 0.5, false));
  EXPECT_FALSE(onoff_controller(24.1, 24.0, 0.5, false));
  EXPECT_TRUE(onoff_controller(24.1, 24.0, 0.5, true));
  EXPECT_FALSE(onoff_controller(23.0, 24.0, 0.5, true));
  EXPECT_FALSE(onoff_controller(23.0, 24.0, 0.5, false));
}

TEST(Occupancy, DeterministicAndBounded) {
  SchedulePolicy p;
  auto a = occupancy_schedule(1000, 42, p, 3);
  auto b = occupancy_schedule(1000, 42, p, 3);
  EXPECT_EQ(a.occ, b.occ);
  for (std::size_t d = 0; d < 1000; ++d) {
    EXPECT_GE(a.depart_step[d], 7 * 4);
    EXPECT_LE(a.depart_step[d], 10 * 4);
    EXPECT_GE(a.arrive_step[d], 16 * 4);
    EXPECT_LE(a.arrive_step[d], 20 * 4);
    EXPECT_GT(a.arrive_step[d], a.depart_step[d]);
    const std::size_t base = d * kStepsPerDay;
    EXPECT_EQ(a.occ[base + a.depart_step[d] - 1], 3.0);
    EXPECT_EQ(a.occ[base + a.depart_step[d]], 0.0);
    EXPECT_EQ(a.occ[base + a.arrive_step[d]], 3.0);
  }
}

TEST(Weather, NightSolarZeroAndReproducible) {
  WeatherOptions o;
  auto a = synth_weather(30, 9, o);
  auto b = synth_weather(30, 9, o);
  EXPECT_EQ(a.t_out, b.t_out);
  EXPECT_EQ(a.solar, b.solar);
  for (int d = 0; d < 30; ++d) {
    EXPECT_EQ(a.solar[d * kStepsPerDay], 0.0);
    for (int k = 0; k < kStepsPerDay; ++k) {
      EXPECT_GE(a.solar[d * kStepsPerDay + k], 0.0);
      EXPECT_LE(a.solar[d * kStepsPerDay + k], o.solar_peak);
    }
  }
}

TEST(Weather, LongRunMeanNearConfigured) {
  WeatherOptions o;
  auto w = synth_weather(2000, 5, o);
  double sum = 0.0;
  for (double v : w.t_out) sum += v;
  EXPECT_NEAR(sum / static_cast<double>(w.t_out.size()), o.t_out_mean, 0.5);
}

TEST(Baseline, EnergyBalanceHoldsEveryStep) {
  const auto cfg = short_config(5);
  const auto f = run_baseline(cfg);
  ASSERT_EQ(f.size(), 5u * kStepsPerDay);
  for (std::size_t i = 0; i + 1 < f.size(); ++i) {
    const double lhs = (f.t_zone[i + 1] - f.t_zone[i]) * cfg.rc.c_zone / kStepSeconds;
    const double rhs = net_heat_flow(f.t_zone[i], f.t_out[i], f.solar[i], f.occ[i], f.u_hvac[i], cfg.rc);
    EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(rhs)) + 1e-6);
    EXPECT_LE(f.u_hvac[i], 0.0);
    EXPECT_LE(-f.u_hvac[i], cfg.hvac.max_cooling(f.t_zone[i]) + 1e-9);
    EXPECT_NEAR(f.p_elec[i], -f.u_hvac[i] / cfg.hvac.cop, 1e-12);
  }
}

TEST(Baseline, DeterministicPerSeed) {
  EXPECT_EQ(run_baseline(short_config(3, 7)), run_baseline(short_config(3, 7)));
  EXPECT_NE(run_baseline(short_config(3, 7)).t_out, run_baseline(short_config(3, 8)).t_out);
}

TEST(Baseline, HysteresisNeverSwitchesInsideDeadband) {
  const auto cfg = short_config(10);
  const auto f = run_baseline(cfg);
  const double half = cfg.schedule.deadband / 2.0;
  for (std::size_t i = 1; i < f.size(); ++i) {
    const bool on_prev = f.u_hvac[i - 1] < 0.0;
    const bool on_now = f.u_hvac[i] < 0.0;
    const double sp = cfg.schedule.setpoint(f.occ[i] > 0.0);
    if (std::abs(f.t_zone[i] - sp) < half && sp == cfg.schedule.setpoint(f.occ[i - 1] > 0.0)) {
      EXPECT_EQ(on_prev, on_now) << "row " << i;
    }
  }
}

TEST(Baseline, OccupiedSteadyBandAndArrivalTransient) {
  const auto cfg = short_config(20);
  const auto f = run_baseline(cfg);
  const double db = cfg.schedule.deadband;
  int long_transients = 0;
  std::size_t run_hot = 0;
  for (std::size_t i = kStepsPerDay; i < f.size(); ++i) {
    const bool occ = f.occ[i] > 0.0;
    if (occ && f.occ[i - 1] == 0.0) run_hot = 0;
    if (occ && f.t_zone[i] > cfg.schedule.setpoint_occupied + db / 2.0) {
      ++run_hot;
      if (run_hot == 4) ++long_transients;
    }
    // Nights after the recovery: temperature sits in the band plus one step of overshoot.
    const double hour = f.hour_of_day(i);
    if (occ && hour >= 0.0 && hour < 6.0) {
      EXPECT_GE(f.t_zone[i], cfg.schedule.setpoint_occupied - db - 0.3);
      EXPECT_LE(f.t_zone[i], cfg.schedule.setpoint_occupied + db + 0.3);
    }
  }
  EXPECT_GE(long_transients, 10);
}

TEST(Baseline, NoGainsNoHvacStaysConstant) {
  RCParams p;
  double t = 22.0;
  for (int k = 0; k < 200; ++k) {
    t = rc_step(t, 22.0, 0.0, 0.0, 0.0, RCParams{p.c_zone, p.r_env, p.a_solar, p.q_person, 1e-300});
  }
  EXPECT_NEAR(t, 22.0, 1e-12);
}

TEST(Frame, SaveLoadRoundTrip) {
  const auto f = run_baseline(short_config(2));
  const auto path = temp_path("roundtrip.csv");
  save_frame(f, path, "config_hash=abc\nsecond line");
  const auto g = load_frame(path);
  EXPECT_EQ(f, g);
  std::filesystem::remove(path);
}

TEST(Frame, Iso8601) {
  EXPECT_EQ(format_iso8601(1685577600), "2023-06-01T00:00:00Z");
  EXPECT_EQ(parse_iso8601("2023-06-01T00:15:00Z"), 1685578500);
  EXPECT_EQ(parse_iso8601("1969-12-31T23:59:59"), -1);
  EXPECT_THROW(parse_iso8601("2023-06-01 00:00"), IngestionError);
}

TEST(Frame, GapReportsLine) {
  const auto path = temp_path("gap.csv");
  write_text(path, std::string(kFrameHeader) +
                       "\n2023-06-01T00:00:00Z,20,0,3,0,0,24\n"
                       "2023-06-01T00:15:00Z,20,0,3,0,0,24\n"
                       "2023-06-01T00:45:00Z,20,0,3,0,0,24\n");
  try {
    load_frame(path);
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
}

TEST(Frame, UnknownColumnNamed) {
  const auto path = temp_path("col.csv");
  write_text(path, std::string(kFrameHeader) + ",humidity\n2023-06-01T00:00:00Z,20,0,3,0,0,24,50\n");
  try {
    load_frame(path);
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("humidity"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
}

TEST(Frame, MalformedNumberReportsLine) {
  const auto path = temp_path("bad.csv");
  write_text(path, std::string(kFrameHeader) + "\n2023-06-01T00:00:00Z,20,0,3,0,0,24\n2023-06-01T00:15:00Z,20,x,3,0,0,24\n");
  try {
    load_frame(path);
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
}

TEST(Frame, MissingFileIsIngestionError) {
  EXPECT_THROW(load_frame(temp_path("does_not_exist.csv")), IngestionError);
}
