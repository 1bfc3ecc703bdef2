#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "modnn/testbed/frame.hpp"
#include "modnn/testbed/rc.hpp"

namespace modnn::testbed {

struct WeatherOptions {
  double t_out_mean = 26.0;       // degC
  double t_out_amplitude = 8.0;   // degC, half the diurnal swing
  double t_out_peak_hour = 15.0;
  double t_out_noise = 1.0;       // degC, std of the AR(1) term; clipped at 3 std
  double t_out_day_spread = 2.0;  // degC, per-day offset drawn from U(-s, s)
  double solar_peak = 800.0;      // W/m^2 on a clear day
  double sunrise = 6.0;
  double sunset = 20.0;
  double clearness_min = 0.6;     // per-day factor drawn from U(clearness_min, 1)

  void validate() const;
};

struct WeatherSeries {
  std::vector<double> t_out;
  std::vector<double> solar;
};

struct OccupancySeries {
  std::vector<double> occ;
  std::vector<int> depart_step;  // per day, step index within the day
  std::vector<int> arrive_step;
};

/// Diurnal cosine plus bounded AR(1) noise for t_out; clipped half-sine for solar.
WeatherSeries synth_weather(int days, std::uint64_t seed, const WeatherOptions& options,
                            double start_hour = 0.0);

/// Daily departure/arrival draws rounded to the 15-minute grid; `occupants`
/// persons are home outside [depart, arrive).
OccupancySeries occupancy_schedule(int days, std::uint64_t seed, const SchedulePolicy& policy,
                                   int occupants);

struct TestbedConfig {
  RCParams rc;
  HvacParams hvac;
  SchedulePolicy schedule;
  WeatherOptions weather;
  int occupants = 3;
  double t_zone_init = 24.0;
  std::int64_t start = 1685577600;  // 2023-06-01T00:00:00Z
  int days = 92;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Exogenous inputs for a whole run.
struct Disturbances {
  std::vector<double> t_out;
  std::vector<double> solar;
  std::vector<double> occ;
  std::size_t size() const { return occ.size(); }
};

/// Weather and occupancy for `days` days, each from its own seed-derived stream.
Disturbances make_disturbances(const TestbedConfig& config, int days);

/// Explicit simulation state: the zone plus a log of every applied step.
class Testbed {
 public:
  Testbed(const TestbedConfig& config, Disturbances disturbances);

  std::size_t step_index() const { return frame_.size(); }
  bool done() const { return step_index() >= disturbances_.size(); }
  double zone_temp() const { return t_zone_; }
  bool occupied(std::size_t i) const { return disturbances_.occ.at(i) > 0.0; }
  double setpoint(std::size_t i) const { return config_.schedule.setpoint(occupied(i)); }
  const Disturbances& disturbances() const { return disturbances_; }
  const TestbedConfig& config() const { return config_; }

  /// Applies the supply flow for the current step, logs the row and advances.
  void apply_flow(double flow);
  const TimeSeriesFrame& frame() const { return frame_; }

 private:
  TestbedConfig config_;
  Disturbances disturbances_;
  TimeSeriesFrame frame_;
  double t_zone_;
};

/// On-off thermostat with the occupancy-driven setpoint schedule.
class OnOffPolicy {
 public:
  double flow(const Testbed& bed);

 private:
  bool on_ = false;
};

/// Closed loop of the on-off controller over config.days days.
TimeSeriesFrame run_baseline(const TestbedConfig& config);

}  // namespace modnn::testbed
