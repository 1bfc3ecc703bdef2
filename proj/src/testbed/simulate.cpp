#include "modnn/testbed/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "modnn/error.hpp"
#include "modnn/random.hpp"

namespace modnn::testbed {

namespace {

constexpr std::uint64_t kWeatherStream = 1;
constexpr std::uint64_t kOccupancyStream = 2;
constexpr double kNoiseCorrelation = 0.95;  // per 15-minute step

int to_grid(double hour) { return static_cast<int>(std::lround(hour * 4.0)); }

}  // namespace

void WeatherOptions::validate() const {
  if (!(t_out_amplitude >= 0.0 && t_out_noise >= 0.0 && t_out_day_spread >= 0.0 &&
        solar_peak >= 0.0)) {
    throw ConfigError("weather amplitudes must be non-negative");
  }
  if (!(0.0 <= sunrise && sunrise < sunset && sunset <= 24.0)) {
    throw ConfigError("weather needs 0 <= sunrise < sunset <= 24");
  }
  if (!(clearness_min >= 0.0 && clearness_min <= 1.0)) {
    throw ConfigError("clearness_min must lie in [0, 1]");
  }
}

WeatherSeries synth_weather(int days, std::uint64_t seed, const WeatherOptions& o,
                            double start_hour) {
  Rng rng(seed);
  WeatherSeries w;
  const auto n = static_cast<std::size_t>(std::max(days, 0)) * kStepsPerDay;
  w.t_out.reserve(n);
  w.solar.reserve(n);
  const double innovation = std::sqrt(1.0 - kNoiseCorrelation * kNoiseCorrelation);
  double noise = 0.0;
  for (int d = 0; d < days; ++d) {
    const double offset = rng.uniform(-o.t_out_day_spread, o.t_out_day_spread);
    const double clearness = rng.uniform(o.clearness_min, 1.0);
    for (int k = 0; k < kStepsPerDay; ++k) {
      const double hour = std::fmod(start_hour + k * kStepHours, 24.0);
      noise = kNoiseCorrelation * noise + innovation * o.t_out_noise * rng.normal();
      noise = std::clamp(noise, -3.0 * o.t_out_noise, 3.0 * o.t_out_noise);
      const double phase = 2.0 * std::numbers::pi * (hour - o.t_out_peak_hour) / 24.0;
      w.t_out.push_back(o.t_out_mean + offset + o.t_out_amplitude * std::cos(phase) + noise);
      double s = 0.0;
      if (hour > o.sunrise && hour < o.sunset) {
        s = o.solar_peak * clearness *
            std::sin(std::numbers::pi * (hour - o.sunrise) / (o.sunset - o.sunrise));
      }
      w.solar.push_back(std::max(0.0, s));
    }
  }
  return w;
}

OccupancySeries occupancy_schedule(int days, std::uint64_t seed, const SchedulePolicy& p,
                                   int occupants) {
  Rng rng(seed);
  OccupancySeries s;
  for (int d = 0; d < days; ++d) {
    const int depart = to_grid(rng.uniform(p.depart_min, p.depart_max));
    const int arrive = to_grid(rng.uniform(p.arrive_min, p.arrive_max));
    s.depart_step.push_back(depart);
    s.arrive_step.push_back(arrive);
    for (int k = 0; k < kStepsPerDay; ++k) {
      s.occ.push_back(k >= depart && k < arrive ? 0.0 : static_cast<double>(occupants));
    }
  }
  return s;
}

void TestbedConfig::validate() const {
  rc.validate();
  hvac.validate();
  schedule.validate();
  weather.validate();
  if (occupants < 0) throw ConfigError("occupants must be non-negative");
  if (days < 1) throw ConfigError("days must be at least 1");
  if (!std::isfinite(t_zone_init)) throw ConfigError("t_zone_init must be finite");
  if (!(hvac.t_supply < schedule.setpoint_occupied)) {
    throw ConfigError("t_supply must be below the occupied setpoint in cooling season");
  }
}

Disturbances make_disturbances(const TestbedConfig& config, int days) {
  const double start_hour =
      static_cast<double>(((config.start % 86400) + 86400) % 86400) / 3600.0;
  auto w = synth_weather(days, derive_seed(config.seed, kWeatherStream), config.weather, start_hour);
  auto o = occupancy_schedule(days, derive_seed(config.seed, kOccupancyStream), config.schedule,
                              config.occupants);
  return {std::move(w.t_out), std::move(w.solar), std::move(o.occ)};
}

Testbed::Testbed(const TestbedConfig& config, Disturbances disturbances)
    : config_(config), disturbances_(std::move(disturbances)), t_zone_(config.t_zone_init) {
  frame_.start = config.start;
  frame_.reserve(disturbances_.size());
}

void Testbed::apply_flow(double flow) {
  if (done()) {
    throw SimulationError("testbed: no disturbances left to simulate");
  }
  const std::size_t i = step_index();
  const double u = hvac_from_flow(flow, t_zone_, config_.hvac);
  const double p = std::abs(u) / config_.hvac.cop;
  const double next = rc_step(t_zone_, disturbances_.t_out[i], disturbances_.solar[i],
                              disturbances_.occ[i], u, config_.rc);
  frame_.push_row(disturbances_.t_out[i], disturbances_.solar[i], disturbances_.occ[i], u, p, t_zone_);
  t_zone_ = next;
}

double OnOffPolicy::flow(const Testbed& bed) {
  const std::size_t i = bed.step_index();
  on_ = onoff_controller(bed.zone_temp(), bed.setpoint(i), bed.config().schedule.deadband, on_);
  return on_ ? bed.config().hvac.flow_max : 0.0;
}

TimeSeriesFrame run_baseline(const TestbedConfig& config) {
  config.validate();
  Testbed bed(config, make_disturbances(config, config.days));
  OnOffPolicy policy;
  while (!bed.done()) {
    bed.apply_flow(policy.flow(bed));
  }
  return bed.frame();
}

}  // namespace modnn::testbed
