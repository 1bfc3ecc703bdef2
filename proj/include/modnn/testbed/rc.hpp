#pragma once

namespace modnn::testbed {

inline constexpr double kStepSeconds = 900.0;
inline constexpr double kStepHours = 0.25;
inline constexpr int kStepsPerDay = 96;

/// Lumped single-zone thermal network.
struct RCParams {
  double c_zone = 3.0e6;        // J/degC, air plus lumped envelope mass
  double r_env = 1.0 / 60.0;    // degC/W
  double a_solar = 1.0;         // m^2 equivalent aperture
  double q_person = 100.0;      // W per occupant
  double q_base = 150.0;        // W plug and lighting load

  /// Positivity plus the explicit-Euler guard dt / (R C) < 0.5. Throws ConfigError.
  void validate() const;
};

struct HvacParams {
  double t_supply = 13.0;   // degC
  double flow_max = 0.16;   // m^3/s
  double rho_air = 1.2;     // kg/m^3
  double cp_air = 1005.0;   // J/(kg degC)
  double cop = 3.0;

  void validate() const;
  /// Largest cooling magnitude (W) available at the given zone temperature.
  double max_cooling(double t_zone) const;
};

struct SchedulePolicy {
  double setpoint_occupied = 24.0;
  double setpoint_unoccupied = 32.0;
  double deadband = 0.5;
  double depart_min = 7.0;   // hours
  double depart_max = 10.0;
  double arrive_min = 16.0;
  double arrive_max = 20.0;
  double peak_start = 15.0;
  double peak_end = 18.0;

  void validate() const;
  double setpoint(bool occupied) const {
    return occupied ? setpoint_occupied : setpoint_unoccupied;
  }
};

/// Sum of heat flows into the zone (W).
double net_heat_flow(double t_zone, double t_out, double solar, double occ, double u_hvac,
                     const RCParams& params);

/// One explicit-Euler step of 900 s. Throws SimulationError on non-finite input.
double rc_step(double t_zone, double t_out, double solar, double occ, double u_hvac,
               const RCParams& params);

/// Signed thermal power delivered by supply air (negative while cooling).
/// Throws ActuationError when flow is outside [0, flow_max].
double hvac_from_flow(double flow, double t_zone, const HvacParams& params);

/// Hysteresis thermostat: true means run at full flow.
bool onoff_controller(double t_zone, double setpoint, double deadband, bool prev_on);

}  // namespace modnn::testbed
