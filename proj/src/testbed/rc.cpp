#include "modnn/testbed/rc.hpp"

#include <cmath>
#include <string>

#include "modnn/error.hpp"

namespace modnn::testbed {

namespace {

void require_positive(const char* key, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string(key) + " must be a positive finite number");
  }
}

}  // namespace

void RCParams::validate() const {
  require_positive("c_zone", c_zone);
  require_positive("r_env", r_env);
  require_positive("a_solar", a_solar);
  require_positive("q_person", q_person);
  require_positive("q_base", q_base);
  if (kStepSeconds / (r_env * c_zone) >= 0.5) {
    throw ConfigError("r_env * c_zone too small: explicit Euler at 900 s needs dt/(R C) < 0.5");
  }
}

void HvacParams::validate() const {
  require_positive("flow_max", flow_max);
  require_positive("rho_air", rho_air);
  require_positive("cp_air", cp_air);
  require_positive("cop", cop);
  if (!std::isfinite(t_supply)) {
    throw ConfigError("t_supply must be finite");
  }
}

double HvacParams::max_cooling(double t_zone) const {
  return flow_max * rho_air * cp_air * std::max(0.0, t_zone - t_supply);
}

void SchedulePolicy::validate() const {
  require_positive("deadband", deadband);
  if (!(depart_min <= depart_max && depart_max < arrive_min && arrive_min <= arrive_max &&
        depart_min >= 0.0 && arrive_max <= 24.0)) {
    throw ConfigError("schedule windows must satisfy depart_min <= depart_max < arrive_min <= arrive_max");
  }
  if (!(peak_start < peak_end)) {
    throw ConfigError("peak_start must precede peak_end");
  }
  if (!(setpoint_occupied <= setpoint_unoccupied)) {
    throw ConfigError("setpoint_occupied must not exceed setpoint_unoccupied in cooling season");
  }
}

double net_heat_flow(double t_zone, double t_out, double solar, double occ, double u_hvac,
                     const RCParams& p) {
  return (t_out - t_zone) / p.r_env + p.a_solar * solar + p.q_person * occ + p.q_base + u_hvac;
}

double rc_step(double t_zone, double t_out, double solar, double occ, double u_hvac,
               const RCParams& params) {
  if (!std::isfinite(t_zone) || !std::isfinite(t_out) || !std::isfinite(solar) ||
      !std::isfinite(occ) || !std::isfinite(u_hvac)) {
    throw SimulationError("rc_step: non-finite input");
  }
  return t_zone + kStepSeconds / params.c_zone *
                      net_heat_flow(t_zone, t_out, solar, occ, u_hvac, params);
}

double hvac_from_flow(double flow, double t_zone, const HvacParams& p) {
  if (!(flow >= 0.0 && flow <= p.flow_max)) {
    throw ActuationError("supply flow " + std::to_string(flow) + " outside [0, " +
                         std::to_string(p.flow_max) + "]");
  }
  if (flow == 0.0) return 0.0;  // avoid a signed zero in logs
  return flow * p.rho_air * p.cp_air * (p.t_supply - t_zone);
}

bool onoff_controller(double t_zone, double setpoint, double deadband, bool prev_on) {
  if (t_zone > setpoint + deadband / 2.0) return true;
  if (t_zone < setpoint - deadband / 2.0) return false;
  return prev_on;
}

}  // namespace modnn::testbed
