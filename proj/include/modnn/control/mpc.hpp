#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "modnn/model/dynamics.hpp"
#include "modnn/nn/params.hpp"
#include "modnn/testbed/simulate.hpp"

namespace modnn {

/// Weights, tariff, actuator bounds and comfort band for one horizon.
///
/// The energy and input terms are evaluated in units of power_scale watts
/// (kW by default) so that they are commensurate with degC^2 comfort terms.
struct MpcLossConfig {
  double w_obj = 1.0;
  double w_comfort = 1e3;
  double w_input = 1e3;
  double cop = 3.0;
  double power_scale = 1000.0;  // W
  double u_low = -std::numeric_limits<double>::infinity();  // W
  double u_high = 0.0;                                      // W
  std::vector<double> price;      // per step, cost per unit energy
  std::vector<double> band_low;   // degC, per predicted step
  std::vector<double> band_high;  // degC

  std::size_t horizon() const { return price.size(); }
  /// Throws ContractError on negative weights, inverted bounds or bands, or
  /// series whose lengths differ from `horizon`.
  void validate(std::size_t horizon) const;
};

struct LossBreakdown {
  double objective = 0.0;        // price-weighted electrical energy, squared
  double input_penalty = 0.0;    // squared hinge on [u_low, u_high]
  double comfort_penalty = 0.0;  // squared hinge on [band_low, band_high]
  double total() const { return objective + input_penalty + comfort_penalty; }
};

/// Each term is weighted and averaged over the M steps (N = 1).
LossBreakdown mpc_loss(std::span<const double> u, std::span<const double> y, const MpcLossConfig& cfg);

struct LossNodes {
  nn::Var total;
  nn::Var objective;
  nn::Var input;
  nn::Var comfort;
};

/// Differentiable form: u and y are M x 1 nodes (W, degC); every term is multiplied by `norm`.
LossNodes mpc_loss(nn::Tape& tape, nn::Var u, nn::Var y, const MpcLossConfig& cfg, double norm);

struct OptimizeOptions {
  int iters = 200;
  double lr = 0.05;          // Adam step in units of power_scale
  double lr_decay = 0.02;    // lr_k = lr / (1 + lr_decay k)
  double grad_tol = 1e-9;    // projected-gradient infinity norm that counts as converged
  std::vector<double> init;  // W; empty means all zero
};

struct ControlPlan {
  std::vector<double> u;  // W, within [u_low, u_high]
  std::vector<double> y;  // degC
  LossBreakdown loss;
  double initial_loss = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Projected Adam on u through the frozen rollout; u is clipped into the
/// bounds after every step and the lowest-loss iterate is returned.
/// Throws OptimizerError naming the iterate when the loss becomes non-finite.
ControlPlan optimize_controls(const Rollout& rollout, const MpcLossConfig& cfg,
                              const OptimizeOptions& options);
ControlPlan optimize_controls(const DynamicsModel& model, const PredictionWindow& window,
                              const MpcLossConfig& cfg, const OptimizeOptions& options);

/// Tariff, comfort band and optimiser settings shared by every MPC-style controller.
struct ControlSettings {
  double w_obj = 1.0;
  double w_comfort = 1e3;
  double w_input = 1e3;
  double power_scale = 1000.0;
  double price_offpeak = 1.0;
  double price_peak = 5.0;
  double comfort_low = 20.0;  // degC
  double margin = 0.25;       // degC kept below the band top when planning
  OptimizeOptions opt;

  void validate() const;
};

/// Upper comfort limit at a step: setpoint plus half the deadband.
double band_top(const testbed::SchedulePolicy& schedule, bool occupied);

/// Occupancy, band and tariff along the testbed's disturbance timeline.
class ControlContext {
 public:
  ControlContext(testbed::TestbedConfig config, testbed::Disturbances disturbances,
                 ControlSettings settings);

  const testbed::TestbedConfig& config() const { return config_; }
  const testbed::Disturbances& disturbances() const { return disturbances_; }
  const ControlSettings& settings() const { return settings_; }
  double hour(std::size_t step) const;
  double price(std::size_t step) const;

  /// Loss configuration for decisions u_i .. u_{i+M-1} when the zone is at t_zone.
  MpcLossConfig loss_config(std::size_t i, std::size_t horizon, double t_zone) const;
  /// Window for the decision at step i: the last L logged rows, the current
  /// measurement and the forecast disturbances; future_u holds `plan`.
  PredictionWindow window(const testbed::TimeSeriesFrame& log, std::size_t i, double t_zone,
                          std::size_t history, std::span<const double> plan) const;

 private:
  testbed::TestbedConfig config_;
  testbed::Disturbances disturbances_;
  ControlSettings settings_;
};

/// Feed-forward policy: (current temperature, M-step forecast of t_out, solar
/// and occupancy, M-step band, M-step price) -> M-step HVAC power through
///   u = u_low + (u_high - u_low) sigmoid(z)
/// so outputs always lie within the bounds.
class ControlLawNet {
 public:
  ControlLawNet(std::size_t horizon, int hidden, std::uint64_t seed);

  std::size_t horizon() const { return horizon_; }
  std::size_t feature_count() const { return 1 + 6 * horizon_; }
  const nn::ParamSet& params() const { return params_; }
  nn::ParamSet& mutable_params() { return params_; }

  /// Raw feature row for one scenario.
  nn::Matrix features(const PredictionWindow& window, const MpcLossConfig& cfg) const;
  /// Sets the affine feature scaling from a feature matrix (rows are scenarios).
  void fit_scaling(const nn::Matrix& raw);
  /// B x M HVAC power in W. `low` and `high` are B x 1 bounds.
  nn::Var forward(nn::Tape& tape, nn::Bound vars, const nn::Matrix& raw, const nn::Matrix& low,
                  const nn::Matrix& high) const;
  std::vector<double> act(const PredictionWindow& window, const MpcLossConfig& cfg) const;

 private:
  std::size_t horizon_;
  nn::ParamSet params_;
  std::size_t w1_, b1_, w2_, b2_;
  nn::Matrix mean_, scale_;
};

struct Scenario {
  PredictionWindow window;
  MpcLossConfig cfg;
};

struct PolicyTrainOptions {
  int epochs = 200;
  double lr = 1e-3;
  std::size_t batch = 32;
  int hidden = 64;
  std::uint64_t seed = 0;
};

struct PolicyTrainResult {
  std::unique_ptr<ControlLawNet> net;
  std::vector<double> epoch_loss;
};

/// Minimises the mean MPC loss over all scenarios by back-propagating through
/// the frozen model into the policy; N is the scenario batch.
/// Throws TrainingError on a non-finite loss.
PolicyTrainResult train_control_law(const DynamicsModel& model, std::span<const Scenario> scenarios,
                                    const PolicyTrainOptions& options);

/// Mean MPC loss of the policy's plans over scenarios.
double policy_loss(const ControlLawNet& net, const DynamicsModel& model, std::span<const Scenario> scenarios);
/// Mean MPC loss of a constant plan.
double constant_plan_loss(double u, const DynamicsModel& model, std::span<const Scenario> scenarios);

/// Scenarios along a logged frame: the window anchored at every stride-th row with
/// its band, tariff and bounds, as a controller at that row would see them.
std::vector<Scenario> make_scenarios(const testbed::TimeSeriesFrame& frame, const testbed::TestbedConfig& config,
                                     const ControlSettings& settings, std::size_t history,
                                     std::size_t horizon, std::size_t stride);

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  /// Supply flow (m^3/s) for the testbed's current step.
  virtual double flow(const testbed::Testbed& bed, const ControlContext& ctx) = 0;
};

class OnOffController final : public Controller {
 public:
  std::string name() const override { return "baseline"; }
  double flow(const testbed::Testbed& bed, const ControlContext& ctx) override;

 private:
  testbed::OnOffPolicy policy_;
};

/// Receding-horizon direct optimisation through a frozen model; the previous
/// plan, shifted by one step, warm-starts the next solve.
class MpcController final : public Controller {
 public:
  MpcController(std::string name, std::shared_ptr<const DynamicsModel> model);
  std::string name() const override { return name_; }
  double flow(const testbed::Testbed& bed, const ControlContext& ctx) override;
  const ControlPlan& last_plan() const { return last_; }

 private:
  std::string name_;
  std::shared_ptr<const DynamicsModel> model_;
  std::vector<double> warm_;
  ControlPlan last_;
};

class PolicyController final : public Controller {
 public:
  PolicyController(std::string name, std::shared_ptr<const ControlLawNet> net, std::size_t history);
  std::string name() const override { return name_; }
  double flow(const testbed::Testbed& bed, const ControlContext& ctx) override;

 private:
  std::string name_;
  std::shared_ptr<const ControlLawNet> net_;
  std::size_t history_;
};

/// Flow that delivers thermal power u at the current zone temperature, clamped to the actuator range.
double flow_for_power(double u, double t_zone, const testbed::HvacParams& hvac);

struct ClosedLoopOptions {
  int warmup_days = 2;   // on-off operation that fills the encoder history
  int control_days = 7;
  ControlSettings settings;
};

/// Runs `warmup_days` of on-off control, then `control_days` under `controller`
/// with perfect disturbance forecasts. Returns the control-period rows.
testbed::TimeSeriesFrame closed_loop(Controller& controller, const testbed::TestbedConfig& config,
                                     const ClosedLoopOptions& options);

struct BandSchedule {
  std::vector<double> low;
  std::vector<double> high;
  std::vector<bool> occupied;
};

/// Band at each logged row of a frame: [comfort_low, setpoint + deadband / 2].
BandSchedule comfort_band(const testbed::TimeSeriesFrame& frame, const testbed::SchedulePolicy& schedule,
                          double comfort_low);

/// Occupied-step excursions outside the band, degC h.
double temp_violation(const testbed::TimeSeriesFrame& frame, const BandSchedule& band);

struct PeakReduction {
  double percent = 0.0;  // mean over days whose baseline peak is non-zero
  std::vector<std::optional<double>> per_day;
  std::vector<double> peak_w;
  std::vector<double> baseline_peak_w;
};

/// 100 (1 - controller peak / baseline peak) of p_elec inside [peak_start, peak_end),
/// per day and averaged over days. Throws ContractError on misaligned frames and
/// MetricError when no day has a non-zero baseline peak.
PeakReduction peak_load_reduction(const testbed::TimeSeriesFrame& frame,
                                  const testbed::TimeSeriesFrame& baseline, double peak_start,
                                  double peak_end);

struct ControlMetrics {
  std::string name;
  double violation_ch = 0.0;
  double energy_kwh = 0.0;
  double peak_reduction_pct = 0.0;
  std::vector<double> day_violation_ch;
  std::vector<double> day_energy_kwh;
  PeakReduction peak;

  nlohmann::json to_json() const;
};

ControlMetrics control_metrics(const std::string& name, const testbed::TimeSeriesFrame& frame,
                               const testbed::TimeSeriesFrame& baseline,
                               const testbed::TestbedConfig& config, const ControlSettings& settings);

}  // namespace modnn
