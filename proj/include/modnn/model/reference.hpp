#pragma once

#include <memory>

#include "modnn/model/dynamics.hpp"
#include "modnn/testbed/rc.hpp"

namespace modnn {

/// Base for hand-built models that ignore the encoder history.
class ReferenceModel : public DynamicsModel {
 public:
  ReferenceModel(std::size_t history, std::size_t horizon) : history_(history), horizon_(horizon) {}

  std::size_t history_length() const override { return history_; }
  std::size_t horizon() const override { return horizon_; }

 private:
  std::size_t history_;
  std::size_t horizon_;
};

/// y_k = y_0 + gain * (u_0 + ... + u_k), gain in degC/W.
class IntegratorModel final : public ReferenceModel {
 public:
  IntegratorModel(double gain, std::size_t history, std::size_t horizon)
      : ReferenceModel(history, horizon), gain_(gain) {}
  std::string variant() const override { return "integrator"; }
  std::unique_ptr<Rollout> condition(const PredictionWindow& window) const override;

 private:
  double gain_;
};

/// y_k = y_0 + gain * u_k.
class StaticGainModel final : public ReferenceModel {
 public:
  StaticGainModel(double gain, std::size_t history, std::size_t horizon)
      : ReferenceModel(history, horizon), gain_(gain) {}
  std::string variant() const override { return "static_gain"; }
  std::unique_ptr<Rollout> condition(const PredictionWindow& window) const override;

 private:
  double gain_;
};

/// Holds the current temperature for the whole horizon.
class ConstantModel final : public ReferenceModel {
 public:
  using ReferenceModel::ReferenceModel;
  std::string variant() const override { return "constant"; }
  std::unique_ptr<Rollout> condition(const PredictionWindow& window) const override;
};

/// The RC testbed's own Euler recursion driven by the window's disturbances.
class RcOracleModel final : public ReferenceModel {
 public:
  RcOracleModel(testbed::RCParams params, std::size_t history, std::size_t horizon)
      : ReferenceModel(history, horizon), params_(params) {}
  std::string variant() const override { return "rc_oracle"; }
  std::unique_ptr<Rollout> condition(const PredictionWindow& window) const override;

 private:
  testbed::RCParams params_;
};

/// Reflects another model's HVAC response about its u = 0 trajectory:
///   y'(u) = 2 y(0) - y(u)
/// Same trajectory with the HVAC off, opposite sign of every d y / d u.
class MirroredModel final : public DynamicsModel {
 public:
  explicit MirroredModel(std::shared_ptr<const DynamicsModel> base) : base_(std::move(base)) {}

  std::string variant() const override { return "mirrored_" + base_->variant(); }
  std::size_t history_length() const override { return base_->history_length(); }
  std::size_t horizon() const override { return base_->horizon(); }
  std::unique_ptr<Rollout> condition(const PredictionWindow& window) const override;

 private:
  std::shared_ptr<const DynamicsModel> base_;
};

}  // namespace modnn
