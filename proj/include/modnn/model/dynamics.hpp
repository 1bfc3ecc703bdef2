#pragma once

#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "modnn/model/window.hpp"
#include "modnn/nn/tape.hpp"

namespace modnn {

/// A model conditioned on everything in a window except the future HVAC sequence.
///
/// For a fixed history, current measurement and disturbance forecast, the
/// predicted temperatures are a function of u alone; optimisers and audits
/// evaluate that function many times, so the u-independent part is computed once.
class Rollout {
 public:
  virtual ~Rollout() = default;

  virtual std::size_t horizon() const = 0;
  /// u is an M x 1 node in W; returns the M x 1 predicted zone temperatures in degC.
  virtual nn::Var predict(nn::Tape& tape, nn::Var u) const = 0;

  std::vector<double> predict(std::span<const double> u) const;
};

struct HvacBounds {
  double low = -std::numeric_limits<double>::infinity();
  double high = std::numeric_limits<double>::infinity();
};

/// Common interface of ModNN, the LSTM baseline and the reference models.
/// Implementations are immutable after construction; all methods are const and
/// safe to call concurrently.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual std::string variant() const = 0;
  virtual std::size_t history_length() const = 0;
  virtual std::size_t horizon() const = 0;
  /// Throws ShapeError/ContractError when the window does not fit the model.
  virtual std::unique_ptr<Rollout> condition(const PredictionWindow& window) const = 0;

  /// Predicted zone temperatures for the window's own future_u.
  std::vector<double> forward(const PredictionWindow& window) const;
  /// Prediction with future_u replaced; ContractError if u leaves `bounds` or has the wrong length.
  std::vector<double> override_hvac(const PredictionWindow& window, std::span<const double> u,
                                    HvacBounds bounds = {}) const;
  /// M x M matrix of d y_t / d u_s in degC/W, one reverse sweep per output step.
  nn::Matrix hvac_jacobian(const PredictionWindow& window) const;
};

/// Column vector constant for a sequence.
nn::Matrix column(std::span<const double> v);

}  // namespace modnn
