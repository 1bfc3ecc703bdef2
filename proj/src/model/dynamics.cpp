#include "modnn/model/dynamics.hpp"

#include <cmath>

#include "modnn/error.hpp"

namespace modnn {

nn::Matrix column(std::span<const double> v) {
  nn::Matrix m(static_cast<nn::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<nn::Index>(i), 0) = v[i];
  return m;
}

std::vector<double> Rollout::predict(std::span<const double> u) const {
  if (u.size() != horizon()) {
    throw ShapeError("rollout: HVAC sequence has " + std::to_string(u.size()) +
                     " steps, expected " + std::to_string(horizon()));
  }
  nn::Tape tape;
  const nn::Matrix& y = tape.value(predict(tape, tape.constant(column(u))));
  return std::vector<double>(y.data(), y.data() + y.size());
}

std::vector<double> DynamicsModel::forward(const PredictionWindow& window) const {
  return condition(window)->predict(window.future_u);
}

std::vector<double> DynamicsModel::override_hvac(const PredictionWindow& window,
                                                 std::span<const double> u,
                                                 HvacBounds bounds) const {
  if (u.size() != window.horizon()) {
    throw ContractError("override_hvac: sequence length " + std::to_string(u.size()) +
                        " does not match the horizon " + std::to_string(window.horizon()));
  }
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (!std::isfinite(u[k]) || u[k] < bounds.low || u[k] > bounds.high) {
      throw ContractError("override_hvac: u[" + std::to_string(k) + "] = " + std::to_string(u[k]) +
                          " outside actuator bounds");
    }
  }
  return condition(window)->predict(u);
}

nn::Matrix DynamicsModel::hvac_jacobian(const PredictionWindow& window) const {
  auto rollout = condition(window);
  const auto M = static_cast<nn::Index>(rollout->horizon());
  nn::Tape tape;
  nn::Var u = tape.leaf(column(window.future_u));
  nn::Var y = rollout->predict(tape, u);
  nn::Matrix jac = nn::Matrix::Zero(M, M);
  for (nn::Index t = 0; t < M; ++t) {
    nn::Matrix seed = nn::Matrix::Zero(M, 1);
    seed(t, 0) = 1.0;
    tape.backward(y, seed);
    jac.row(t) = tape.gradient(u).transpose();
  }
  return jac;
}

}  // namespace modnn
