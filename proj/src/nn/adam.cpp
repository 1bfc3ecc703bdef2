#include "modnn/nn/adam.hpp"

#include <cmath>

#include "modnn/error.hpp"

namespace modnn::nn {

Adam::Adam(const ParamSet& params, AdamOptions options) : options_(options) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

void Adam::step(ParamSet& params, const std::vector<Matrix>& grads) {
  if (grads.size() != params.size() || m_.size() != params.size()) {
    throw ShapeError("adam: gradient count does not match parameter count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads[i];
    if (g.rows() != params[i].value.rows() || g.cols() != params[i].value.cols()) {
      throw ShapeError("adam: gradient shape mismatch for '" + params[i].name + "'");
    }
    if (!g.allFinite()) {
      throw TrainingError("non-finite gradient for parameter '" + params[i].name + "'");
    }
  }
  ++step_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    params[i].value.array() -=
        options_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + options_.eps);
  }
}

}  // namespace modnn::nn
