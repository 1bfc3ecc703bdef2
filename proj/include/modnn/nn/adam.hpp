#pragma once

#include <cstdint>
#include <vector>

#include "modnn/nn/params.hpp"

namespace modnn::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a ParamSet.
class Adam {
 public:
  Adam(const ParamSet& params, AdamOptions options);

  /// Applies one step. `grads` is index-aligned with `params`.
  /// Throws TrainingError naming the first parameter with a non-finite gradient;
  /// in that case nothing is modified.
  void step(ParamSet& params, const std::vector<Matrix>& grads);

  std::int64_t steps() const { return step_; }
  AdamOptions& options() { return options_; }
  const Matrix& first_moment(std::size_t i) const { return m_[i]; }
  const Matrix& second_moment(std::size_t i) const { return v_[i]; }

 private:
  AdamOptions options_;
  std::int64_t step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace modnn::nn
