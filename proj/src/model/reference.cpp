#include "modnn/model/reference.hpp"

#include "modnn/error.hpp"

namespace modnn {

namespace {

using nn::Matrix;
using nn::Tape;
using nn::Var;

void check_u(const Tape& tape, Var u, std::size_t horizon) {
  const Matrix& v = tape.value(u);
  if (v.rows() != static_cast<nn::Index>(horizon) || v.cols() != 1) {
    throw ShapeError("rollout: u must be " + std::to_string(horizon) + "x1");
  }
}

/// y = offset + gain * (cumulative ? cumsum(u) : u)
class LinearRollout final : public Rollout {
 public:
  LinearRollout(Matrix offset, double gain, bool cumulative)
      : offset_(std::move(offset)), gain_(gain), cumulative_(cumulative) {}

  std::size_t horizon() const override { return static_cast<std::size_t>(offset_.rows()); }

  Var predict(Tape& tape, Var u) const override {
    check_u(tape, u, horizon());
    if (horizon() == 0) return tape.constant(Matrix::Zero(0, 1));
    Var du = tape.scale(cumulative_ ? tape.cumsum_rows(u) : u, gain_);
    return tape.add(tape.constant(offset_), du);
  }

 private:
  Matrix offset_;
  double gain_;
  bool cumulative_;
};

class MirroredRollout final : public Rollout {
 public:
  MirroredRollout(std::unique_ptr<Rollout> base, Matrix twice_y_off)
      : base_(std::move(base)), twice_y_off_(std::move(twice_y_off)) {}

  std::size_t horizon() const override { return base_->horizon(); }

  Var predict(Tape& tape, Var u) const override {
    return tape.sub(tape.constant(twice_y_off_), base_->predict(tape, u));
  }

 private:
  std::unique_ptr<Rollout> base_;
  Matrix twice_y_off_;
};

Matrix constant_column(std::size_t n, double v) {
  return Matrix::Constant(static_cast<nn::Index>(n), 1, v);
}

}  // namespace

std::unique_ptr<Rollout> IntegratorModel::condition(const PredictionWindow& window) const {
  window.check(history_length(), horizon());
  return std::make_unique<LinearRollout>(constant_column(horizon(), window.current.t_zone), gain_, true);
}

std::unique_ptr<Rollout> StaticGainModel::condition(const PredictionWindow& window) const {
  window.check(history_length(), horizon());
  return std::make_unique<LinearRollout>(constant_column(horizon(), window.current.t_zone), gain_, false);
}

std::unique_ptr<Rollout> ConstantModel::condition(const PredictionWindow& window) const {
  window.check(history_length(), horizon());
  return std::make_unique<LinearRollout>(constant_column(horizon(), window.current.t_zone), 0.0, false);
}

std::unique_ptr<Rollout> RcOracleModel::condition(const PredictionWindow& window) const {
  window.check(history_length(), horizon());
  // T_{k+1} = a T_k + g (drive_k + u_k) with a = 1 - dt/(RC), g = dt/C, so
  // T_{k+1} = a^{k+1} T_0 + sum_{j<=k} a^{k-j} g (drive_j + u_j).
  const std::size_t M = horizon();
  const double g = testbed::kStepSeconds / params_.c_zone;
  const double a = 1.0 - g / params_.r_env;
  Matrix offset(static_cast<nn::Index>(M), 1);
  Matrix response = Matrix::Zero(static_cast<nn::Index>(M), static_cast<nn::Index>(M));
  double t = window.current.t_zone;
  for (std::size_t k = 0; k < M; ++k) {
    const DisturbanceStep& d = window.future_dist[k];
    t = testbed::rc_step(t, d.t_out, d.solar, d.occ, 0.0, params_);
    offset(static_cast<nn::Index>(k), 0) = t;
    double coef = g;
    for (std::size_t j = k + 1; j-- > 0;) {
      response(static_cast<nn::Index>(k), static_cast<nn::Index>(j)) = coef;
      coef *= a;
    }
  }

  class RcRollout final : public Rollout {
   public:
    RcRollout(Matrix offset, Matrix response)
        : offset_(std::move(offset)), response_(std::move(response)) {}
    std::size_t horizon() const override { return static_cast<std::size_t>(offset_.rows()); }
    Var predict(Tape& tape, Var u) const override {
      check_u(tape, u, horizon());
      if (horizon() == 0) return tape.constant(Matrix::Zero(0, 1));
      return tape.add(tape.constant(offset_), tape.matmul(tape.constant(response_), u));
    }

   private:
    Matrix offset_;
    Matrix response_;
  };
  return std::make_unique<RcRollout>(std::move(offset), std::move(response));
}

std::unique_ptr<Rollout> MirroredModel::condition(const PredictionWindow& window) const {
  auto base = base_->condition(window);
  const std::vector<double> zero(base->horizon(), 0.0);
  const std::vector<double> y_off = base->predict(zero);
  Matrix twice = 2.0 * column(y_off);
  return std::make_unique<MirroredRollout>(std::move(base), std::move(twice));
}

}  // namespace modnn
