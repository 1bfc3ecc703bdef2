#include "modnn/error.hpp"
#include "modnn/model/neural.hpp"

namespace modnn {

namespace {

using nn::Matrix;
using nn::Tape;
using nn::Var;

Matrix encoder_features(const Matrix& step) { return step; }
Matrix current_features(const Matrix& step) {
  return WindowBatch::select(step, {kFeatTout, kFeatSolar, kFeatOcc, kFeatTzone, kFeatSin, kFeatCos});
}
// Disturbance part of a decoder input; the normalised u is appended as the last column.
Matrix decoder_features(const Matrix& step) {
  return WindowBatch::select(step, {kFeatTout, kFeatSolar, kFeatOcc, kFeatSin, kFeatCos});
}
constexpr nn::Index kDecoderDisturbances = 5;

class LstmRollout final : public Rollout {
 public:
  LstmRollout(const LstmModel& model, Matrix h, Matrix c, Matrix dist_proj)
      : model_(model), h_(std::move(h)), c_(std::move(c)), dist_proj_(std::move(dist_proj)) {}

  std::size_t horizon() const override { return static_cast<std::size_t>(dist_proj_.rows()); }

  Var predict(Tape& tape, Var u) const override {
    const Matrix& uv = tape.value(u);
    const nn::Index M = dist_proj_.rows();
    if (uv.rows() != M || uv.cols() != 1) {
      throw ShapeError("lstm rollout: u must be " + std::to_string(M) + "x1");
    }
    const auto& l = model_.layers();
    const auto& us = model_.stats().u_hvac;
    const auto& ys = model_.stats().t_zone;
    const auto vars = model_.params().bind(tape, false);
    Var u_row = tape.rows(vars[l.decoder.w_i], kDecoderDisturbances, 1);
    Var u_norm = tape.shift(tape.scale(u, 1.0 / us.std), -us.mean / us.std);
    nn::LstmCell::State s{tape.constant(h_), tape.constant(c_)};
    Var y;
    for (nn::Index k = 0; k < M; ++k) {
      Var proj = tape.add(tape.constant(dist_proj_.row(k)), tape.matmul(tape.rows(u_norm, k, 1), u_row));
      s = l.decoder.step_projected(tape, vars, proj, s);
      Var y_k = l.readout.apply(tape, vars, s.h);
      y = k == 0 ? y_k : tape.concat_rows(y, y_k);
    }
    if (M == 0) {
      return tape.constant(Matrix::Zero(0, 1));
    }
    return tape.shift(tape.scale(y, ys.std), ys.mean);
  }

 private:
  const LstmModel& model_;
  Matrix h_, c_;
  Matrix dist_proj_;  // M x 4H
};

}  // namespace

LstmModel::LstmModel(ModelShape shape, NormStats stats, std::uint64_t seed)
    : NeuralModel(shape, stats) {
  Rng rng(seed);
  const nn::Index H = shape.hidden;
  if (H < 1) {
    throw ConfigError("lstm: hidden size must be positive");
  }
  layers_.encoder = nn::LstmCell::create(params_, "lstm.encoder", kFeatureCount, H, rng);
  layers_.current = nn::LstmCell::create(params_, "lstm.current", 6, H, rng);
  layers_.decoder = nn::LstmCell::create(params_, "lstm.decoder", kDecoderDisturbances + 1, H, rng);
  layers_.readout = nn::LinearLayer::create(params_, "lstm.readout", H, 1, rng);
}

std::vector<Var> LstmModel::predict_batch(Tape& tape, nn::Bound vars, const WindowBatch& batch) const {
  if (batch.history.size() != shape_.history || batch.future.size() != shape_.horizon) {
    throw ShapeError("lstm: batch does not match the configured history/horizon");
  }
  const auto B = static_cast<nn::Index>(batch.size());
  const nn::Index H = shape_.hidden;
  const Layers& l = layers_;
  const ChannelStats& ys = stats_.t_zone;

  nn::LstmCell::State s{tape.constant(Matrix::Zero(B, H)), tape.constant(Matrix::Zero(B, H))};
  for (const Matrix& step : batch.history) {
    s = l.encoder.step(tape, vars, tape.constant(encoder_features(step)), s);
  }
  s = l.current.step(tape, vars, tape.constant(current_features(batch.current)), s);
  std::vector<Var> out;
  out.reserve(batch.future.size());
  for (std::size_t k = 0; k < batch.future.size(); ++k) {
    Matrix x(B, kDecoderDisturbances + 1);
    x << decoder_features(batch.future[k]), batch.future_u.col(static_cast<nn::Index>(k));
    s = l.decoder.step(tape, vars, tape.constant(std::move(x)), s);
    out.push_back(tape.shift(tape.scale(l.readout.apply(tape, vars, s.h), ys.std), ys.mean));
  }
  return out;
}

std::unique_ptr<Rollout> LstmModel::condition(const PredictionWindow& window) const {
  window.check(shape_.history, shape_.horizon);
  const WindowBatch batch = make_batch({&window}, stats_);
  Tape tape;
  const auto vars = params_.bind(tape, false);
  const Layers& l = layers_;
  const nn::Index H = shape_.hidden;
  nn::LstmCell::State s{tape.constant(Matrix::Zero(1, H)), tape.constant(Matrix::Zero(1, H))};
  for (const Matrix& step : batch.history) {
    s = l.encoder.step(tape, vars, tape.constant(encoder_features(step)), s);
  }
  s = l.current.step(tape, vars, tape.constant(current_features(batch.current)), s);

  const Matrix& w_i = params_[l.decoder.w_i].value;
  Matrix proj(static_cast<nn::Index>(batch.future.size()), 4 * H);
  for (std::size_t k = 0; k < batch.future.size(); ++k) {
    proj.row(static_cast<nn::Index>(k)) = decoder_features(batch.future[k]) * w_i.topRows(kDecoderDisturbances);
  }
  return std::make_unique<LstmRollout>(*this, tape.value(s.h), tape.value(s.c), std::move(proj));
}

std::unique_ptr<NeuralModel> LstmModel::clone() const { return std::make_unique<LstmModel>(*this); }

}  // namespace modnn
