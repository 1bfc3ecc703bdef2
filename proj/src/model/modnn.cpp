#include <cmath>

#include "modnn/error.hpp"
#include "modnn/model/neural.hpp"

namespace modnn {

namespace {

using nn::Matrix;
using nn::Tape;
using nn::Var;

Matrix ext_history_features(const Matrix& step) {
  return WindowBatch::select(step, {kFeatTout, kFeatSolar, kFeatSin, kFeatCos, kFeatTzone});
}
Matrix ext_future_features(const Matrix& step) {
  return WindowBatch::select(step, {kFeatTout, kFeatSolar, kFeatSin, kFeatCos});
}
Matrix int_history_features(const Matrix& step) {
  return WindowBatch::select(step, {kFeatOcc, kFeatSin, kFeatCos, kFeatTzone});
}
Matrix int_future_features(const Matrix& step) {
  return WindowBatch::select(step, {kFeatOcc, kFeatSin, kFeatCos});
}

double softplus_value(double x) {
  Tape t;
  return t.scalar_value(t.softplus(t.scalar(x)));
}

/// The u -> y chain of a conditioned ModNN. Everything else is frozen into `flux`.
class ModnnRollout final : public Rollout {
 public:
  ModnnRollout(Matrix flux, double y0_norm, Matrix hvac_w, Matrix hvac_b, Matrix balance_w,
               Matrix balance_b, ChannelStats u_stats, ChannelStats y_stats)
      : flux_(std::move(flux)),
        y0_norm_(y0_norm),
        hvac_w_(std::move(hvac_w)),
        hvac_b_(std::move(hvac_b)),
        balance_w_(std::move(balance_w)),
        balance_b_(std::move(balance_b)),
        u_stats_(u_stats),
        y_stats_(y_stats) {}

  std::size_t horizon() const override { return static_cast<std::size_t>(flux_.rows()); }

  Var predict(Tape& tape, Var u) const override {
    const Matrix& uv = tape.value(u);
    if (uv.rows() != flux_.rows() || uv.cols() != 1) {
      throw ShapeError("modnn rollout: u must be " + std::to_string(flux_.rows()) + "x1");
    }
    Var u_norm = tape.shift(tape.scale(u, 1.0 / u_stats_.std), -u_stats_.mean / u_stats_.std);
    Var q_hvac = tape.affine(u_norm, tape.constant(hvac_w_), tape.constant(hvac_b_));
    Var q = tape.add(tape.constant(flux_), q_hvac);
    Var dy = tape.affine(q, tape.constant(balance_w_), tape.constant(balance_b_));
    Var path = tape.cumsum_rows(tape.concat_rows(tape.scalar(y0_norm_), dy));
    Var y_norm = tape.rows(path, 1, flux_.rows());
    return tape.shift(tape.scale(y_norm, y_stats_.std), y_stats_.mean);
  }

 private:
  Matrix flux_;  // M x latent
  double y0_norm_;
  Matrix hvac_w_, hvac_b_, balance_w_, balance_b_;
  ChannelStats u_stats_;
  ChannelStats y_stats_;
};

}  // namespace

ModnnModel::ModnnModel(ModelShape shape, NormStats stats, std::uint64_t seed)
    : NeuralModel(shape, stats) {
  Rng rng(seed);
  const nn::Index H = shape.hidden;
  const nn::Index Q = shape.latent;
  if (H < 1 || Q < 1) {
    throw ConfigError("modnn: hidden and latent sizes must be positive");
  }
  auto& p = params_;
  layers_.ext_encoder = nn::GruCell::create(p, "ext.encoder", 5, H, rng);
  layers_.ext_current = nn::GruCell::create(p, "ext.current", 5, H, rng);
  layers_.ext_decoder = nn::GruCell::create(p, "ext.decoder", 4, H, rng);
  layers_.ext_flux = nn::LinearLayer::create(p, "ext.flux", H, Q, rng);
  layers_.int_encoder = nn::GruCell::create(p, "int.encoder", 4, H, rng);
  layers_.int_current = nn::GruCell::create(p, "int.current", 4, H, rng);
  layers_.int_decoder = nn::GruCell::create(p, "int.decoder", 3, H, rng);
  layers_.int_flux = nn::LinearLayer::create(p, "int.flux", H, Q, rng);
  layers_.hvac = nn::PositiveLinearLayer::create(p, "hvac", 1, Q);
  layers_.balance = nn::PositiveLinearLayer::create(p, "balance", Q, 1);
}

std::vector<Var> ModnnModel::disturbance_flux(Tape& tape, nn::Bound vars,
                                              const WindowBatch& batch) const {
  const auto B = static_cast<nn::Index>(batch.size());
  const nn::Index H = shape_.hidden;
  const Layers& l = layers_;

  Var h_ext = tape.constant(Matrix::Zero(B, H));
  Var h_int = tape.constant(Matrix::Zero(B, H));
  for (const Matrix& step : batch.history) {
    h_ext = l.ext_encoder.step(tape, vars, tape.constant(ext_history_features(step)), h_ext);
    h_int = l.int_encoder.step(tape, vars, tape.constant(int_history_features(step)), h_int);
  }
  h_ext = l.ext_current.step(tape, vars, tape.constant(ext_history_features(batch.current)), h_ext);
  h_int = l.int_current.step(tape, vars, tape.constant(int_history_features(batch.current)), h_int);

  std::vector<Var> flux;
  flux.reserve(batch.future.size());
  for (const Matrix& step : batch.future) {
    h_ext = l.ext_decoder.step(tape, vars, tape.constant(ext_future_features(step)), h_ext);
    h_int = l.int_decoder.step(tape, vars, tape.constant(int_future_features(step)), h_int);
    flux.push_back(tape.add(l.ext_flux.apply(tape, vars, h_ext), l.int_flux.apply(tape, vars, h_int)));
  }
  return flux;
}

std::vector<Var> ModnnModel::predict_batch(Tape& tape, nn::Bound vars,
                                           const WindowBatch& batch) const {
  if (batch.history.size() != shape_.history || batch.future.size() != shape_.horizon) {
    throw ShapeError("modnn: batch does not match the configured history/horizon");
  }
  const auto flux = disturbance_flux(tape, vars, batch);
  const Layers& l = layers_;
  const ChannelStats& ys = stats_.t_zone;

  Var hvac_w = l.hvac.weight(tape, vars);
  Var balance_w = l.balance.weight(tape, vars);
  Var y_norm = tape.constant(((batch.y0.array() - ys.mean) / ys.std).matrix());
  std::vector<Var> out;
  out.reserve(flux.size());
  for (std::size_t k = 0; k < flux.size(); ++k) {
    Var u_k = tape.constant(batch.future_u.col(static_cast<nn::Index>(k)));
    Var q_hvac = tape.affine(u_k, hvac_w, vars[l.hvac.b]);
    Var dy = tape.affine(tape.add(flux[k], q_hvac), balance_w, vars[l.balance.b]);
    y_norm = tape.add(y_norm, dy);
    out.push_back(tape.shift(tape.scale(y_norm, ys.std), ys.mean));
  }
  return out;
}

std::unique_ptr<Rollout> ModnnModel::condition(const PredictionWindow& window) const {
  window.check(shape_.history, shape_.horizon);
  const WindowBatch batch = make_batch({&window}, stats_);
  Tape tape;
  const auto vars = params_.bind(tape, false);
  const auto flux = disturbance_flux(tape, vars, batch);
  Matrix flux_rows(static_cast<nn::Index>(flux.size()), shape_.latent);
  for (std::size_t k = 0; k < flux.size(); ++k) {
    flux_rows.row(static_cast<nn::Index>(k)) = tape.value(flux[k]).row(0);
  }
  const Layers& l = layers_;
  Matrix hvac_w = params_[l.hvac.raw].value.unaryExpr(&softplus_value);
  Matrix balance_w = params_[l.balance.raw].value.unaryExpr(&softplus_value);
  return std::make_unique<ModnnRollout>(std::move(flux_rows), stats_.t_zone.normalize(window.current.t_zone),
                                        std::move(hvac_w), params_[l.hvac.b].value, std::move(balance_w),
                                        params_[l.balance.b].value, stats_.u_hvac, stats_.t_zone);
}

std::unique_ptr<NeuralModel> ModnnModel::clone() const { return std::make_unique<ModnnModel>(*this); }

}  // namespace modnn
