#include "modnn/control/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "modnn/error.hpp"
#include "modnn/nn/adam.hpp"
#include "modnn/nn/layers.hpp"
#include "modnn/random.hpp"

namespace modnn {

namespace {

constexpr std::uint64_t kPolicyInitStream = 7;
constexpr std::uint64_t kPolicyShuffleStream = 8;
constexpr int kForecastDays = 2;  // disturbances simulated past the last controlled step

bool nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

double hinge_low(double v, double lo) { return std::isfinite(lo) ? std::min(0.0, v - lo) : 0.0; }
double hinge_high(double v, double hi) { return std::isfinite(hi) ? std::max(0.0, v - hi) : 0.0; }

nn::Matrix constant_column(std::size_t n, double v) {
  return nn::Matrix::Constant(static_cast<nn::Index>(n), 1, v);
}

}  // namespace

void MpcLossConfig::validate(std::size_t M) const {
  if (!nonneg(w_obj) || !nonneg(w_comfort) || !nonneg(w_input)) {
    throw ContractError("mpc loss weights must be finite and non-negative");
  }
  if (!(cop > 0.0) || !(power_scale > 0.0)) {
    throw ContractError("mpc loss needs cop > 0 and power_scale > 0");
  }
  if (std::isnan(u_low) || std::isnan(u_high) || u_low > u_high) {
    throw ContractError("mpc loss needs u_low <= u_high");
  }
  if (price.size() != M || band_low.size() != M || band_high.size() != M) {
    throw ContractError("mpc loss: price and band series must have " + std::to_string(M) +
                        " entries (got " + std::to_string(price.size()) + ", " +
                        std::to_string(band_low.size()) + ", " + std::to_string(band_high.size()) + ")");
  }
  for (std::size_t t = 0; t < M; ++t) {
    if (!std::isfinite(price[t])) throw ContractError("mpc loss: non-finite price at step " + std::to_string(t));
    if (!(band_low[t] <= band_high[t])) {
      throw ContractError("mpc loss: band lower limit above upper at step " + std::to_string(t));
    }
  }
}

LossBreakdown mpc_loss(std::span<const double> u, std::span<const double> y, const MpcLossConfig& cfg) {
  if (u.size() != y.size()) {
    throw ContractError("mpc_loss: u has " + std::to_string(u.size()) + " steps but y has " +
                        std::to_string(y.size()));
  }
  cfg.validate(u.size());
  LossBreakdown b;
  if (u.empty()) return b;
  const double s = cfg.power_scale;
  for (std::size_t t = 0; t < u.size(); ++t) {
    const double e = cfg.price[t] * u[t] / (cfg.cop * s);
    b.objective += e * e;
    const double lo = hinge_low(u[t] / s, cfg.u_low / s);
    const double hi = hinge_high(u[t] / s, cfg.u_high / s);
    b.input_penalty += lo * lo + hi * hi;
    const double cl = hinge_low(y[t], cfg.band_low[t]);
    const double ch = hinge_high(y[t], cfg.band_high[t]);
    b.comfort_penalty += cl * cl + ch * ch;
  }
  const double m = static_cast<double>(u.size());
  b.objective *= cfg.w_obj / m;
  b.input_penalty *= cfg.w_input / m;
  b.comfort_penalty *= cfg.w_comfort / m;
  return b;
}

LossNodes mpc_loss(nn::Tape& tape, nn::Var u, nn::Var y, const MpcLossConfig& cfg, double norm) {
  const auto& uv = tape.value(u);
  const auto& yv = tape.value(y);
  if (uv.cols() != 1 || yv.cols() != 1 || uv.rows() != yv.rows()) {
    throw ContractError("mpc_loss: u and y must be M x 1 columns of equal length");
  }
  const auto M = static_cast<std::size_t>(uv.rows());
  cfg.validate(M);
  const double s = cfg.power_scale;
  nn::Var z = tape.scale(u, 1.0 / s);

  nn::Matrix energy_w(M, 1);
  for (std::size_t t = 0; t < M; ++t) energy_w(static_cast<nn::Index>(t)) = cfg.price[t] / cfg.cop;
  nn::Var obj = tape.sum(tape.square(tape.mul(z, tape.constant(energy_w))));

  nn::Var input = tape.scalar(0.0);
  if (std::isfinite(cfg.u_low)) {
    nn::Var lo = tape.relu(tape.sub(tape.constant(constant_column(M, cfg.u_low / s)), z));
    input = tape.add(input, tape.sum(tape.square(lo)));
  }
  if (std::isfinite(cfg.u_high)) {
    nn::Var hi = tape.relu(tape.sub(z, tape.constant(constant_column(M, cfg.u_high / s))));
    input = tape.add(input, tape.sum(tape.square(hi)));
  }

  nn::Var comfort = tape.add(
      tape.sum(tape.square(tape.relu(tape.sub(tape.constant(column(cfg.band_low)), y)))),
      tape.sum(tape.square(tape.relu(tape.sub(y, tape.constant(column(cfg.band_high)))))));

  LossNodes n;
  n.objective = tape.scale(obj, cfg.w_obj * norm);
  n.input = tape.scale(input, cfg.w_input * norm);
  n.comfort = tape.scale(comfort, cfg.w_comfort * norm);
  n.total = tape.add(tape.add(n.objective, n.input), n.comfort);
  return n;
}

ControlPlan optimize_controls(const Rollout& rollout, const MpcLossConfig& cfg, const OptimizeOptions& o) {
  const std::size_t M = rollout.horizon();
  cfg.validate(M);
  if (o.iters < 0 || !(o.lr > 0.0) || !nonneg(o.lr_decay) || !nonneg(o.grad_tol)) {
    throw ConfigError("optimizer needs iters >= 0, lr > 0, lr_decay >= 0 and grad_tol >= 0");
  }
  if (!o.init.empty() && o.init.size() != M) {
    throw ContractError("optimizer init has " + std::to_string(o.init.size()) + " steps, expected " +
                        std::to_string(M));
  }
  auto project = [&](double v) { return std::clamp(v, cfg.u_low, cfg.u_high); };
  std::vector<double> u(M, 0.0);
  for (std::size_t t = 0; t < M; ++t) u[t] = project(o.init.empty() ? 0.0 : o.init[t]);

  const nn::AdamOptions adam;
  const double s = cfg.power_scale;
  const double norm = M == 0 ? 0.0 : 1.0 / static_cast<double>(M);
  std::vector<double> m1(M, 0.0), m2(M, 0.0), grad(M, 0.0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_u = u, best_y;
  ControlPlan plan;

  int k = 0;
  for (;; ++k) {
    nn::Tape tape;
    nn::Var uv = tape.leaf(column(u));
    nn::Var y = rollout.predict(tape, uv);
    const LossNodes loss = mpc_loss(tape, uv, y, cfg, norm);
    const double value = tape.scalar_value(loss.total);
    if (!std::isfinite(value)) {
      throw OptimizerError("iterate " + std::to_string(k) + ": non-finite mpc loss");
    }
    if (k == 0) plan.initial_loss = value;
    if (value < best) {
      best = value;
      best_u = u;
      const auto& yv = tape.value(y);
      best_y.assign(yv.data(), yv.data() + yv.size());
    }
    if (k >= o.iters) break;
    tape.backward(loss.total);
    const nn::Matrix g = tape.gradient(uv);
    double pg = 0.0;
    for (std::size_t t = 0; t < M; ++t) {
      // Gradient with respect to u in units of power_scale.
      grad[t] = g(static_cast<nn::Index>(t)) * s;
      const bool blocked = (u[t] <= cfg.u_low && grad[t] > 0.0) || (u[t] >= cfg.u_high && grad[t] < 0.0);
      if (!blocked) pg = std::max(pg, std::abs(grad[t]));
    }
    if (pg <= o.grad_tol) {
      plan.converged = true;
      break;
    }
    const double lr = o.lr / (1.0 + o.lr_decay * k);
    const double c1 = 1.0 - std::pow(adam.beta1, k + 1);
    const double c2 = 1.0 - std::pow(adam.beta2, k + 1);
    for (std::size_t t = 0; t < M; ++t) {
      m1[t] = adam.beta1 * m1[t] + (1.0 - adam.beta1) * grad[t];
      m2[t] = adam.beta2 * m2[t] + (1.0 - adam.beta2) * grad[t] * grad[t];
      const double step = lr * (m1[t] / c1) / (std::sqrt(m2[t] / c2) + adam.eps);
      u[t] = project(u[t] - step * s);
    }
  }
  plan.iterations = k;
  plan.u = std::move(best_u);
  plan.y = std::move(best_y);
  plan.loss = mpc_loss(plan.u, plan.y, cfg);
  return plan;
}

ControlPlan optimize_controls(const DynamicsModel& model, const PredictionWindow& window,
                              const MpcLossConfig& cfg, const OptimizeOptions& options) {
  return optimize_controls(*model.condition(window), cfg, options);
}

void ControlSettings::validate() const {
  if (!nonneg(w_obj) || !nonneg(w_comfort) || !nonneg(w_input)) {
    throw ConfigError("mpc weights must be finite and non-negative");
  }
  if (!(power_scale > 0.0) || !nonneg(price_offpeak) || !nonneg(price_peak)) {
    throw ConfigError("mpc power_scale must be positive and prices non-negative");
  }
  if (!std::isfinite(comfort_low) || !nonneg(margin)) {
    throw ConfigError("comfort_low must be finite and margin non-negative");
  }
  if (opt.iters < 0 || !(opt.lr > 0.0) || !nonneg(opt.lr_decay) || !nonneg(opt.grad_tol)) {
    throw ConfigError("mpc optimizer needs iters >= 0, lr > 0, lr_decay >= 0 and grad_tol >= 0");
  }
}

double band_top(const testbed::SchedulePolicy& schedule, bool occupied) {
  return schedule.setpoint(occupied) + 0.5 * schedule.deadband;
}

ControlContext::ControlContext(testbed::TestbedConfig config, testbed::Disturbances disturbances,
                               ControlSettings settings)
    : config_(std::move(config)), disturbances_(std::move(disturbances)), settings_(std::move(settings)) {
  settings_.validate();
}

double ControlContext::hour(std::size_t step) const {
  const std::int64_t ts = config_.start + static_cast<std::int64_t>(step) * 900;
  return static_cast<double>(((ts % 86400) + 86400) % 86400) / 3600.0;
}

double ControlContext::price(std::size_t step) const {
  const double h = hour(step);
  const auto& s = config_.schedule;
  return h >= s.peak_start && h < s.peak_end ? settings_.price_peak : settings_.price_offpeak;
}

MpcLossConfig ControlContext::loss_config(std::size_t i, std::size_t M, double t_zone) const {
  if (i + M + 1 > disturbances_.size()) {
    throw ContractError("control step " + std::to_string(i) + ": the forecast covers only " +
                        std::to_string(disturbances_.size()) + " steps");
  }
  MpcLossConfig c;
  c.w_obj = settings_.w_obj;
  c.w_comfort = settings_.w_comfort;
  c.w_input = settings_.w_input;
  c.cop = config_.hvac.cop;
  c.power_scale = settings_.power_scale;
  c.u_low = -config_.hvac.max_cooling(t_zone);
  c.u_high = 0.0;
  for (std::size_t k = 0; k < M; ++k) {
    c.price.push_back(price(i + k));
    const bool occ = disturbances_.occ[i + k + 1] > 0.0;
    c.band_high.push_back(band_top(config_.schedule, occ) - settings_.margin);
    c.band_low.push_back(settings_.comfort_low);
  }
  return c;
}

PredictionWindow ControlContext::window(const testbed::TimeSeriesFrame& log, std::size_t i, double t_zone,
                                        std::size_t L, std::span<const double> plan) const {
  if (i < L || log.size() < i) {
    throw ContractError("control step " + std::to_string(i) + ": need " + std::to_string(L) +
                        " logged rows of history (have " + std::to_string(log.size()) + ")");
  }
  const std::size_t M = plan.size();
  if (i + M > disturbances_.size()) {
    throw ContractError("control step " + std::to_string(i) + ": forecast too short");
  }
  const auto& d = disturbances_;
  PredictionWindow w;
  w.history.reserve(L);
  for (std::size_t j = i - L; j < i; ++j) {
    w.history.push_back({log.t_out[j], log.solar[j], log.occ[j], log.u_hvac[j], log.t_zone[j], hour(j)});
  }
  w.current = {d.t_out[i], d.solar[i], d.occ[i], t_zone, hour(i)};
  for (std::size_t k = 0; k < M; ++k) {
    w.future_dist.push_back({d.t_out[i + k], d.solar[i + k], d.occ[i + k], hour(i + k)});
  }
  w.future_u.assign(plan.begin(), plan.end());
  w.timestamp = config_.start + static_cast<std::int64_t>(i) * 900;
  w.anchor = i;
  return w;
}

ControlLawNet::ControlLawNet(std::size_t horizon, int hidden, std::uint64_t seed) : horizon_(horizon) {
  if (horizon == 0 || hidden < 1) {
    throw ConfigError("control law needs a positive horizon and hidden width");
  }
  Rng rng(seed);
  const auto F = static_cast<nn::Index>(feature_count());
  const auto M = static_cast<nn::Index>(horizon);
  w1_ = params_.add("policy.w1", nn::glorot_uniform(F, hidden, rng));
  b1_ = params_.add("policy.b1", nn::Matrix::Zero(1, hidden));
  w2_ = params_.add("policy.w2", 0.1 * nn::glorot_uniform(hidden, M, rng));
  // Starts close to u_high, the idle actuator.
  b2_ = params_.add("policy.b2", nn::Matrix::Constant(1, M, 4.0));
  mean_ = nn::Matrix::Zero(1, F);
  scale_ = nn::Matrix::Ones(1, F);
}

nn::Matrix ControlLawNet::features(const PredictionWindow& w, const MpcLossConfig& cfg) const {
  const std::size_t M = horizon_;
  if (w.future_dist.size() != M || cfg.price.size() != M || cfg.band_low.size() != M ||
      cfg.band_high.size() != M) {
    throw ShapeError("control law inputs must cover " + std::to_string(M) + " steps");
  }
  nn::Matrix x(1, static_cast<nn::Index>(feature_count()));
  x(0, 0) = w.current.t_zone;
  for (std::size_t k = 0; k < M; ++k) {
    const auto c = static_cast<nn::Index>(1 + k);
    const auto m = static_cast<nn::Index>(M);
    x(0, c) = w.future_dist[k].t_out;
    x(0, c + m) = w.future_dist[k].solar;
    x(0, c + 2 * m) = w.future_dist[k].occ;
    x(0, c + 3 * m) = cfg.band_low[k];
    x(0, c + 4 * m) = cfg.band_high[k];
    x(0, c + 5 * m) = cfg.price[k];
  }
  return x;
}

void ControlLawNet::fit_scaling(const nn::Matrix& raw) {
  if (raw.cols() != mean_.cols() || raw.rows() == 0) {
    throw ShapeError("control law scaling needs a non-empty matrix with " +
                     std::to_string(feature_count()) + " columns");
  }
  mean_ = raw.colwise().mean();
  const nn::Matrix centred = raw.rowwise() - mean_.row(0);
  scale_ = (centred.array().square().colwise().mean()).sqrt().matrix();
  for (nn::Index j = 0; j < scale_.cols(); ++j) {
    if (!(scale_(0, j) > 1e-9)) scale_(0, j) = 1.0;
  }
}

nn::Var ControlLawNet::forward(nn::Tape& tape, nn::Bound vars, const nn::Matrix& raw, const nn::Matrix& low,
                               const nn::Matrix& high) const {
  const nn::Index B = raw.rows();
  const auto M = static_cast<nn::Index>(horizon_);
  if (raw.cols() != mean_.cols() || low.rows() != B || high.rows() != B || low.cols() != 1 ||
      high.cols() != 1) {
    throw ShapeError("control law forward: inconsistent feature and bound shapes");
  }
  if (!low.allFinite() || !high.allFinite() || (high - low).minCoeff() < 0.0) {
    throw ContractError("control law needs finite bounds with low <= high");
  }
  const nn::Matrix x = ((raw.rowwise() - mean_.row(0)).array().rowwise() / scale_.row(0).array()).matrix();
  nn::Var h = tape.tanh(tape.affine(tape.constant(x), vars[w1_], vars[b1_]));
  nn::Var squashed = tape.sigmoid(tape.affine(h, vars[w2_], vars[b2_]));
  const nn::Matrix range = (high - low).replicate(1, M);
  return tape.add(tape.mul(squashed, tape.constant(range)), tape.constant(low.replicate(1, M)));
}

std::vector<double> ControlLawNet::act(const PredictionWindow& window, const MpcLossConfig& cfg) const {
  nn::Tape tape;
  const auto vars = params_.bind(tape, false);
  const nn::Var u = forward(tape, vars, features(window, cfg), nn::Matrix::Constant(1, 1, cfg.u_low),
                            nn::Matrix::Constant(1, 1, cfg.u_high));
  const auto& v = tape.value(u);
  return {v.data(), v.data() + v.size()};
}

namespace {

std::vector<std::unique_ptr<Rollout>> condition_all(const DynamicsModel& model,
                                                    std::span<const Scenario> scenarios) {
  std::vector<std::unique_ptr<Rollout>> out;
  out.reserve(scenarios.size());
  for (const auto& s : scenarios) out.push_back(model.condition(s.window));
  return out;
}

}  // namespace

PolicyTrainResult train_control_law(const DynamicsModel& model, std::span<const Scenario> scenarios,
                                    const PolicyTrainOptions& o) {
  if (scenarios.empty()) {
    throw ContractError("train_control_law: no scenarios");
  }
  if (o.epochs < 0 || o.batch == 0 || !(o.lr > 0.0)) {
    throw ConfigError("control law training needs epochs >= 0, batch > 0 and lr > 0");
  }
  const std::size_t M = model.horizon();
  PolicyTrainResult r;
  r.net = std::make_unique<ControlLawNet>(M, o.hidden, derive_seed(o.seed, kPolicyInitStream));
  ControlLawNet& net = *r.net;

  const std::size_t N = scenarios.size();
  nn::Matrix raw(static_cast<nn::Index>(N), static_cast<nn::Index>(net.feature_count()));
  nn::Matrix low(static_cast<nn::Index>(N), 1), high(static_cast<nn::Index>(N), 1);
  for (std::size_t i = 0; i < N; ++i) {
    const auto row = static_cast<nn::Index>(i);
    raw.row(row) = net.features(scenarios[i].window, scenarios[i].cfg);
    low(row) = scenarios[i].cfg.u_low;
    high(row) = scenarios[i].cfg.u_high;
  }
  net.fit_scaling(raw);
  const auto rollouts = condition_all(model, scenarios);

  Rng rng(derive_seed(o.seed, kPolicyShuffleStream));
  nn::Adam adam(net.params(), {.lr = o.lr});
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < o.epochs; ++epoch) {
    for (std::size_t i = N; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double total = 0.0;
    for (std::size_t start = 0; start < N; start += o.batch) {
      const std::size_t n = std::min(o.batch, N - start);
      nn::Matrix braw(static_cast<nn::Index>(n), raw.cols()), blow(static_cast<nn::Index>(n), 1),
          bhigh(static_cast<nn::Index>(n), 1);
      for (std::size_t b = 0; b < n; ++b) {
        const auto src = static_cast<nn::Index>(order[start + b]);
        const auto dst = static_cast<nn::Index>(b);
        braw.row(dst) = raw.row(src);
        blow(dst) = low(src);
        bhigh(dst) = high(src);
      }
      nn::Tape tape;
      const auto vars = net.params().bind(tape, true);
      nn::Var U = net.forward(tape, vars, braw, blow, bhigh);
      const double norm = 1.0 / static_cast<double>(n * M);
      nn::Var loss = tape.scalar(0.0);
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t idx = order[start + b];
        nn::Var u = tape.transpose(tape.rows(U, static_cast<nn::Index>(b), 1));
        nn::Var y = rollouts[idx]->predict(tape, u);
        loss = tape.add(loss, mpc_loss(tape, u, y, scenarios[idx].cfg, norm).total);
      }
      const double value = tape.scalar_value(loss);
      if (!std::isfinite(value)) {
        throw TrainingError("control law epoch " + std::to_string(epoch) + ": non-finite loss");
      }
      tape.backward(loss);
      std::vector<nn::Matrix> grads;
      grads.reserve(vars.size());
      for (const nn::Var& v : vars) grads.push_back(tape.gradient(v));
      try {
        adam.step(net.mutable_params(), grads);
      } catch (const TrainingError& e) {
        throw TrainingError("control law epoch " + std::to_string(epoch) + ": " + e.what());
      }
      total += value * static_cast<double>(n);
    }
    r.epoch_loss.push_back(total / static_cast<double>(N));
  }
  return r;
}

double policy_loss(const ControlLawNet& net, const DynamicsModel& model, std::span<const Scenario> scenarios) {
  if (scenarios.empty()) throw ContractError("policy_loss: no scenarios");
  double total = 0.0;
  for (const auto& s : scenarios) {
    const auto u = net.act(s.window, s.cfg);
    total += mpc_loss(u, model.condition(s.window)->predict(u), s.cfg).total();
  }
  return total / static_cast<double>(scenarios.size());
}

double constant_plan_loss(double u0, const DynamicsModel& model, std::span<const Scenario> scenarios) {
  if (scenarios.empty()) throw ContractError("constant_plan_loss: no scenarios");
  double total = 0.0;
  for (const auto& s : scenarios) {
    const std::vector<double> u(model.horizon(), u0);
    total += mpc_loss(u, model.condition(s.window)->predict(u), s.cfg).total();
  }
  return total / static_cast<double>(scenarios.size());
}

std::vector<Scenario> make_scenarios(const testbed::TimeSeriesFrame& frame, const testbed::TestbedConfig& config,
                                     const ControlSettings& settings, std::size_t L, std::size_t M,
                                     std::size_t stride) {
  if (stride == 0) throw ContractError("make_scenarios: stride must be positive");
  testbed::TestbedConfig c = config;
  c.start = frame.start;
  const ControlContext ctx(c, {frame.t_out, frame.solar, frame.occ}, settings);
  std::vector<Scenario> out;
  for (std::size_t i = L; i + M + 1 <= frame.size(); i += stride) {
    out.push_back({window_at(frame, i, L, M), ctx.loss_config(i, M, frame.t_zone[i])});
  }
  return out;
}

double OnOffController::flow(const testbed::Testbed& bed, const ControlContext&) { return policy_.flow(bed); }

MpcController::MpcController(std::string name, std::shared_ptr<const DynamicsModel> model)
    : name_(std::move(name)), model_(std::move(model)) {
  if (!model_) throw ContractError("mpc controller needs a model");
}

double MpcController::flow(const testbed::Testbed& bed, const ControlContext& ctx) {
  const std::size_t i = bed.step_index();
  const std::size_t M = model_->horizon();
  const double t = bed.zone_temp();
  const MpcLossConfig cfg = ctx.loss_config(i, M, t);
  std::vector<double> init(M, 0.0);
  if (warm_.size() == M && M > 0) {
    std::copy(warm_.begin() + 1, warm_.end(), init.begin());
    init[M - 1] = warm_[M - 1];
  }
  for (double& v : init) v = std::clamp(v, cfg.u_low, cfg.u_high);
  const PredictionWindow w = ctx.window(bed.frame(), i, t, model_->history_length(), init);
  OptimizeOptions opt = ctx.settings().opt;
  opt.init = init;
  last_ = optimize_controls(*model_, w, cfg, opt);
  warm_ = last_.u;
  return flow_for_power(last_.u.empty() ? 0.0 : last_.u[0], t, ctx.config().hvac);
}

PolicyController::PolicyController(std::string name, std::shared_ptr<const ControlLawNet> net,
                                   std::size_t history)
    : name_(std::move(name)), net_(std::move(net)), history_(history) {
  if (!net_) throw ContractError("policy controller needs a network");
}

double PolicyController::flow(const testbed::Testbed& bed, const ControlContext& ctx) {
  const std::size_t i = bed.step_index();
  const double t = bed.zone_temp();
  const MpcLossConfig cfg = ctx.loss_config(i, net_->horizon(), t);
  const std::vector<double> zeros(net_->horizon(), 0.0);
  const auto u = net_->act(ctx.window(bed.frame(), i, t, history_, zeros), cfg);
  return flow_for_power(u[0], t, ctx.config().hvac);
}

double flow_for_power(double u, double t_zone, const testbed::HvacParams& hvac) {
  const double dt = t_zone - hvac.t_supply;
  if (!(u < 0.0) || !(dt > 0.0)) return 0.0;
  return std::clamp(-u / (hvac.rho_air * hvac.cp_air * dt), 0.0, hvac.flow_max);
}

testbed::TimeSeriesFrame closed_loop(Controller& controller, const testbed::TestbedConfig& config,
                                     const ClosedLoopOptions& o) {
  config.validate();
  if (o.warmup_days < 0 || o.control_days < 1) {
    throw ConfigError("closed loop needs warmup_days >= 0 and control_days >= 1");
  }
  const int days = o.warmup_days + o.control_days;
  auto dist = testbed::make_disturbances(config, days + kForecastDays);
  const ControlContext ctx(config, dist, o.settings);
  testbed::Testbed bed(config, std::move(dist));
  OnOffController warmup;
  const auto warm_steps = static_cast<std::size_t>(o.warmup_days) * testbed::kStepsPerDay;
  const auto steps = static_cast<std::size_t>(days) * testbed::kStepsPerDay;
  while (bed.step_index() < steps) {
    Controller& c = bed.step_index() < warm_steps ? static_cast<Controller&>(warmup) : controller;
    bed.apply_flow(c.flow(bed, ctx));
  }
  return bed.frame().slice(warm_steps, steps);
}

BandSchedule comfort_band(const testbed::TimeSeriesFrame& frame, const testbed::SchedulePolicy& schedule,
                          double comfort_low) {
  BandSchedule b;
  for (double occ : frame.occ) {
    const bool on = occ > 0.0;
    b.occupied.push_back(on);
    b.low.push_back(comfort_low);
    b.high.push_back(band_top(schedule, on));
  }
  return b;
}

double temp_violation(const testbed::TimeSeriesFrame& frame, const BandSchedule& band) {
  const std::size_t n = frame.size();
  if (band.low.size() != n || band.high.size() != n || band.occupied.size() != n) {
    throw ContractError("temp_violation: band has " + std::to_string(band.high.size()) +
                        " steps but the frame has " + std::to_string(n));
  }
  double v = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!band.occupied[i]) continue;
    v += std::max(0.0, frame.t_zone[i] - band.high[i]) * testbed::kStepHours;
    v += std::max(0.0, band.low[i] - frame.t_zone[i]) * testbed::kStepHours;
  }
  return v;
}

PeakReduction peak_load_reduction(const testbed::TimeSeriesFrame& frame, const testbed::TimeSeriesFrame& base,
                                   double peak_start, double peak_end) {
  if (frame.size() != base.size() || frame.start != base.start || frame.step != base.step) {
    throw ContractError("peak_load_reduction: frames are not aligned");
  }
  PeakReduction r;
  const std::size_t day = testbed::kStepsPerDay;
  double sum = 0.0;
  int defined = 0;
  for (std::size_t d = 0; d * day < frame.size(); ++d) {
    double peak = 0.0, base_peak = 0.0;
    for (std::size_t i = d * day; i < std::min(frame.size(), (d + 1) * day); ++i) {
      const double h = frame.hour_of_day(i);
      if (h < peak_start || h >= peak_end) continue;
      peak = std::max(peak, frame.p_elec[i]);
      base_peak = std::max(base_peak, base.p_elec[i]);
    }
    r.peak_w.push_back(peak);
    r.baseline_peak_w.push_back(base_peak);
    if (base_peak > 0.0) {
      const double pct = 100.0 * (1.0 - peak / base_peak);
      r.per_day.emplace_back(pct);
      sum += pct;
      ++defined;
    } else {
      r.per_day.emplace_back(std::nullopt);
    }
  }
  if (defined == 0) {
    throw MetricError("peak_load_reduction: the baseline never draws power in the peak window");
  }
  r.percent = sum / defined;
  return r;
}

ControlMetrics control_metrics(const std::string& name, const testbed::TimeSeriesFrame& frame,
                               const testbed::TimeSeriesFrame& baseline, const testbed::TestbedConfig& config,
                               const ControlSettings& settings) {
  ControlMetrics m;
  m.name = name;
  const BandSchedule band = comfort_band(frame, config.schedule, settings.comfort_low);
  m.violation_ch = temp_violation(frame, band);
  const std::size_t day = testbed::kStepsPerDay;
  for (std::size_t d = 0; d * day < frame.size(); ++d) {
    const std::size_t end = std::min(frame.size(), (d + 1) * day);
    const auto part = frame.slice(d * day, end);
    BandSchedule b;
    b.low.assign(band.low.begin() + d * day, band.low.begin() + end);
    b.high.assign(band.high.begin() + d * day, band.high.begin() + end);
    b.occupied.assign(band.occupied.begin() + d * day, band.occupied.begin() + end);
    m.day_violation_ch.push_back(temp_violation(part, b));
    double e = 0.0;
    for (double p : part.p_elec) e += p * testbed::kStepHours / 1000.0;
    m.day_energy_kwh.push_back(e);
    m.energy_kwh += e;
  }
  m.peak = peak_load_reduction(frame, baseline, config.schedule.peak_start, config.schedule.peak_end);
  m.peak_reduction_pct = m.peak.percent;
  return m;
}

nlohmann::json ControlMetrics::to_json() const {
  nlohmann::json days = nlohmann::json::array();
  for (std::size_t d = 0; d < day_violation_ch.size(); ++d) {
    nlohmann::json j = {{"day", d},
                        {"violation_ch", day_violation_ch[d]},
                        {"energy_kwh", day_energy_kwh[d]},
                        {"peak_w", peak.peak_w[d]},
                        {"baseline_peak_w", peak.baseline_peak_w[d]}};
    j["peak_reduction_pct"] = peak.per_day[d] ? nlohmann::json(*peak.per_day[d]) : nlohmann::json();
    days.push_back(j);
  }
  return {{"name", name},
          {"violation_ch", violation_ch},
          {"peak_reduction_pct", peak_reduction_pct},
          {"energy_kwh", energy_kwh},
          {"days", days}};
}

}  // namespace modnn
