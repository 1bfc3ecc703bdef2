#include "modnn/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "modnn/error.hpp"
#include "modnn/eval/consistency.hpp"
#include "modnn/nn/adam.hpp"
#include "modnn/random.hpp"
#include "modnn/testbed/rc.hpp"

namespace modnn {

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kAll:
      return "all";
  }
  return "unknown";
}

std::size_t window_count(std::size_t len, std::size_t L, std::size_t M, std::size_t stride) {
  if (stride == 0 || len < L + 1 + M) return 0;
  return (len - L - 1 - M) / stride + 1;
}

WindowDataset build_windows(const testbed::TimeSeriesFrame& frame, std::size_t L, std::size_t M,
                            std::size_t stride, Split split, std::size_t row_offset) {
  if (stride == 0) {
    throw DatasetError("window stride must be positive");
  }
  if (frame.size() < L + 1 + M) {
    throw DatasetError("frame has " + std::to_string(frame.size()) + " rows; windows with L = " +
                       std::to_string(L) + " and M = " + std::to_string(M) + " need at least " +
                       std::to_string(L + 1 + M));
  }
  WindowDataset d;
  d.split = split;
  d.history = L;
  d.horizon = M;
  d.stride = stride;
  const std::size_t n = window_count(frame.size(), L, M, stride);
  d.windows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    PredictionWindow w = window_at(frame, L + i * stride, L, M);
    w.anchor += row_offset;
    d.windows.push_back(std::move(w));
  }
  return d;
}

DataSplit split_frame(const testbed::TimeSeriesFrame& frame, std::size_t L, std::size_t M,
                      const SplitOptions& o) {
  if (o.train_days < 1 || o.val_days < 1) {
    throw ConfigError("train_days and val_days must be positive");
  }
  const auto day = static_cast<std::size_t>(testbed::kStepsPerDay);
  const std::size_t train_rows = static_cast<std::size_t>(o.train_days) * day;
  const std::size_t val_rows = static_cast<std::size_t>(o.val_days) * day;
  if (train_rows + val_rows > frame.size()) {
    throw DatasetError("frame has " + std::to_string(frame.size() / day) + " days; the split needs " +
                       std::to_string(o.train_days + o.val_days));
  }
  DataSplit s;
  s.train_rows = train_rows;
  s.val_begin = frame.size() - val_rows;
  const auto train_frame = frame.slice(0, train_rows);
  const auto val_frame = frame.slice(s.val_begin, frame.size());
  s.stats = NormStats::from_frame(train_frame);
  s.train = build_windows(train_frame, L, M, o.train_stride, Split::kTrain, 0);
  s.val = build_windows(val_frame, L, M, o.val_stride, Split::kVal, s.val_begin);
  s.train.stats = s.stats;
  s.val.stats = s.stats;
  return s;
}

Accuracy mae_mape(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw ShapeError("mae_mape: need equal, non-empty sequences (got " + std::to_string(pred.size()) +
                     " and " + std::to_string(truth.size()) + ")");
  }
  double ae = 0.0, ape = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!(std::abs(truth[i]) >= 1.0)) {
      throw MetricError("mae_mape: |truth| < 1 at index " + std::to_string(i) +
                        "; percentage error is ill-defined near zero");
    }
    const double e = std::abs(pred[i] - truth[i]);
    ae += e;
    ape += e / std::abs(truth[i]);
  }
  const double n = static_cast<double>(pred.size());
  return {ae / n, 100.0 * ape / n};
}

Accuracy window_accuracy(const DynamicsModel& model, std::span<const PredictionWindow> windows) {
  std::vector<double> pred, truth;
  for (const auto& w : windows) {
    const auto y = model.forward(w);
    pred.insert(pred.end(), y.begin(), y.end());
    truth.insert(truth.end(), w.truth.begin(), w.truth.end());
  }
  return mae_mape(pred, truth);
}

namespace {

std::vector<const PredictionWindow*> pointers(const WindowDataset& d, std::span<const std::size_t> idx) {
  std::vector<const PredictionWindow*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(&d.windows[i]);
  return out;
}

/// Sum of squared decoder errors over the batch.
nn::Var squared_error(nn::Tape& tape, const std::vector<nn::Var>& out, const WindowBatch& batch) {
  nn::Var total = tape.scalar(0.0);
  for (std::size_t k = 0; k < out.size(); ++k) {
    nn::Var err = tape.sub(out[k], tape.constant(batch.truth.col(static_cast<nn::Index>(k))));
    total = tape.add(total, tape.sum(tape.square(err)));
  }
  return total;
}

double data_u_floor(const DataSplit& d) {
  double lo = 0.0;
  for (const auto* set : {&d.train, &d.val}) {
    for (const auto& w : set->windows) {
      for (double u : w.future_u) lo = std::min(lo, u);
      for (const auto& h : w.history) lo = std::min(lo, h.u_hvac);
    }
  }
  return lo;
}

std::vector<PredictionWindow> monitor_windows(const WindowDataset& val, std::size_t n) {
  std::vector<PredictionWindow> out;
  if (val.empty() || n == 0) return out;
  n = std::min(n, val.size());
  for (std::size_t i = 0; i < n; ++i) out.push_back(val.windows[i * val.size() / n]);
  return out;
}

}  // namespace

double evaluate_mse(const NeuralModel& model, const WindowDataset& data, std::size_t batch) {
  if (data.empty()) {
    throw DatasetError("evaluate_mse: empty dataset");
  }
  batch = std::max<std::size_t>(1, batch);
  double total = 0.0;
  std::size_t count = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch) {
    idx.resize(std::min(batch, data.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const WindowBatch b = make_batch(pointers(data, idx), model.stats());
    nn::Tape tape;
    const auto vars = model.params().bind(tape, false);
    total += tape.scalar_value(squared_error(tape, model.predict_batch(tape, vars, b), b));
    count += idx.size() * data.horizon;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

TrainResult train(Variant variant, const ModelShape& shape, const DataSplit& data,
                  const TrainOptions& options) {
  return train(make_model(variant, shape, data.stats, derive_seed(options.seed, 4)), data, options);
}

TrainResult train(std::unique_ptr<NeuralModel> model, const DataSplit& data, const TrainOptions& o) {
  if (!model) {
    throw ContractError("train: no model");
  }
  if (data.train.empty()) {
    throw DatasetError("train: the training split has no windows");
  }
  if (o.epochs < 0 || o.batch == 0 || !(o.lr > 0.0)) {
    throw ConfigError("train: epochs must be >= 0, batch > 0 and lr > 0");
  }
  if (data.train.history != model->history_length() || data.train.horizon != model->horizon()) {
    throw ShapeError("train: dataset windows do not match the model's history/horizon");
  }
  const auto t0 = std::chrono::steady_clock::now();

  TrainResult result;
  TrainReport& rep = result.report;
  rep.variant = model->variant();
  rep.options = o;
  rep.options.u_floor = std::isnan(o.u_floor) ? data_u_floor(data) : o.u_floor;
  rep.train_windows = data.train.size();
  rep.val_windows = data.val.size();

  const auto monitor = monitor_windows(data.val, o.trv_windows);
  Rng rng(derive_seed(o.seed, 5));
  nn::Adam adam(model->params(), {.lr = o.lr});
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < o.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    double sse = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += o.batch) {
      const std::size_t n = std::min(o.batch, order.size() - start);
      const WindowBatch b =
          make_batch(pointers(data.train, std::span(order).subspan(start, n)), model->stats());
      nn::Tape tape;
      const auto vars = model->params().bind(tape, true);
      nn::Var batch_sse = squared_error(tape, model->predict_batch(tape, vars, b), b);
      const double denom = static_cast<double>(n * data.train.horizon);
      nn::Var loss = tape.scale(batch_sse, 1.0 / denom);
      const double value = tape.scalar_value(batch_sse);
      if (!std::isfinite(value)) {
        throw TrainingError("epoch " + std::to_string(epoch) + ": non-finite training loss");
      }
      tape.backward(loss);
      std::vector<nn::Matrix> grads;
      grads.reserve(vars.size());
      for (const nn::Var& v : vars) grads.push_back(tape.gradient(v));
      try {
        adam.step(model->mutable_params(), grads);
      } catch (const TrainingError& e) {
        throw TrainingError("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      sse += value;
      seen += n * data.train.horizon;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mse = sse / static_cast<double>(seen);
    rec.val_mse = data.val.empty() ? 0.0 : evaluate_mse(*model, data.val);
    if (!std::isfinite(rec.val_mse)) {
      throw TrainingError("epoch " + std::to_string(epoch) + ": non-finite validation loss");
    }
    if (!monitor.empty()) {
      const TrvResult t = trv(*model, monitor, rep.options.u_floor, 0.0);
      rec.val_trv = t.plus + t.minus;
    }
    rep.epochs.push_back(rec);
  }

  if (!data.val.empty()) {
    const Accuracy acc = window_accuracy(*model, data.val.windows);
    rep.mae = acc.mae;
    rep.mape = acc.mape;
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.model = std::move(model);
  return result;
}

nlohmann::json TrainReport::to_json(bool include_wall_time) const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs) {
    epochs_json.push_back(
        {{"epoch", e.epoch}, {"train_mse", e.train_mse}, {"val_mse", e.val_mse}, {"val_trv", e.val_trv}});
  }
  nlohmann::json j = {{"variant", variant},
                      {"epochs", epochs_json},
                      {"final", {{"mae_c", mae}, {"mape_pct", mape}}},
                      {"train_windows", train_windows},
                      {"val_windows", val_windows},
                      {"hyper",
                       {{"epochs", options.epochs},
                        {"lr", options.lr},
                        {"batch", options.batch},
                        {"seed", options.seed},
                        {"trv_windows", options.trv_windows},
                        {"u_floor_w", options.u_floor}}},
                      {"config_hash", config_hash}};
  if (include_wall_time) j["wall_seconds"] = wall_seconds;
  return j;
}

std::string TrainReport::to_csv(const std::string& comment) const {
  std::ostringstream os;
  std::istringstream lines(comment);
  std::string line;
  while (std::getline(lines, line)) os << "# " << line << '\n';
  os << "epoch,train_mse,val_mse,val_trv\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << testbed::format_double(e.train_mse) << ','
       << testbed::format_double(e.val_mse) << ',' << testbed::format_double(e.val_trv) << '\n';
  }
  return os.str();
}

}  // namespace modnn
