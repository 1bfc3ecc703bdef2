#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "modnn/model/neural.hpp"
#include "modnn/testbed/frame.hpp"

namespace modnn {

enum class Split { kTrain, kVal, kAll };
std::string to_string(Split s);

/// Ordered windows cut from one contiguous frame.
struct WindowDataset {
  std::vector<PredictionWindow> windows;
  Split split = Split::kAll;
  NormStats stats;
  std::size_t history = 0;
  std::size_t horizon = 0;
  std::size_t stride = 1;

  std::size_t size() const { return windows.size(); }
  bool empty() const { return windows.empty(); }
};

/// floor((len - L - 1 - M) / stride) + 1, or 0 when the frame is too short.
std::size_t window_count(std::size_t len, std::size_t history, std::size_t horizon, std::size_t stride);

/// Sliding windows anchored at rows L, L + stride, ... of `frame`; anchors are
/// offset by `row_offset` so they index the frame the slice came from.
/// Throws DatasetError when len < L + 1 + M or stride is 0.
WindowDataset build_windows(const testbed::TimeSeriesFrame& frame, std::size_t history,
                            std::size_t horizon, std::size_t stride, Split split = Split::kAll,
                            std::size_t row_offset = 0);

struct SplitOptions {
  int train_days = 70;
  int val_days = 20;
  std::size_t train_stride = 4;
  std::size_t val_stride = 4;
};

/// Training windows from the first train_days, validation windows from the
/// final val_days; normalisation statistics from the training rows only.
struct DataSplit {
  NormStats stats;
  WindowDataset train;
  WindowDataset val;
  std::size_t train_rows = 0;  // rows [0, train_rows)
  std::size_t val_begin = 0;   // rows [val_begin, frame.size())
};

DataSplit split_frame(const testbed::TimeSeriesFrame& frame, std::size_t history,
                      std::size_t horizon, const SplitOptions& options);

struct TrainOptions {
  int epochs = 50;
  double lr = 1e-3;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
  std::size_t trv_windows = 16;  // fixed validation subsample for the per-epoch monitor
  /// Most negative HVAC power for the monitor; NaN means the smallest u in the data.
  double u_floor = std::numeric_limits<double>::quiet_NaN();
};

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double val_trv = 0.0;  // trv plus + minus on the monitor subsample, degC h
};

struct TrainReport {
  std::string variant;
  std::vector<EpochRecord> epochs;
  double mae = 0.0;   // on all validation windows, degC
  double mape = 0.0;  // percent
  double wall_seconds = 0.0;
  std::size_t train_windows = 0;
  std::size_t val_windows = 0;
  TrainOptions options;
  std::string config_hash;

  /// Wall time is written only when include_wall_time is set, so reports stay byte-reproducible.
  nlohmann::json to_json(bool include_wall_time = false) const;
  /// Columns epoch,train_mse,val_mse,val_trv.
  std::string to_csv(const std::string& comment = {}) const;
};

struct TrainResult {
  std::unique_ptr<NeuralModel> model;
  TrainReport report;
};

/// Mean squared error over all decoder steps, degC^2.
double evaluate_mse(const NeuralModel& model, const WindowDataset& data, std::size_t batch = 128);

/// Adam on the decoder MSE with shuffled minibatches; the decoder always rolls
/// its own predictions. Deterministic per seed. Report epoch e describes the
/// model after pass e + 1; zero epochs return the initial model.
/// Throws TrainingError with the epoch index on a non-finite loss.
TrainResult train(Variant variant, const ModelShape& shape, const DataSplit& data,
                  const TrainOptions& options);
/// Continues training an existing model.
TrainResult train(std::unique_ptr<NeuralModel> model, const DataSplit& data, const TrainOptions& options);

struct Accuracy {
  double mae = 0.0;
  double mape = 0.0;
};

/// MAE in degC and MAPE in percent. Throws ShapeError on unequal or empty
/// inputs and MetricError when any |truth| < 1.
Accuracy mae_mape(std::span<const double> pred, std::span<const double> truth);

/// Accuracy over every window's forward prediction.
Accuracy window_accuracy(const DynamicsModel& model, std::span<const PredictionWindow> windows);

}  // namespace modnn
