#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "modnn/nn/tape.hpp"
#include "modnn/testbed/frame.hpp"

namespace modnn {

/// One logged row, as seen in an encoder history.
struct StepRecord {
  double t_out = 0.0;
  double solar = 0.0;
  double occ = 0.0;
  double u_hvac = 0.0;
  double t_zone = 0.0;
  double hour = 0.0;
};

/// The measurement at the current step; its u_hvac is the first decision and is not included.
struct Measurement {
  double t_out = 0.0;
  double solar = 0.0;
  double occ = 0.0;
  double t_zone = 0.0;
  double hour = 0.0;
};

struct DisturbanceStep {
  double t_out = 0.0;
  double solar = 0.0;
  double occ = 0.0;
  double hour = 0.0;
};

/// A forecasting sample anchored at frame row i:
///   history      rows i-L .. i-1
///   current      row i (measurements only)
///   future_dist  rows i .. i+M-1, future_u their HVAC power
///   truth[k]     t_zone of row i+k+1, the response to future_u[k]
struct PredictionWindow {
  std::vector<StepRecord> history;
  Measurement current;
  std::vector<DisturbanceStep> future_dist;
  std::vector<double> future_u;
  std::vector<double> truth;  // empty at control time
  std::int64_t timestamp = 0; // of row i
  std::size_t anchor = 0;     // row i in the source frame

  std::size_t horizon() const { return future_u.size(); }
  /// Throws ShapeError unless history has L rows and the future parts have M.
  void check(std::size_t history_length, std::size_t horizon) const;
};

struct ChannelStats {
  double mean = 0.0;
  double std = 1.0;

  double normalize(double v) const { return (v - mean) / std; }
  double denormalize(double v) const { return v * std + mean; }
  bool operator==(const ChannelStats&) const = default;
};

/// Per-channel z-score statistics, computed on a training split.
struct NormStats {
  ChannelStats t_out;
  ChannelStats solar;
  ChannelStats occ;
  ChannelStats u_hvac;
  ChannelStats t_zone;

  /// Population statistics; a zero spread is replaced by 1 so scaling stays invertible.
  static NormStats from_frame(const testbed::TimeSeriesFrame& frame);
  nlohmann::json to_json() const;
  static NormStats from_json(const nlohmann::json& j);
  bool operator==(const NormStats&) const = default;
};

/// Column layout of normalised step features.
enum Feature : int {
  kFeatTout = 0,
  kFeatSolar,
  kFeatOcc,
  kFeatU,
  kFeatTzone,
  kFeatSin,
  kFeatCos,
  kFeatureCount
};

/// Time of day as (sin, cos) of 2 pi hour / 24.
double hour_sin(double hour);
double hour_cos(double hour);

/// Normalised features for a batch of windows, one B x kFeatureCount matrix per step.
/// Columns a step does not know (current u, future t_zone, future u) are zero.
struct WindowBatch {
  std::vector<nn::Matrix> history;  // L entries
  nn::Matrix current;
  std::vector<nn::Matrix> future;   // M entries
  nn::Matrix future_u;              // B x M, normalised
  nn::Matrix y0;                    // B x 1, current t_zone in degC
  nn::Matrix truth;                 // B x M in degC, empty when any window lacks truth

  std::size_t size() const { return static_cast<std::size_t>(y0.rows()); }
  /// Selects feature columns from a step matrix.
  static nn::Matrix select(const nn::Matrix& step, std::initializer_list<int> columns);
};

WindowBatch make_batch(const std::vector<const PredictionWindow*>& windows, const NormStats& stats);

/// Builds the window anchored at `anchor`; requires L <= anchor and anchor + M < frame.size().
PredictionWindow window_at(const testbed::TimeSeriesFrame& frame, std::size_t anchor,
                           std::size_t history_length, std::size_t horizon);

}  // namespace modnn
