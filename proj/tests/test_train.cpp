#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "modnn/error.hpp"
#include "modnn/random.hpp"
#include "modnn/testbed/simulate.hpp"
#include "modnn/train/trainer.hpp"

using namespace modnn;

namespace {

const testbed::TimeSeriesFrame& frame() {
  static const testbed::TimeSeriesFrame f = [] {
    testbed::TestbedConfig c;
    c.days = 12;
    c.seed = 5;
    return testbed::run_baseline(c);
  }();
  return f;
}

ModelShape small_shape() {
  ModelShape s;
  s.history = 8;
  s.horizon = 6;
  s.hidden = 6;
  s.latent = 3;
  return s;
}

SplitOptions small_split() {
  SplitOptions o;
  o.train_days = 8;
  o.val_days = 3;
  o.train_stride = 6;
  o.val_stride = 6;
  return o;
}

const DataSplit& split() {
  static const DataSplit s = split_frame(frame(), 8, 6, small_split());
  return s;
}

TrainOptions quick(int epochs) {
  TrainOptions o;
  o.epochs = epochs;
  o.lr = 3e-3;
  o.seed = 11;
  o.trv_windows = 8;
  return o;
}

}  // namespace

TEST(Windows, CountFormula) {
  EXPECT_EQ(window_count(8 + 1 + 6, 8, 6, 1), 1u);
  EXPECT_EQ(window_count(8 + 1 + 6 + 9, 8, 6, 1), 10u);
  EXPECT_EQ(window_count(8 + 6, 8, 6, 1), 0u);
  EXPECT_EQ(window_count(100, 8, 6, 4), (100u - 15u) / 4u + 1u);
  const auto d = build_windows(frame().slice(0, 8 + 1 + 6 + 9), 8, 6, 1);
  EXPECT_EQ(d.size(), 10u);
  EXPECT_EQ(d.windows.back().anchor, 8u + 9u);
}

TEST(Windows, StrideEqualToHorizonGivesDisjointDecoderSegments) {
  const auto d = build_windows(frame(), 8, 6, 6);
  for (std::size_t i = 1; i < d.size(); ++i) {
    EXPECT_EQ(d.windows[i].anchor, d.windows[i - 1].anchor + 6);
  }
}

TEST(Windows, Errors) {
  EXPECT_THROW(build_windows(frame().slice(0, 14), 8, 6, 1), DatasetError);
  EXPECT_THROW(build_windows(frame(), 8, 6, 0), DatasetError);
}

TEST(Split, NoLeakageAndTrainOnlyStatistics) {
  const auto& s = split();
  ASSERT_FALSE(s.train.empty());
  ASSERT_FALSE(s.val.empty());
  const std::size_t last_train_row = s.train.windows.back().anchor + 6;
  for (const auto& w : s.val.windows) {
    EXPECT_GT(w.anchor - 8, last_train_row);
  }
  EXPECT_EQ(s.val.windows.front().anchor, s.val_begin + 8);
  EXPECT_EQ(s.stats, NormStats::from_frame(frame().slice(0, s.train_rows)));
  EXPECT_NE(s.stats, NormStats::from_frame(frame()));
  SplitOptions too_long = small_split();
  too_long.val_days = 5;
  EXPECT_THROW(split_frame(frame(), 8, 6, too_long), DatasetError);
}

TEST(Metrics, MaeMapeExamples) {
  const std::vector<double> a{21.0, 23.0}, b{22.0, 24.0};
  const Accuracy same = mae_mape(a, a);
  EXPECT_EQ(same.mae, 0.0);
  EXPECT_EQ(same.mape, 0.0);
  const Accuracy r = mae_mape(a, b);
  EXPECT_DOUBLE_EQ(r.mae, 1.0);
  EXPECT_NEAR(r.mape, 50.0 * (1.0 / 22.0 + 1.0 / 24.0), 1e-12);
  EXPECT_NEAR(r.mape, 4.356, 1e-3);
}

TEST(Metrics, MaeMapeErrors) {
  const std::vector<double> small{1.0, 3.0}, truth{2.0, 0.5}, one{1.0};
  EXPECT_THROW(mae_mape(small, truth), MetricError);
  EXPECT_THROW(mae_mape(small, one), ShapeError);
  EXPECT_THROW(mae_mape({}, {}), ShapeError);
}

TEST(Train, ZeroEpochsReturnsInitialModel) {
  const auto r = train(Variant::kModnn, small_shape(), split(), quick(0));
  const auto fresh = make_model(Variant::kModnn, small_shape(), split().stats, derive_seed(11, 4));
  EXPECT_EQ(r.model->params().checksum(), fresh->params().checksum());
  EXPECT_TRUE(r.report.epochs.empty());
  EXPECT_GT(r.report.mae, 0.0);
}

TEST(Train, DeterministicPerSeed) {
  const auto a = train(Variant::kModnn, small_shape(), split(), quick(2));
  const auto b = train(Variant::kModnn, small_shape(), split(), quick(2));
  EXPECT_EQ(a.model->params().checksum(), b.model->params().checksum());
  EXPECT_EQ(a.report.to_json().dump(), b.report.to_json().dump());
  TrainOptions other = quick(2);
  other.seed = 12;
  const auto c = train(Variant::kModnn, small_shape(), split(), other);
  EXPECT_NE(a.model->params().checksum(), c.model->params().checksum());
}

TEST(Train, ModnnLearnsWithZeroTrvMonitor) {
  const auto r = train(Variant::kModnn, small_shape(), split(), quick(6));
  ASSERT_EQ(r.report.epochs.size(), 6u);
  for (std::size_t e = 0; e < r.report.epochs.size(); ++e) {
    EXPECT_EQ(r.report.epochs[e].epoch, static_cast<int>(e));
    EXPECT_EQ(r.report.epochs[e].val_trv, 0.0);
  }
  const double initial = evaluate_mse(
      *make_model(Variant::kModnn, small_shape(), split().stats, derive_seed(11, 4)), split().val);
  EXPECT_LT(r.report.epochs.back().val_mse, initial);
  EXPECT_LT(r.report.epochs.back().train_mse, r.report.epochs.front().train_mse);
}

TEST(Train, LstmRuns) {
  const auto r = train(Variant::kLstm, small_shape(), split(), quick(2));
  EXPECT_EQ(r.report.variant, "lstm");
  EXPECT_TRUE(std::isfinite(r.report.epochs.back().val_mse));
  EXPECT_GE(r.report.epochs.back().val_trv, 0.0);
}

TEST(Train, NonFiniteLossNamesEpoch) {
  DataSplit bad = split();
  bad.train.windows[0].truth[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    train(Variant::kModnn, small_shape(), bad, quick(1));
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos);
  }
}

TEST(Train, RejectsBadInputs) {
  DataSplit empty = split();
  empty.train.windows.clear();
  EXPECT_THROW(train(Variant::kModnn, small_shape(), empty, quick(1)), DatasetError);
  TrainOptions o = quick(1);
  o.lr = 0.0;
  EXPECT_THROW(train(Variant::kModnn, small_shape(), split(), o), ConfigError);
  ModelShape other = small_shape();
  other.horizon = 5;
  EXPECT_THROW(train(Variant::kModnn, other, split(), quick(1)), ShapeError);
}

TEST(Train, ReportSerialisation) {
  auto r = train(Variant::kModnn, small_shape(), split(), quick(2));
  r.report.config_hash = "abc";
  const auto j = r.report.to_json();
  EXPECT_EQ(j["config_hash"], "abc");
  EXPECT_EQ(j["epochs"].size(), 2u);
  EXPECT_FALSE(j.contains("wall_seconds"));
  EXPECT_TRUE(r.report.to_json(true).contains("wall_seconds"));
  const std::string csv = r.report.to_csv("seed 11");
  EXPECT_EQ(csv.rfind("# seed 11\nepoch,train_mse,val_mse,val_trv\n0,", 0), 0u);
}
