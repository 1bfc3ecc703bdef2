#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "modnn/error.hpp"
#include "modnn/model/neural.hpp"
#include "modnn/model/reference.hpp"
#include "modnn/testbed/simulate.hpp"

using namespace modnn;
using nn::Matrix;

namespace {

const testbed::TimeSeriesFrame& frame() {
  static const testbed::TimeSeriesFrame f = [] {
    testbed::TestbedConfig c;
    c.days = 4;
    c.seed = 3;
    return testbed::run_baseline(c);
  }();
  return f;
}

NormStats stats() { return NormStats::from_frame(frame()); }

ModelShape small_shape(std::size_t L = 8, std::size_t M = 6) {
  ModelShape s;
  s.history = L;
  s.horizon = M;
  s.hidden = 5;
  s.latent = 3;
  return s;
}

/// Perturbs every parameter so tests do not depend on the particular initialisation.
void jitter(NeuralModel& m, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  auto& p = m.mutable_params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (nn::Index k = 0; k < p[i].value.size(); ++k) p[i].value.data()[k] += rng.uniform(-scale, scale);
  }
}

std::vector<double> cooling_everywhere(const PredictionWindow& w, double u) {
  return std::vector<double>(w.horizon(), u);
}

}  // namespace

TEST(Window, LayoutMatchesFrameRows) {
  const auto& f = frame();
  const auto w = window_at(f, 10, 8, 6);
  EXPECT_EQ(w.history.front().t_zone, f.t_zone[2]);
  EXPECT_EQ(w.history.back().u_hvac, f.u_hvac[9]);
  EXPECT_EQ(w.current.t_zone, f.t_zone[10]);
  EXPECT_EQ(w.future_u.front(), f.u_hvac[10]);
  EXPECT_EQ(w.truth.front(), f.t_zone[11]);
  EXPECT_EQ(w.truth.back(), f.t_zone[16]);
  EXPECT_THROW(window_at(f, 7, 8, 6), DatasetError);
  EXPECT_THROW(window_at(f, f.size() - 6, 8, 6), DatasetError);
  EXPECT_NO_THROW(window_at(f, f.size() - 7, 8, 6));
}

TEST(Window, ShapeCheckedByModel) {
  ModnnModel m(small_shape(), stats(), 1);
  const auto w = window_at(frame(), 20, 7, 6);
  EXPECT_THROW(m.forward(w), ShapeError);
}

TEST(ModnnForward, MonotoneInHvacPointwise) {
  const auto& f = frame();
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    ModnnModel m(small_shape(), stats(), 100 + trial);
    jitter(m, 200 + trial, 1.0);
    const auto w = window_at(f, 8 + rng.below(f.size() - 20), 8, 6);
    std::vector<double> u(6), u2(6);
    for (std::size_t k = 0; k < 6; ++k) {
      u[k] = rng.uniform(-3000.0, 0.0);
      u2[k] = std::min(0.0, u[k] + rng.uniform(0.0, 1500.0));
    }
    const auto y = m.override_hvac(w, u);
    const auto y2 = m.override_hvac(w, u2);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_LE(y[k], y2[k]);
  }
}

TEST(ModnnForward, ZeroHorizonGivesEmptySequence) {
  ModnnModel m(small_shape(8, 0), stats(), 1);
  const auto w = window_at(frame(), 30, 8, 0);
  EXPECT_TRUE(m.forward(w).empty());
  LstmModel l(small_shape(8, 0), stats(), 1);
  EXPECT_TRUE(l.forward(w).empty());
}

TEST(ModnnForward, ZeroIncrementsGiveFlatTrajectory) {
  ModnnModel m(small_shape(), stats(), 4);
  auto& p = m.mutable_params();
  p.at("ext.flux.w").setZero();
  p.at("ext.flux.b").setZero();
  p.at("int.flux.w").setZero();
  p.at("int.flux.b").setZero();
  p.at("hvac.b").setZero();
  p.at("balance.b").setZero();
  auto w = window_at(frame(), 40, 8, 6);
  for (double& u : w.future_u) u = m.stats().u_hvac.mean;
  const auto y = m.forward(w);
  for (double v : y) EXPECT_NEAR(v, w.current.t_zone, 1e-12);
}

TEST(ModnnForward, OverrideWithOwnInputsIsForward) {
  ModnnModel m(small_shape(), stats(), 5);
  jitter(m, 6);
  const auto w = window_at(frame(), 50, 8, 6);
  EXPECT_EQ(m.override_hvac(w, w.future_u), m.forward(w));
}

TEST(ModnnForward, MaxCoolingNeverWarmer) {
  ModnnModel m(small_shape(), stats(), 5);
  jitter(m, 8);
  for (std::size_t a : {20u, 90u, 200u}) {
    const auto w = window_at(frame(), a, 8, 6);
    const auto y = m.forward(w);
    const auto yc = m.override_hvac(w, cooling_everywhere(w, -3500.0), {-3500.0, 0.0});
    for (std::size_t k = 0; k < y.size(); ++k) EXPECT_LE(yc[k], y[k]);
  }
}

TEST(ModnnForward, OverrideBoundsAndLength) {
  ModnnModel m(small_shape(), stats(), 5);
  const auto w = window_at(frame(), 50, 8, 6);
  EXPECT_THROW(m.override_hvac(w, cooling_everywhere(w, -5000.0), {-4000.0, 0.0}), ContractError);
  EXPECT_THROW(m.override_hvac(w, std::vector<double>(5, 0.0)), ContractError);
}

TEST(ModnnForward, BatchAgreesWithRollout) {
  ModnnModel m(small_shape(), stats(), 9);
  jitter(m, 10);
  const auto w1 = window_at(frame(), 60, 8, 6);
  const auto w2 = window_at(frame(), 130, 8, 6);
  const auto batch = make_batch({&w1, &w2}, m.stats());
  nn::Tape tape;
  const auto vars = m.params().bind(tape, false);
  const auto out = m.predict_batch(tape, vars, batch);
  const auto y1 = m.forward(w1);
  const auto y2 = m.forward(w2);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_NEAR(tape.value(out[k])(0, 0), y1[k], 1e-10);
    EXPECT_NEAR(tape.value(out[k])(1, 0), y2[k], 1e-10);
  }
}

TEST(ModnnJacobian, CausalNonNegativeAndMatchesFiniteDifferences) {
  ModnnModel m(small_shape(), stats(), 11);
  jitter(m, 12);
  const auto w = window_at(frame(), 70, 8, 6);
  const Matrix J = m.hvac_jacobian(w);
  ASSERT_EQ(J.rows(), 6);
  for (nn::Index t = 0; t < 6; ++t) {
    for (nn::Index s = 0; s < 6; ++s) {
      if (s > t) {
        EXPECT_EQ(J(t, s), 0.0);
      } else {
        EXPECT_GT(J(t, s), 0.0);
      }
    }
  }
  const double eps = 1e-1;  // W; the response is affine in u, so any step is exact up to rounding
  for (nn::Index s = 0; s < 6; ++s) {
    auto up = w.future_u, down = w.future_u;
    up[static_cast<std::size_t>(s)] += eps;
    down[static_cast<std::size_t>(s)] -= eps;
    const auto yu = m.override_hvac(w, up);
    const auto yd = m.override_hvac(w, down);
    for (nn::Index t = 0; t < 6; ++t) {
      const double fd = (yu[static_cast<std::size_t>(t)] - yd[static_cast<std::size_t>(t)]) / (2 * eps);
      EXPECT_NEAR(fd, J(t, s), 1e-4 * std::max(std::abs(J(t, s)), 1e-6));
    }
  }
}

TEST(ModnnJacobian, ScalarModelMatchesAnalyticProduct) {
  ModelShape shape = small_shape(3, 2);
  shape.hidden = 1;
  shape.latent = 1;
  ModnnModel m(shape, stats(), 13);
  jitter(m, 14);
  m.mutable_params().at("hvac.raw")(0, 0) = 0.3;
  m.mutable_params().at("balance.raw")(0, 0) = -1.2;
  const auto w = window_at(frame(), 70, 3, 2);
  const Matrix J = m.hvac_jacobian(w);
  auto sp = [](double x) { return std::log1p(std::exp(x)); };
  const double g = sp(0.3) * sp(-1.2) * m.stats().t_zone.std / m.stats().u_hvac.std;
  EXPECT_NEAR(J(0, 0), g, 1e-10 * g);
  EXPECT_NEAR(J(1, 0), g, 1e-10 * g);
  EXPECT_NEAR(J(1, 1), g, 1e-10 * g);
  EXPECT_EQ(J(0, 1), 0.0);
}

TEST(ModnnGradient, FullForwardMatchesFiniteDifferences) {
  const ModelShape shape = small_shape(3, 3);
  for (int trial = 0; trial < 3; ++trial) {
    ModnnModel m(shape, stats(), 20 + trial);
    jitter(m, 30 + trial, 0.3);
    const auto w1 = window_at(frame(), 40 + 17 * trial, 3, 3);
    const auto w2 = window_at(frame(), 150 + 5 * trial, 3, 3);
    const auto batch = make_batch({&w1, &w2}, m.stats());
    std::vector<Matrix> inputs;
    for (const auto& p : m.params()) inputs.push_back(p.value);
    const double err = modnn::testing::gradcheck(
        [&](nn::Tape& t, const std::vector<nn::Var>& v) {
          const auto out = m.predict_batch(t, v, batch);
          nn::Var loss = t.scalar(0.0);
          for (std::size_t k = 0; k < out.size(); ++k) {
            loss = t.add(loss, t.mean(t.square(t.sub(out[k], t.constant(batch.truth.col(static_cast<nn::Index>(k)))))));
          }
          return loss;
        },
        inputs);
    EXPECT_LT(err, 1e-4);
  }
}

TEST(LstmForward, DeterministicLengthAndCausal) {
  LstmModel m(small_shape(), stats(), 2);
  jitter(m, 3);
  const auto w = window_at(frame(), 80, 8, 6);
  const auto y = m.forward(w);
  EXPECT_EQ(y.size(), 6u);
  EXPECT_EQ(y, m.forward(w));
  auto u = w.future_u;
  u[4] -= 1000.0;
  const auto y2 = m.override_hvac(w, u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(y[k], y2[k]);
  const Matrix J = m.hvac_jacobian(w);
  for (nn::Index t = 0; t < 6; ++t)
    for (nn::Index s = t + 1; s < 6; ++s) EXPECT_EQ(J(t, s), 0.0);
}

TEST(LstmForward, BatchAgreesWithRolloutAndJacobianMatchesFd) {
  LstmModel m(small_shape(), stats(), 21);
  jitter(m, 22);
  const auto w = window_at(frame(), 100, 8, 6);
  const auto batch = make_batch({&w}, m.stats());
  nn::Tape tape;
  const auto vars = m.params().bind(tape, false);
  const auto out = m.predict_batch(tape, vars, batch);
  const auto y = m.forward(w);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(tape.value(out[k])(0, 0), y[k], 1e-10);

  const Matrix J = m.hvac_jacobian(w);
  const double eps = 1.0;
  for (nn::Index s = 0; s < 6; ++s) {
    auto up = w.future_u, down = w.future_u;
    up[static_cast<std::size_t>(s)] += eps;
    down[static_cast<std::size_t>(s)] -= eps;
    const auto yu = m.override_hvac(w, up);
    const auto yd = m.override_hvac(w, down);
    for (nn::Index t = 0; t < 6; ++t) {
      const double fd = (yu[static_cast<std::size_t>(t)] - yd[static_cast<std::size_t>(t)]) / (2 * eps);
      EXPECT_NEAR(fd, J(t, s), 1e-4 * std::max(std::abs(J(t, s)), 1e-7));
    }
  }
}

TEST(LstmGradient, FullForwardMatchesFiniteDifferences) {
  LstmModel m(small_shape(3, 3), stats(), 40);
  jitter(m, 41, 0.3);
  const auto w = window_at(frame(), 90, 3, 3);
  const auto batch = make_batch({&w}, m.stats());
  std::vector<Matrix> inputs;
  for (const auto& p : m.params()) inputs.push_back(p.value);
  const double err = modnn::testing::gradcheck(
      [&](nn::Tape& t, const std::vector<nn::Var>& v) {
        const auto out = m.predict_batch(t, v, batch);
        nn::Var loss = t.scalar(0.0);
        for (std::size_t k = 0; k < out.size(); ++k) loss = t.add(loss, t.sum(t.square(t.shift(out[k], -25.0))));
        return loss;
      },
      inputs);
  EXPECT_LT(err, 1e-4);
}

TEST(Checkpoint, RoundTripIsBitExactAndByteIdentical) {
  for (Variant v : {Variant::kModnn, Variant::kLstm}) {
    auto m = make_model(v, small_shape(), stats(), 50);
    jitter(*m, 51);
    const auto path = (std::filesystem::temp_directory_path() / ("modnn_ckpt_" + to_string(v) + ".json")).string();
    save_checkpoint(*m, path, "cafebabe");
    auto back = load_checkpoint(path);
    EXPECT_EQ(back->variant(), to_string(v));
    EXPECT_EQ(checkpoint_text(*back, "cafebabe"), checkpoint_text(*m, "cafebabe"));
    const auto w = window_at(frame(), 120, 8, 6);
    EXPECT_EQ(back->forward(w), m->forward(w));
    std::filesystem::remove(path);
  }
}

TEST(Checkpoint, CorruptionIsIntegrityError) {
  auto m = make_model(Variant::kModnn, small_shape(), stats(), 60);
  auto j = checkpoint_json(*m);
  j["params"][0]["values"][0] = j["params"][0]["values"][0].get<double>() + 1e-9;
  EXPECT_THROW(checkpoint_from_json(j), IntegrityError);
  auto k = checkpoint_json(*m);
  k["shape"]["hidden"] = 7;
  EXPECT_THROW(checkpoint_from_json(k), IntegrityError);
  auto v = checkpoint_json(*m);
  v["version"] = 99;
  EXPECT_THROW(checkpoint_from_json(v), IntegrityError);
  const auto path = (std::filesystem::temp_directory_path() / "modnn_ckpt_garbage.json").string();
  std::ofstream(path) << "{ not json";
  EXPECT_THROW(load_checkpoint(path), IntegrityError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/x.json"), IntegrityError);
}

TEST(Checkpoint, VariantNames) {
  EXPECT_EQ(parse_variant("modnn"), Variant::kModnn);
  EXPECT_EQ(parse_variant("lstm"), Variant::kLstm);
  EXPECT_THROW(parse_variant("gru"), ConfigError);
}

TEST(Reference, IntegratorAntiMonotoneToy) {
  IntegratorModel m(-0.001, 0, 2);
  auto w = window_at(frame(), 10, 0, 2);
  w.future_u = {0.0, 0.0};
  const auto y = m.forward(w);
  const auto down = m.override_hvac(w, std::vector<double>{-2000.0, -2000.0});
  EXPECT_DOUBLE_EQ(down[0] - y[0], 2.0);
  EXPECT_DOUBLE_EQ(down[1] - y[1], 4.0);
  const Matrix J = m.hvac_jacobian(w);
  EXPECT_EQ(J(0, 0), -0.001);
  EXPECT_EQ(J(0, 1), 0.0);
}

TEST(Reference, RcOracleReproducesTestbed) {
  testbed::TestbedConfig c;
  RcOracleModel m(c.rc, 4, 10);
  const auto w = window_at(frame(), 50, 4, 10);
  const auto y = m.forward(w);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_NEAR(y[k], w.truth[k], 1e-9);
  const Matrix J = m.hvac_jacobian(w);
  EXPECT_NEAR(J(0, 0), testbed::kStepSeconds / c.rc.c_zone, 1e-15);
  EXPECT_GT(J(9, 0), 0.0);
  EXPECT_EQ(J(0, 9), 0.0);
}

TEST(Reference, MirroredFlipsJacobianSign) {
  auto base = std::make_shared<ModnnModel>(small_shape(), stats(), 70);
  jitter(*base, 71);
  MirroredModel mirror(base);
  const auto w = window_at(frame(), 80, 8, 6);
  const Matrix J = base->hvac_jacobian(w);
  const Matrix Jm = mirror.hvac_jacobian(w);
  EXPECT_TRUE(Jm.isApprox(-J, 1e-12));
  const std::vector<double> zero(6, 0.0);
  const auto yb = base->override_hvac(w, zero);
  const auto ym = mirror.override_hvac(w, zero);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(yb[k], ym[k], 1e-12);
  EXPECT_EQ(mirror.variant(), "mirrored_modnn");
}

TEST(Reference, ConstantAndStaticGain) {
  const auto w = window_at(frame(), 80, 2, 3);
  ConstantModel c(2, 3);
  for (double v : c.forward(w)) EXPECT_EQ(v, w.current.t_zone);
  StaticGainModel s(0.002, 2, 3);
  const auto y = s.override_hvac(w, std::vector<double>{-1000.0, 0.0, 500.0});
  EXPECT_DOUBLE_EQ(y[0], w.current.t_zone - 2.0);
  EXPECT_DOUBLE_EQ(y[1], w.current.t_zone);
  EXPECT_DOUBLE_EQ(y[2], w.current.t_zone + 1.0);
}
