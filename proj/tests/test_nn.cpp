#include <cmath>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "modnn/error.hpp"
#include "modnn/nn/adam.hpp"
#include "modnn/nn/layers.hpp"
#include "modnn/nn/params.hpp"
#include "modnn/nn/tape.hpp"

using namespace modnn;
using namespace modnn::nn;
using modnn::testing::gradcheck;

namespace {

Matrix random_matrix(Index r, Index c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

}  // namespace

TEST(Tape, SquareGradientAtThree) {
  Tape t;
  Var x = t.leaf(Matrix::Constant(1, 1, 3.0));
  t.backward(t.mul(x, x));
  EXPECT_DOUBLE_EQ(t.gradient(x)(0, 0), 6.0);
}

TEST(Tape, ConstantFunctionHasZeroGradient) {
  Tape t;
  Var x = t.leaf(Matrix::Constant(1, 1, 3.0));
  Var c = t.add(t.scale(x, 0.0), t.scalar(5.0));
  t.backward(c);
  EXPECT_EQ(t.gradient(x)(0, 0), 0.0);
}

TEST(Tape, UnreachedNodesHaveZeroAdjoint) {
  Tape t;
  Var x = t.leaf(Matrix::Constant(2, 2, 1.0));
  Var y = t.leaf(Matrix::Constant(2, 2, 2.0));
  Var unused = t.tanh(y);
  t.backward(t.sum(t.square(x)));
  EXPECT_TRUE(t.gradient(y).isZero(0.0));
  EXPECT_TRUE(t.gradient(unused).isZero(0.0));
  EXPECT_EQ(t.gradient(y).rows(), 2);
}

TEST(Tape, NonScalarLossIsRejected) {
  Tape t;
  Var x = t.leaf(Matrix::Zero(2, 1));
  EXPECT_THROW(t.backward(x), ContractError);
}

TEST(Tape, ShapeMismatchThrows) {
  Tape t;
  Var a = t.leaf(Matrix::Zero(2, 3));
  Var b = t.leaf(Matrix::Zero(2, 3));
  EXPECT_THROW(t.matmul(a, b), ShapeError);
  EXPECT_THROW(t.add(a, t.leaf(Matrix::Zero(3, 2))), ShapeError);
  EXPECT_THROW(t.rows(a, 1, 2), ShapeError);
}

TEST(Tape, BackwardTwiceGivesSameGradient) {
  Tape t;
  Var x = t.leaf(Matrix::Constant(1, 3, 0.5));
  Var loss = t.sum(t.sigmoid(x));
  t.backward(loss);
  Matrix g1 = t.gradient(x);
  t.backward(loss);
  EXPECT_EQ(g1, t.gradient(x));
}

TEST(Tape, CumsumRows) {
  Tape t;
  Matrix m(3, 2);
  m << 1, 2, 3, 4, 5, 6;
  Matrix expect(3, 2);
  expect << 1, 2, 4, 6, 9, 12;
  EXPECT_EQ(t.value(t.cumsum_rows(t.constant(m))), expect);
}

TEST(Tape, SoftplusStaysPositive) {
  Tape t;
  Var s = t.softplus(t.constant(Matrix::Constant(1, 1, -800.0)));
  EXPECT_GT(t.scalar_value(s), 0.0);
}

TEST(Tape, EveryOpMatchesFiniteDifferences) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = random_matrix(3, 4, rng);
    const Matrix b = random_matrix(3, 4, rng);
    const Matrix w = random_matrix(4, 2, rng);
    const Matrix row = random_matrix(1, 2, rng);
    const Matrix row4 = random_matrix(1, 4, rng);
    EXPECT_LT(gradcheck([](Tape& t, const auto& v) { return t.sum(t.mul(t.matmul(v[0], v[1]), t.matmul(v[0], v[1]))); },
                        {a, w}), 1e-4);
    EXPECT_LT(gradcheck([](Tape& t, const auto& v) { return t.sum(t.tanh(t.affine(v[0], v[1], v[2]))); },
                        {a, w, row}), 1e-4);
    EXPECT_LT(gradcheck([](Tape& t, const auto& v) { return t.mean(t.square(t.sub(v[0], v[1]))); }, {a, b}),
              1e-4);
    EXPECT_LT(gradcheck([](Tape& t, const auto& v) { return t.sum(t.sigmoid(t.add(v[0], v[1]))); }, {a, row4}),
              1e-4);
    EXPECT_LT(gradcheck([](Tape& t, const auto& v) { return t.sum(t.mul(t.softplus(v[0]), v[1])); }, {a, b}),
              1e-4);
    EXPECT_LT(gradcheck([](Tape& t, const auto& v) {
                return t.sum(t.square(t.shift(t.scale(t.cumsum_rows(v[0]), 0.3), 1.0)));
              },
                        {a}),
              1e-4);
    EXPECT_LT(gradcheck([](Tape& t, const auto& v) {
                Var x = t.concat_rows(t.rows(v[0], 1, 2), t.rows(v[1], 0, 1));
                Var y = t.concat_cols(t.cols(x, 0, 1), t.cols(x, 2, 2));
                return t.sum(t.square(t.matmul(t.transpose(y), y)));
              },
                        {a, b}),
              1e-4);
  }
}

TEST(Tape, ReluGradientAwayFromKink) {
  Tape t;
  Matrix m(1, 3);
  m << -1.0, 0.5, 2.0;
  Var x = t.leaf(m);
  t.backward(t.sum(t.relu(x)));
  Matrix expect(1, 3);
  expect << 0.0, 1.0, 1.0;
  EXPECT_EQ(t.gradient(x), expect);
}

TEST(Tape, VectorJacobianProduct) {
  Tape t;
  Matrix m(2, 1);
  m << 1.0, 2.0;
  Var x = t.leaf(m);
  Var y = t.cumsum_rows(t.scale(x, 3.0));
  Matrix seed(2, 1);
  seed << 0.0, 1.0;
  t.backward(y, seed);
  EXPECT_EQ(t.gradient(x)(0, 0), 3.0);
  EXPECT_EQ(t.gradient(x)(1, 0), 3.0);
  seed << 1.0, 0.0;
  t.backward(y, seed);
  EXPECT_EQ(t.gradient(x)(1, 0), 0.0);
}

TEST(PositiveLinear, SoftplusOfZeroIsLn2) {
  ParamSet p;
  auto layer = PositiveLinearLayer::create(p, "pl", 1, 1, std::log(2.0));
  p[layer.raw].value(0, 0) = 0.0;
  Tape t;
  auto vars = p.bind(t, false);
  Var y = layer.apply(t, vars, t.scalar(1.0));
  EXPECT_NEAR(t.scalar_value(y), std::log(2.0), 1e-15);
}

TEST(PositiveLinear, ZeroInputGivesBias) {
  Rng rng(3);
  ParamSet p;
  auto layer = PositiveLinearLayer::create(p, "pl", 3, 2);
  p[layer.raw].value = random_matrix(3, 2, rng, 5.0);
  p[layer.b].value = random_matrix(1, 2, rng);
  Tape t;
  auto vars = p.bind(t, false);
  Var y = layer.apply(t, vars, t.constant(Matrix::Zero(1, 3)));
  EXPECT_EQ(t.value(y), p[layer.b].value);
}

TEST(PositiveLinear, VeryNegativeRawStillPositive) {
  ParamSet p;
  auto layer = PositiveLinearLayer::create(p, "pl", 1, 1);
  p[layer.raw].value(0, 0) = -10.0;
  Tape t;
  auto vars = p.bind(t, false);
  const double w = t.scalar_value(layer.weight(t, vars));
  EXPECT_NEAR(w, std::log1p(std::exp(-10.0)), 1e-18);
  EXPECT_NEAR(w, 4.54e-5, 1e-7);
  EXPECT_GT(w, 0.0);
}

TEST(PositiveLinear, DimensionMismatchThrows) {
  ParamSet p;
  auto layer = PositiveLinearLayer::create(p, "pl", 3, 2);
  Tape t;
  auto vars = p.bind(t, false);
  EXPECT_THROW(layer.apply(t, vars, t.constant(Matrix::Zero(1, 2))), ShapeError);
}

TEST(PositiveLinear, StackedJacobianStrictlyPositive) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    ParamSet p;
    auto l1 = PositiveLinearLayer::create(p, "a", 3, 4);
    auto l2 = PositiveLinearLayer::create(p, "b", 4, 2);
    p[l1.raw].value = random_matrix(3, 4, rng, 8.0);
    p[l2.raw].value = random_matrix(4, 2, rng, 8.0);
    p[l1.b].value = random_matrix(1, 4, rng);
    Tape t;
    auto vars = p.bind(t, false);
    Var x = t.leaf(random_matrix(1, 3, rng, 10.0));
    Var y = l2.apply(t, vars, l1.apply(t, vars, x));
    for (Index o = 0; o < 2; ++o) {
      Matrix seed = Matrix::Zero(1, 2);
      seed(0, o) = 1.0;
      t.backward(y, seed);
      EXPECT_TRUE((t.gradient(x).array() > 0.0).all());
    }
  }
}

TEST(Gru, ZeroParamsHalvesState) {
  Rng rng(1);
  ParamSet p;
  auto cell = GruCell::create(p, "g", 2, 3, rng);
  for (std::size_t i = 0; i < p.size(); ++i) p[i].value.setZero();
  Tape t;
  auto vars = p.bind(t, false);
  Matrix h(1, 3);
  h << 0.4, -0.8, 1.0;
  Var out = cell.step(t, vars, t.constant(random_matrix(1, 2, rng)), t.constant(h));
  EXPECT_TRUE(t.value(out).isApprox(0.5 * h, 1e-15));
}

TEST(Gru, ZeroCandidateWeightsKeepOrigin) {
  Rng rng(2);
  ParamSet p;
  auto cell = GruCell::create(p, "g", 2, 3, rng);
  p[cell.w_i].value.rightCols(3).setZero();
  p[cell.w_h].value.rightCols(3).setZero();
  Tape t;
  auto vars = p.bind(t, false);
  Var out = cell.step(t, vars, t.constant(random_matrix(1, 2, rng)), t.constant(Matrix::Zero(1, 3)));
  EXPECT_TRUE(t.value(out).isZero(0.0));
}

TEST(Gru, RandomParamsBoundedAndFinite) {
  Rng rng(5);
  ParamSet p;
  auto cell = GruCell::create(p, "g", 3, 4, rng);
  for (std::size_t i = 0; i < p.size(); ++i) p[i].value = random_matrix(p[i].value.rows(), p[i].value.cols(), rng, 3.0);
  Tape t;
  auto vars = p.bind(t, false);
  Var h = t.constant(Matrix::Zero(2, 4));
  for (int k = 0; k < 50; ++k) {
    h = cell.step(t, vars, t.constant(random_matrix(2, 3, rng, 100.0)), h);
    EXPECT_TRUE(t.value(h).allFinite());
    EXPECT_LE(t.value(h).cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(Gru, DimensionMismatchThrows) {
  Rng rng(5);
  ParamSet p;
  auto cell = GruCell::create(p, "g", 3, 4, rng);
  Tape t;
  auto vars = p.bind(t, false);
  EXPECT_THROW(cell.step(t, vars, t.constant(Matrix::Zero(1, 2)), t.constant(Matrix::Zero(1, 4))),
               ShapeError);
  EXPECT_THROW(cell.step(t, vars, t.constant(Matrix::Zero(1, 3)), t.constant(Matrix::Zero(1, 3))),
               ShapeError);
}

TEST(Gru, SingleStepGradientMatchesFiniteDifferences) {
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    ParamSet p;
    auto cell = GruCell::create(p, "g", 2, 2, rng);
    std::vector<Matrix> inputs;
    for (const auto& np : p) inputs.push_back(random_matrix(np.value.rows(), np.value.cols(), rng));
    inputs.push_back(random_matrix(1, 2, rng));
    inputs.push_back(random_matrix(1, 2, rng));
    const double err = gradcheck(
        [&](Tape& t, const std::vector<Var>& v) {
          Var h = cell.step(t, Bound(v.data(), 4), v[4], v[5]);
          return t.sum(t.mul(h, h));
        },
        inputs);
    EXPECT_LT(err, 1e-4);
  }
}

TEST(Lstm, ZeroParamsZeroStateStaysAtOrigin) {
  Rng rng(1);
  ParamSet p;
  auto cell = LstmCell::create(p, "l", 2, 3, rng);
  for (std::size_t i = 0; i < p.size(); ++i) p[i].value.setZero();
  Tape t;
  auto vars = p.bind(t, false);
  LstmCell::State s{t.constant(Matrix::Zero(1, 3)), t.constant(Matrix::Zero(1, 3))};
  s = cell.step(t, vars, t.constant(random_matrix(1, 2, rng)), s);
  EXPECT_TRUE(t.value(s.h).isZero(0.0));
  EXPECT_TRUE(t.value(s.c).isZero(0.0));
}

TEST(Lstm, SaturatedForgetAndClosedInputKeepCell) {
  Rng rng(1);
  ParamSet p;
  auto cell = LstmCell::create(p, "l", 2, 3, rng);
  p[cell.w_i].value.setZero();
  p[cell.w_h].value.setZero();
  Matrix b = Matrix::Zero(1, 12);
  b.leftCols(3).setConstant(-1e3);   // input gate closed
  b.middleCols(3, 3).setConstant(1e3); // forget gate open
  p[cell.b].value = b;
  Tape t;
  auto vars = p.bind(t, false);
  Matrix c0(1, 3);
  c0 << 0.7, -2.0, 5.0;
  LstmCell::State s{t.constant(Matrix::Zero(1, 3)), t.constant(c0)};
  s = cell.step(t, vars, t.constant(random_matrix(1, 2, rng)), s);
  EXPECT_EQ(t.value(s.c), c0);
}

TEST(Lstm, StepGradientMatchesFiniteDifferences) {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    ParamSet p;
    auto cell = LstmCell::create(p, "l", 2, 2, rng);
    std::vector<Matrix> inputs;
    for (const auto& np : p) inputs.push_back(random_matrix(np.value.rows(), np.value.cols(), rng));
    inputs.push_back(random_matrix(1, 2, rng));
    inputs.push_back(random_matrix(1, 2, rng));
    inputs.push_back(random_matrix(1, 2, rng));
    const double err = gradcheck(
        [&](Tape& t, const std::vector<Var>& v) {
          auto s = cell.step(t, Bound(v.data(), 3), v[3], {v[4], v[5]});
          s = cell.step(t, Bound(v.data(), 3), v[3], s);
          return t.sum(t.add(t.mul(s.h, s.h), s.c));
        },
        inputs);
    EXPECT_LT(err, 1e-4);
  }
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  ParamSet p;
  p.add("w", Matrix::Constant(2, 2, 1.5));
  const Matrix before = p[0].value;
  Adam adam(p, {});
  adam.step(p, {Matrix::Zero(2, 2)});
  EXPECT_EQ(p[0].value, before);
  EXPECT_EQ(adam.steps(), 1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamSet p;
  p.add("w", Matrix::Zero(1, 3));
  Adam adam(p, {.lr = 0.01});
  Matrix g(1, 3);
  g << 2.0, -0.5, 1e-3;
  adam.step(p, {g});
  EXPECT_NEAR(p[0].value(0, 0), -0.01, 1e-8);
  EXPECT_NEAR(p[0].value(0, 1), 0.01, 1e-8);
  EXPECT_NEAR(p[0].value(0, 2), -0.01, 1e-7);
  EXPECT_EQ(adam.first_moment(0).rows(), 1);
  EXPECT_EQ(adam.second_moment(0).cols(), 3);
}

TEST(Adam, Deterministic) {
  ParamSet p1;
  p1.add("w", Matrix::Constant(2, 1, 0.3));
  ParamSet p2 = p1;
  Adam a1(p1, {}), a2(p2, {});
  Matrix g(2, 1);
  g << 0.1, -4.0;
  for (int i = 0; i < 3; ++i) {
    a1.step(p1, {g});
    a2.step(p2, {g});
  }
  EXPECT_EQ(p1[0].value, p2[0].value);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  ParamSet p;
  p.add("first", Matrix::Zero(1, 1));
  p.add("second.w", Matrix::Zero(1, 1));
  Adam adam(p, {});
  try {
    adam.step(p, {Matrix::Zero(1, 1), Matrix::Constant(1, 1, std::nan(""))});
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("second.w"), std::string::npos);
  }
  EXPECT_EQ(adam.steps(), 0);
}

TEST(Params, JsonRoundTripIsExact) {
  Rng rng(21);
  ParamSet p;
  p.add("a", random_matrix(2, 3, rng));
  p.add("b", random_matrix(1, 4, rng, 1e-200));
  ParamSet q = p;
  for (std::size_t i = 0; i < q.size(); ++i) q[i].value.setZero();
  q.assign_from_json(nlohmann::json::parse(p.to_json().dump()));
  EXPECT_EQ(q[0].value, p[0].value);
  EXPECT_EQ(q[1].value, p[1].value);
  EXPECT_EQ(q.checksum(), p.checksum());
}

TEST(Params, LayoutMismatchRejected) {
  ParamSet p;
  p.add("a", Matrix::Zero(2, 2));
  ParamSet q;
  q.add("a", Matrix::Zero(2, 3));
  EXPECT_THROW(q.assign_from_json(p.to_json()), IntegrityError);
  EXPECT_THROW(p.add("a", Matrix::Zero(1, 1)), ContractError);
}
