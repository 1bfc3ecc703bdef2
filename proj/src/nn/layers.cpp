#include "modnn/nn/layers.hpp"

#include <cmath>

#include "modnn/error.hpp"

namespace modnn::nn {

Matrix glorot_uniform(Index rows, Index cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      m(r, c) = rng.uniform(-a, a);
    }
  }
  return m;
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) {
    throw ContractError("softplus_inverse: argument must be positive");
  }
  return y > 30.0 ? y + std::log(-std::expm1(-y)) : std::log(std::expm1(y));
}

namespace {

void check_width(const char* what, const Matrix& x, Index expected) {
  if (x.cols() != expected) {
    throw ShapeError(std::string(what) + ": input has " + std::to_string(x.cols()) +
                     " columns, expected " + std::to_string(expected));
  }
}

}  // namespace

LinearLayer LinearLayer::create(ParamSet& params, const std::string& prefix, Index in, Index out,
                                Rng& rng) {
  LinearLayer l;
  l.in = in;
  l.out = out;
  l.w = params.add(prefix + ".w", glorot_uniform(in, out, rng));
  l.b = params.add(prefix + ".b", Matrix::Zero(1, out));
  return l;
}

Var LinearLayer::apply(Tape& tape, Bound vars, Var x) const {
  check_width("linear", tape.value(x), in);
  return tape.affine(x, vars[w], vars[b]);
}

PositiveLinearLayer PositiveLinearLayer::create(ParamSet& params, const std::string& prefix,
                                                Index in, Index out, double initial_weight) {
  PositiveLinearLayer l;
  l.in = in;
  l.out = out;
  l.raw = params.add(prefix + ".raw", Matrix::Constant(in, out, softplus_inverse(initial_weight)));
  l.b = params.add(prefix + ".b", Matrix::Zero(1, out));
  return l;
}

Var PositiveLinearLayer::weight(Tape& tape, Bound vars) const { return tape.softplus(vars[raw]); }

Var PositiveLinearLayer::apply(Tape& tape, Bound vars, Var x) const {
  check_width("positive_linear", tape.value(x), in);
  return tape.affine(x, weight(tape, vars), vars[b]);
}

GruCell GruCell::create(ParamSet& params, const std::string& prefix, Index in, Index hidden,
                        Rng& rng) {
  GruCell g;
  g.in = in;
  g.hidden = hidden;
  g.w_i = params.add(prefix + ".w_i", glorot_uniform(in, 3 * hidden, rng));
  g.w_h = params.add(prefix + ".w_h", glorot_uniform(hidden, 3 * hidden, rng));
  g.b_i = params.add(prefix + ".b_i", Matrix::Zero(1, 3 * hidden));
  g.b_h = params.add(prefix + ".b_h", Matrix::Zero(1, 3 * hidden));
  return g;
}

Var GruCell::step(Tape& tape, Bound vars, Var x, Var h) const {
  check_width("gru input", tape.value(x), in);
  check_width("gru state", tape.value(h), hidden);
  const Index H = hidden;
  Var gi = tape.affine(x, vars[w_i], vars[b_i]);
  Var gh = tape.affine(h, vars[w_h], vars[b_h]);
  Var rz = tape.sigmoid(tape.add(tape.cols(gi, 0, 2 * H), tape.cols(gh, 0, 2 * H)));
  Var r = tape.cols(rz, 0, H);
  Var z = tape.cols(rz, H, H);
  Var n = tape.tanh(tape.add(tape.cols(gi, 2 * H, H), tape.mul(r, tape.cols(gh, 2 * H, H))));
  // (1 - z) n + z h == n + z (h - n)
  return tape.add(n, tape.mul(z, tape.sub(h, n)));
}

LstmCell LstmCell::create(ParamSet& params, const std::string& prefix, Index in, Index hidden,
                          Rng& rng) {
  LstmCell l;
  l.in = in;
  l.hidden = hidden;
  l.w_i = params.add(prefix + ".w_i", glorot_uniform(in, 4 * hidden, rng));
  l.w_h = params.add(prefix + ".w_h", glorot_uniform(hidden, 4 * hidden, rng));
  l.b = params.add(prefix + ".b", Matrix::Zero(1, 4 * hidden));
  return l;
}

LstmCell::State LstmCell::step(Tape& tape, Bound vars, Var x, State s) const {
  check_width("lstm input", tape.value(x), in);
  return step_projected(tape, vars, tape.matmul(x, vars[w_i]), s);
}

LstmCell::State LstmCell::step_projected(Tape& tape, Bound vars, Var x_proj, State s) const {
  check_width("lstm projected input", tape.value(x_proj), 4 * hidden);
  check_width("lstm state", tape.value(s.h), hidden);
  const Index H = hidden;
  Var gates = tape.add(tape.add(x_proj, tape.matmul(s.h, vars[w_h])), vars[b]);
  Var ifo_i = tape.sigmoid(tape.cols(gates, 0, 2 * H));
  Var i = tape.cols(ifo_i, 0, H);
  Var f = tape.cols(ifo_i, H, H);
  Var g = tape.tanh(tape.cols(gates, 2 * H, H));
  Var o = tape.sigmoid(tape.cols(gates, 3 * H, H));
  Var c = tape.add(tape.mul(f, s.c), tape.mul(i, g));
  Var h = tape.mul(o, tape.tanh(c));
  return {h, c};
}

}  // namespace modnn::nn
