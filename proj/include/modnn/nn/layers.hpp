#pragma once

#include <string>

#include "modnn/nn/params.hpp"
#include "modnn/nn/tape.hpp"
#include "modnn/random.hpp"

namespace modnn::nn {

/// Glorot-uniform matrix: U(-a, a) with a = sqrt(6 / (rows + cols)).
Matrix glorot_uniform(Index rows, Index cols, Rng& rng);

/// Inverse of softplus, for initialising raw weights to a target effective weight.
double softplus_inverse(double y);

/// y = x W + b.
struct LinearLayer {
  std::size_t w = 0;
  std::size_t b = 0;
  Index in = 0;
  Index out = 0;

  static LinearLayer create(ParamSet& params, const std::string& prefix, Index in, Index out,
                            Rng& rng);
  Var apply(Tape& tape, Bound vars, Var x) const;
};

/// y = x softplus(R) + b.
///
/// Every entry of dy/dx is strictly positive for any finite R, and nothing is
/// applied after the affine map, so stacking these layers keeps the end-to-end
/// Jacobian positive.
struct PositiveLinearLayer {
  std::size_t raw = 0;
  std::size_t b = 0;
  Index in = 0;
  Index out = 0;

  /// Raw weights start at softplus^-1(initial_weight); bias starts at zero.
  static PositiveLinearLayer create(ParamSet& params, const std::string& prefix, Index in,
                                    Index out, double initial_weight = 0.1);
  Var weight(Tape& tape, Bound vars) const;
  Var apply(Tape& tape, Bound vars, Var x) const;
};

/// Gated recurrent unit with gate columns ordered [reset | update | candidate]:
///   r = sig(x Wi_r + bi_r + h Wh_r + bh_r)
///   z = sig(x Wi_z + bi_z + h Wh_z + bh_z)
///   n = tanh(x Wi_n + bi_n + r * (h Wh_n + bh_n))
///   h' = (1 - z) * n + z * h
struct GruCell {
  std::size_t w_i = 0;
  std::size_t w_h = 0;
  std::size_t b_i = 0;
  std::size_t b_h = 0;
  Index in = 0;
  Index hidden = 0;

  static GruCell create(ParamSet& params, const std::string& prefix, Index in, Index hidden,
                        Rng& rng);
  Var step(Tape& tape, Bound vars, Var x, Var h) const;
};

/// Long short-term memory cell with gate columns ordered [input | forget | cell | output].
struct LstmCell {
  struct State {
    Var h;
    Var c;
  };

  std::size_t w_i = 0;
  std::size_t w_h = 0;
  std::size_t b = 0;
  Index in = 0;
  Index hidden = 0;

  static LstmCell create(ParamSet& params, const std::string& prefix, Index in, Index hidden,
                         Rng& rng);
  State step(Tape& tape, Bound vars, Var x, State s) const;
  /// Same update with the input projection x W_i already computed (B x 4H).
  State step_projected(Tape& tape, Bound vars, Var x_proj, State s) const;
};

}  // namespace modnn::nn
