#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace modnn::nn {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Handle to a node recorded on a Tape. Only meaningful for the tape that created it.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

/// Reverse-mode automatic differentiation over dense double matrices.
///
/// Nodes are appended in evaluation order, so parents always precede children and
/// a single reverse sweep yields exact adjoints. Nodes whose inputs are all
/// constants are evaluated but never visited by the backward sweep.
///
/// Sequences are laid out as rows (time or batch along rows, features along
/// columns), so a batch of B hidden states of width H is a B x H matrix.
class Tape {
 public:
  Tape() = default;

  Var leaf(Matrix value);
  Var constant(Matrix value);
  Var scalar(double value) { return constant(Matrix::Constant(1, 1, value)); }

  const Matrix& value(Var v) const;
  double scalar_value(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a scalar node. Earlier adjoints are discarded.
  /// Throws ContractError if `loss` is not 1x1.
  void backward(Var loss);
  /// Vector-Jacobian product: reverse sweep seeded with `seed` at `output`.
  void backward(Var output, const Matrix& seed);
  /// Adjoint from the most recent sweep; zero for nodes the sweep did not reach.
  Matrix gradient(Var v) const;

  // Linear algebra.
  Var matmul(Var a, Var b);
  /// x * w + b, with b a 1 x out row broadcast over the rows of x.
  Var affine(Var x, Var w, Var b);
  /// Elementwise sum; `b` may also be a 1 x n row broadcast over the rows of `a`.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var shift(Var a, double s);

  // Pointwise nonlinearities.
  Var sigmoid(Var a);
  Var tanh(Var a);
  /// log(1 + e^x), floored at the smallest normal double so it stays strictly positive.
  Var softplus(Var a);
  Var square(Var a);
  Var relu(Var a);

  // Reductions and layout.
  Var sum(Var a);
  Var mean(Var a);
  Var rows(Var a, Index start, Index count);
  Var cols(Var a, Index start, Index count);
  Var concat_cols(Var a, Var b);
  Var concat_rows(Var a, Var b);
  /// Running sum down each column: out(i, j) = sum_{k <= i} a(k, j).
  Var cumsum_rows(Var a);
  Var transpose(Var a);

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kConstant,
    kMatMul,
    kAffine,
    kAdd,
    kAddRow,
    kSub,
    kMul,
    kScale,
    kShift,
    kSigmoid,
    kTanh,
    kSoftplus,
    kSquare,
    kRelu,
    kSum,
    kMean,
    kRows,
    kCols,
    kConcatCols,
    kConcatRows,
    kCumsumRows,
    kTranspose,
  };

  struct Node {
    Op op;
    bool requires_grad;
    std::uint32_t a = UINT32_MAX;
    std::uint32_t b = UINT32_MAX;
    std::uint32_t c = UINT32_MAX;
    Index i0 = 0;
    double s = 0.0;
    Matrix value;
  };

  Var push(Op op, Matrix value, std::initializer_list<Var> parents, Index i0 = 0, double s = 0.0);
  const Node& node(Var v) const;
  void sweep(std::uint32_t from);
  Matrix& adjoint(std::uint32_t id);

  std::vector<Node> nodes_;
  std::vector<Matrix> adjoints_;
  std::vector<bool> touched_;
};

}  // namespace modnn::nn
