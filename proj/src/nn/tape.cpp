#include "modnn/nn/tape.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "modnn/error.hpp"

namespace modnn::nn {

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

double softplus_scalar(double x) {
  const double y = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return std::max(y, std::numeric_limits<double>::min());
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Tape::push(Op op, Matrix value, std::initializer_list<Var> parents, Index i0, double s) {
  Node n;
  n.op = op;
  n.i0 = i0;
  n.s = s;
  n.value = std::move(value);
  n.requires_grad = false;
  std::uint32_t* slots[3] = {&n.a, &n.b, &n.c};
  int k = 0;
  for (Var p : parents) {
    *slots[k++] = p.id;
    n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
  }
  if (op == Op::kLeaf) {
    n.requires_grad = true;
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) {
    throw ContractError("tape: invalid node handle");
  }
  return nodes_[v.id];
}

Var Tape::leaf(Matrix value) { return push(Op::kLeaf, std::move(value), {}); }

Var Tape::constant(Matrix value) { return push(Op::kConstant, std::move(value), {}); }

const Matrix& Tape::value(Var v) const { return node(v).value; }

double Tape::scalar_value(Var v) const {
  const Matrix& m = value(v);
  if (m.size() != 1) {
    throw ContractError("tape: expected a scalar node, got " + shape_str(m));
  }
  return m(0, 0);
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Var Tape::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.rows()) {
    throw ShapeError("matmul: " + shape_str(A) + " * " + shape_str(B));
  }
  return push(Op::kMatMul, A * B, {a, b});
}

Var Tape::affine(Var x, Var w, Var b) {
  const Matrix& X = value(x);
  const Matrix& W = value(w);
  const Matrix& B = value(b);
  if (X.cols() != W.rows() || B.rows() != 1 || B.cols() != W.cols()) {
    throw ShapeError("affine: x " + shape_str(X) + ", w " + shape_str(W) + ", b " + shape_str(B));
  }
  Matrix out = X * W;
  out.rowwise() += B.row(0);
  return push(Op::kAffine, std::move(out), {x, w, b});
}

Var Tape::add(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (B.rows() == 1 && A.rows() != 1 && B.cols() == A.cols()) {
    Matrix out = A;
    out.rowwise() += B.row(0);
    return push(Op::kAddRow, std::move(out), {a, b});
  }
  require_same_shape("add", A, B);
  return push(Op::kAdd, A + B, {a, b});
}

Var Tape::sub(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require_same_shape("sub", A, B);
  return push(Op::kSub, A - B, {a, b});
}

Var Tape::mul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require_same_shape("mul", A, B);
  return push(Op::kMul, A.cwiseProduct(B), {a, b});
}

Var Tape::scale(Var a, double s) { return push(Op::kScale, value(a) * s, {a}, 0, s); }

Var Tape::shift(Var a, double s) {
  return push(Op::kShift, (value(a).array() + s).matrix(), {a}, 0, s);
}

Var Tape::sigmoid(Var a) { return push(Op::kSigmoid, value(a).unaryExpr(&sigmoid_scalar), {a}); }

Var Tape::tanh(Var a) { return push(Op::kTanh, value(a).array().tanh().matrix(), {a}); }

Var Tape::softplus(Var a) {
  return push(Op::kSoftplus, value(a).unaryExpr(&softplus_scalar), {a});
}

Var Tape::square(Var a) { return push(Op::kSquare, value(a).array().square().matrix(), {a}); }

Var Tape::relu(Var a) { return push(Op::kRelu, value(a).cwiseMax(0.0), {a}); }

Var Tape::sum(Var a) { return push(Op::kSum, Matrix::Constant(1, 1, value(a).sum()), {a}); }

Var Tape::mean(Var a) {
  const Matrix& A = value(a);
  if (A.size() == 0) {
    throw ShapeError("mean: empty operand");
  }
  return push(Op::kMean, Matrix::Constant(1, 1, A.mean()), {a});
}

Var Tape::rows(Var a, Index start, Index count) {
  const Matrix& A = value(a);
  if (start < 0 || count < 0 || start + count > A.rows()) {
    throw ShapeError("rows: slice out of range of " + shape_str(A));
  }
  return push(Op::kRows, A.middleRows(start, count), {a}, start);
}

Var Tape::cols(Var a, Index start, Index count) {
  const Matrix& A = value(a);
  if (start < 0 || count < 0 || start + count > A.cols()) {
    throw ShapeError("cols: slice out of range of " + shape_str(A));
  }
  return push(Op::kCols, A.middleCols(start, count), {a}, start);
}

Var Tape::concat_cols(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.rows() != B.rows()) {
    throw ShapeError("concat_cols: " + shape_str(A) + " | " + shape_str(B));
  }
  Matrix out(A.rows(), A.cols() + B.cols());
  out << A, B;
  return push(Op::kConcatCols, std::move(out), {a, b});
}

Var Tape::concat_rows(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.cols()) {
    throw ShapeError("concat_rows: " + shape_str(A) + " / " + shape_str(B));
  }
  Matrix out(A.rows() + B.rows(), A.cols());
  out << A, B;
  return push(Op::kConcatRows, std::move(out), {a, b});
}

Var Tape::cumsum_rows(Var a) {
  Matrix out = value(a);
  for (Index i = 1; i < out.rows(); ++i) {
    out.row(i) += out.row(i - 1);
  }
  return push(Op::kCumsumRows, std::move(out), {a});
}

Var Tape::transpose(Var a) { return push(Op::kTranspose, value(a).transpose(), {a}); }

Matrix& Tape::adjoint(std::uint32_t id) {
  if (!touched_[id]) {
    adjoints_[id].setZero(nodes_[id].value.rows(), nodes_[id].value.cols());
    touched_[id] = true;
  }
  return adjoints_[id];
}

void Tape::backward(Var loss) {
  const Matrix& L = value(loss);
  if (L.rows() != 1 || L.cols() != 1) {
    throw ContractError("backward: loss node must be scalar, got " + shape_str(L));
  }
  backward(loss, Matrix::Ones(1, 1));
}

void Tape::backward(Var output, const Matrix& seed) {
  require_same_shape("backward seed", value(output), seed);
  adjoints_.resize(nodes_.size());
  touched_.assign(nodes_.size(), false);
  adjoint(output.id) = seed;
  sweep(output.id);
}

Matrix Tape::gradient(Var v) const {
  const Node& n = node(v);
  if (v.id < touched_.size() && touched_[v.id]) {
    return adjoints_[v.id];
  }
  return Matrix::Zero(n.value.rows(), n.value.cols());
}

void Tape::sweep(std::uint32_t from) {
  for (std::int64_t k = from; k >= 0; --k) {
    const auto id = static_cast<std::uint32_t>(k);
    if (!touched_[id]) {
      continue;
    }
    const Node& n = nodes_[id];
    if (!n.requires_grad) {
      continue;
    }
    // Parents always have smaller ids, so this reference is never written through.
    const Matrix& g = adjoints_[id];
    auto want = [&](std::uint32_t p) { return p != UINT32_MAX && nodes_[p].requires_grad; };
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConstant:
        break;
      case Op::kMatMul:
        if (want(n.a)) adjoint(n.a).noalias() += g * nodes_[n.b].value.transpose();
        if (want(n.b)) adjoint(n.b).noalias() += nodes_[n.a].value.transpose() * g;
        break;
      case Op::kAffine:
        if (want(n.a)) adjoint(n.a).noalias() += g * nodes_[n.b].value.transpose();
        if (want(n.b)) adjoint(n.b).noalias() += nodes_[n.a].value.transpose() * g;
        if (want(n.c)) adjoint(n.c) += g.colwise().sum();
        break;
      case Op::kAdd:
        if (want(n.a)) adjoint(n.a) += g;
        if (want(n.b)) adjoint(n.b) += g;
        break;
      case Op::kAddRow:
        if (want(n.a)) adjoint(n.a) += g;
        if (want(n.b)) adjoint(n.b) += g.colwise().sum();
        break;
      case Op::kSub:
        if (want(n.a)) adjoint(n.a) += g;
        if (want(n.b)) adjoint(n.b) -= g;
        break;
      case Op::kMul:
        if (want(n.a)) adjoint(n.a) += g.cwiseProduct(nodes_[n.b].value);
        if (want(n.b)) adjoint(n.b) += g.cwiseProduct(nodes_[n.a].value);
        break;
      case Op::kScale:
        if (want(n.a)) adjoint(n.a) += g * n.s;
        break;
      case Op::kShift:
        if (want(n.a)) adjoint(n.a) += g;
        break;
      case Op::kSigmoid:
        if (want(n.a)) {
          adjoint(n.a).array() += g.array() * n.value.array() * (1.0 - n.value.array());
        }
        break;
      case Op::kTanh:
        if (want(n.a)) adjoint(n.a).array() += g.array() * (1.0 - n.value.array().square());
        break;
      case Op::kSoftplus:
        if (want(n.a)) {
          adjoint(n.a).array() += g.array() * nodes_[n.a].value.unaryExpr(&sigmoid_scalar).array();
        }
        break;
      case Op::kSquare:
        if (want(n.a)) adjoint(n.a).array() += 2.0 * g.array() * nodes_[n.a].value.array();
        break;
      case Op::kRelu:
        if (want(n.a)) {
          adjoint(n.a).array() +=
              g.array() * (nodes_[n.a].value.array() > 0.0).cast<double>();
        }
        break;
      case Op::kSum:
        if (want(n.a)) adjoint(n.a).array() += g(0, 0);
        break;
      case Op::kMean:
        if (want(n.a)) {
          adjoint(n.a).array() += g(0, 0) / static_cast<double>(nodes_[n.a].value.size());
        }
        break;
      case Op::kRows:
        if (want(n.a)) adjoint(n.a).middleRows(n.i0, g.rows()) += g;
        break;
      case Op::kCols:
        if (want(n.a)) adjoint(n.a).middleCols(n.i0, g.cols()) += g;
        break;
      case Op::kConcatCols: {
        const Index ca = nodes_[n.a].value.cols();
        if (want(n.a)) adjoint(n.a) += g.leftCols(ca);
        if (want(n.b)) adjoint(n.b) += g.rightCols(g.cols() - ca);
        break;
      }
      case Op::kConcatRows: {
        const Index ra = nodes_[n.a].value.rows();
        if (want(n.a)) adjoint(n.a) += g.topRows(ra);
        if (want(n.b)) adjoint(n.b) += g.bottomRows(g.rows() - ra);
        break;
      }
      case Op::kCumsumRows:
        if (want(n.a)) {
          Matrix r = g;
          for (Index i = r.rows() - 2; i >= 0; --i) {
            r.row(i) += r.row(i + 1);
          }
          adjoint(n.a) += r;
        }
        break;
      case Op::kTranspose:
        if (want(n.a)) adjoint(n.a) += g.transpose();
        break;
    }
  }
}

}  // namespace modnn::nn
