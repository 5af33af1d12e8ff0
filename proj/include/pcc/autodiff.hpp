#pragma once

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pcc/matrix.hpp"

namespace pcc {

// Handle into a Tape. Only meaningful together with the tape that issued it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

namespace detail {
inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}
}  // namespace detail

// Reverse-mode tape over dense float64 matrices. Each op appends a node
// holding its forward value; gradients() walks the nodes once in reverse.
// The op set is exactly what the losses and the encoder need, nothing more.
//
// Nodes are append-only and inputs always precede outputs, so replay()
// can re-run the forward pass in id order after a leaf has been changed.
// That is what the finite-difference checks use to evaluate f(x + h).
class Tape {
 public:
  Var leaf(const Matrix& value) {
    detail::require(all_finite(value), "leaf: non-finite entries");
    return push(Op::kLeaf, -1, -1, 0.0, value);
  }

  // Same as a leaf, but by convention excluded from gradient reads.
  // Masks and fixed projections enter the graph through here.
  Var constant(const Matrix& value) {
    detail::require(all_finite(value), "constant: non-finite entries");
    return push(Op::kConstant, -1, -1, 0.0, value);
  }

  Var add(Var a, Var b) {
    detail::require(same_shape(val(a), val(b)), "add: shape mismatch");
    return push(Op::kAdd, a.id, b.id, 0.0, pcc::add(val(a), val(b)));
  }

  Var sub(Var a, Var b) {
    detail::require(same_shape(val(a), val(b)), "sub: shape mismatch");
    return push(Op::kSub, a.id, b.id, 0.0, pcc::sub(val(a), val(b)));
  }

  Var hadamard(Var a, Var b) {
    detail::require(same_shape(val(a), val(b)), "hadamard: shape mismatch");
    return push(Op::kHadamard, a.id, b.id, 0.0, pcc::hadamard(val(a), val(b)));
  }

  Var matmul(Var a, Var b) {
    detail::require(val(a).cols() == val(b).rows(), "matmul: inner dims");
    return push(Op::kMatMul, a.id, b.id, 0.0, pcc::matmul(val(a), val(b)));
  }

  Var transpose(Var a) {
    return push(Op::kTranspose, a.id, -1, 0.0, pcc::transpose(val(a)));
  }

  Var relu(Var a) {
    Matrix out = val(a);
    for (int i = 0; i < out.rows(); ++i)
      for (int j = 0; j < out.cols(); ++j)
        if (out(i, j) < 0.0) out(i, j) = 0.0;
    return push(Op::kRelu, a.id, -1, 0.0, out);
  }

  Var tanh(Var a) {
    Matrix out = val(a);
    for (int i = 0; i < out.rows(); ++i)
      for (int j = 0; j < out.cols(); ++j) out(i, j) = std::tanh(out(i, j));
    return push(Op::kTanh, a.id, -1, 0.0, out);
  }

  Var scalar_mul(Var a, double c) {
    return push(Op::kScalarMul, a.id, -1, c, scale(val(a), c));
  }

  Var scalar_add(Var a, double c) {
    Matrix out = val(a);
    for (int i = 0; i < out.rows(); ++i)
      for (int j = 0; j < out.cols(); ++j) out(i, j) += c;
    return push(Op::kScalarAdd, a.id, -1, c, out);
  }

  // Total of all entries as a 1x1 matrix.
  Var sum_all(Var a) {
    Matrix out(1, 1);
    out(0, 0) = pcc::sum_all(val(a));
    return push(Op::kSumAll, a.id, -1, 0.0, out);
  }

  Var row_softmax(Var a, double temperature) {
    detail::require(temperature > 0.0, "row_softmax: temperature must be > 0");
    detail::require(all_finite(val(a)), "row_softmax: non-finite entries");
    return push(Op::kRowSoftmax, a.id, -1, temperature,
                pcc::row_softmax(val(a), temperature));
  }

  // For square A, column vector v with v[a] = max over b != a of A[a, b].
  // Ties resolve to the smallest b; the subgradient is routed there.
  Var row_max_excluding_diagonal(Var a) {
    const Matrix& x = val(a);
    detail::require(x.rows() == x.cols() && x.rows() >= 2,
                    "row_max_excluding_diagonal: need square, >= 2 rows");
    Matrix out(x.rows(), 1);
    std::vector<int> arg(static_cast<std::size_t>(x.rows()), -1);
    for (int r = 0; r < x.rows(); ++r) {
      double best = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < x.cols(); ++c) {
        if (c == r) continue;
        if (x(r, c) > best) {
          best = x(r, c);
          arg[static_cast<std::size_t>(r)] = c;
        }
      }
      out(r, 0) = best;
    }
    Var v = push(Op::kRowMaxOffDiag, a.id, -1, 0.0, out);
    nodes_[static_cast<std::size_t>(v.id)].argmax = std::move(arg);
    return v;
  }

  // Diagonal of a square matrix as a column vector.
  Var diagonal(Var a) {
    const Matrix& x = val(a);
    assert(x.rows() == x.cols());
    Matrix out(x.rows(), 1);
    for (int r = 0; r < x.rows(); ++r) out(r, 0) = x(r, r);
    return push(Op::kDiagonal, a.id, -1, 0.0, out);
  }

  // Each row scaled to unit Euclidean length. The tiny epsilon under the
  // root keeps the op smooth at the origin without measurably moving
  // any row of ordinary magnitude.
  Var row_l2_normalize(Var a) {
    const Matrix& x = val(a);
    Matrix out(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r) {
      double s = kNormEps;
      for (int c = 0; c < x.cols(); ++c) s += x(r, c) * x(r, c);
      const double n = std::sqrt(s);
      for (int c = 0; c < x.cols(); ++c) out(r, c) = x(r, c) / n;
    }
    return push(Op::kRowNormalize, a.id, -1, 0.0, out);
  }

  // a (m x n) plus a row vector (1 x n) broadcast over rows.
  Var add_rowvec(Var a, Var row) {
    const Matrix& x = val(a);
    const Matrix& b = val(row);
    assert(b.rows() == 1 && b.cols() == x.cols());
    Matrix out = x;
    for (int r = 0; r < out.rows(); ++r)
      for (int c = 0; c < out.cols(); ++c) out(r, c) += b(0, c);
    return push(Op::kAddRowVec, a.id, row.id, 0.0, out);
  }

  const Matrix& value(Var v) const { return val(v); }

  int size() const { return static_cast<int>(nodes_.size()); }

  // Adjoint of every node with respect to a 1x1 output, indexed by node id.
  // Nodes the output does not depend on get zero matrices of their shape.
  std::vector<Matrix> gradients(Var output) const {
    const Matrix& ov = val(output);
    detail::require(ov.rows() == 1 && ov.cols() == 1,
                    "gradients: output must be 1x1");
    std::vector<Matrix> adj(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      adj[i] = Matrix(nodes_[i].value.rows(), nodes_[i].value.cols());
    adj[static_cast<std::size_t>(output.id)](0, 0) = 1.0;

    for (int id = output.id; id >= 0; --id) {
      const Node& n = nodes_[static_cast<std::size_t>(id)];
      const Matrix& g = adj[static_cast<std::size_t>(id)];
      switch (n.op) {
        case Op::kLeaf:
        case Op::kConstant:
          break;
        case Op::kAdd:
          accumulate(adj, n.a, g);
          accumulate(adj, n.b, g);
          break;
        case Op::kSub:
          accumulate(adj, n.a, g);
          accumulate(adj, n.b, scale(g, -1.0));
          break;
        case Op::kHadamard:
          accumulate(adj, n.a, pcc::hadamard(g, node_value(n.b)));
          accumulate(adj, n.b, pcc::hadamard(g, node_value(n.a)));
          break;
        case Op::kMatMul:
          accumulate(adj, n.a, pcc::matmul(g, pcc::transpose(node_value(n.b))));
          accumulate(adj, n.b, pcc::matmul(pcc::transpose(node_value(n.a)), g));
          break;
        case Op::kTranspose:
          accumulate(adj, n.a, pcc::transpose(g));
          break;
        case Op::kRelu: {
          const Matrix& x = node_value(n.a);
          Matrix d(g.rows(), g.cols());
          for (int r = 0; r < g.rows(); ++r)
            for (int c = 0; c < g.cols(); ++c)
              d(r, c) = x(r, c) > 0.0 ? g(r, c) : 0.0;
          accumulate(adj, n.a, d);
          break;
        }
        case Op::kTanh: {
          const Matrix& y = n.value;
          Matrix d(g.rows(), g.cols());
          for (int r = 0; r < g.rows(); ++r)
            for (int c = 0; c < g.cols(); ++c)
              d(r, c) = g(r, c) * (1.0 - y(r, c) * y(r, c));
          accumulate(adj, n.a, d);
          break;
        }
        case Op::kScalarMul:
          accumulate(adj, n.a, scale(g, n.scalar));
          break;
        case Op::kScalarAdd:
          accumulate(adj, n.a, g);
          break;
        case Op::kSumAll: {
          const Matrix& x = node_value(n.a);
          accumulate(adj, n.a, Matrix(x.rows(), x.cols(), g(0, 0)));
          break;
        }
        case Op::kRowSoftmax: {
          // d s[r, .] = t * y[r, .] * (g[r, .] - <g[r, .], y[r, .]>)
          const Matrix& y = n.value;
          Matrix d(g.rows(), g.cols());
          for (int r = 0; r < g.rows(); ++r) {
            double dot = 0.0;
            for (int c = 0; c < g.cols(); ++c) dot += g(r, c) * y(r, c);
            for (int c = 0; c < g.cols(); ++c)
              d(r, c) = n.scalar * y(r, c) * (g(r, c) - dot);
          }
          accumulate(adj, n.a, d);
          break;
        }
        case Op::kRowMaxOffDiag: {
          const Matrix& x = node_value(n.a);
          Matrix d(x.rows(), x.cols());
          for (int r = 0; r < x.rows(); ++r)
            d(r, n.argmax[static_cast<std::size_t>(r)]) += g(r, 0);
          accumulate(adj, n.a, d);
          break;
        }
        case Op::kDiagonal: {
          const Matrix& x = node_value(n.a);
          Matrix d(x.rows(), x.cols());
          for (int r = 0; r < x.rows(); ++r) d(r, r) = g(r, 0);
          accumulate(adj, n.a, d);
          break;
        }
        case Op::kRowNormalize: {
          // d x[r, .] = (g[r, .] - <g[r, .], y[r, .]> y[r, .]) / n_r
          const Matrix& x = node_value(n.a);
          const Matrix& y = n.value;
          Matrix d(g.rows(), g.cols());
          for (int r = 0; r < g.rows(); ++r) {
            double s = kNormEps;
            for (int c = 0; c < g.cols(); ++c) s += x(r, c) * x(r, c);
            const double nr = std::sqrt(s);
            double dot = 0.0;
            for (int c = 0; c < g.cols(); ++c) dot += g(r, c) * y(r, c);
            for (int c = 0; c < g.cols(); ++c)
              d(r, c) = (g(r, c) - dot * y(r, c)) / nr;
          }
          accumulate(adj, n.a, d);
          break;
        }
        case Op::kAddRowVec: {
          accumulate(adj, n.a, g);
          Matrix d(1, g.cols());
          for (int r = 0; r < g.rows(); ++r)
            for (int c = 0; c < g.cols(); ++c) d(0, c) += g(r, c);
          accumulate(adj, n.b, d);
          break;
        }
      }
    }
    return adj;
  }

  // Overwrite a leaf (or constant) value in place. Shapes must match;
  // downstream nodes are stale until replay().
  void set_value(Var v, const Matrix& value) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    assert(n.op == Op::kLeaf || n.op == Op::kConstant);
    assert(same_shape(n.value, value));
    n.value = value;
  }

  // Recompute every non-leaf node in id order from current inputs.
  void replay() {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      Node& n = nodes_[i];
      const int a = n.a, b = n.b;
      switch (n.op) {
        case Op::kLeaf:
        case Op::kConstant:
          break;
        case Op::kAdd:
          n.value = pcc::add(node_value(a), node_value(b));
          break;
        case Op::kSub:
          n.value = pcc::sub(node_value(a), node_value(b));
          break;
        case Op::kHadamard:
          n.value = pcc::hadamard(node_value(a), node_value(b));
          break;
        case Op::kMatMul:
          n.value = pcc::matmul(node_value(a), node_value(b));
          break;
        case Op::kTranspose:
          n.value = pcc::transpose(node_value(a));
          break;
        case Op::kRelu: {
          n.value = node_value(a);
          for (int r = 0; r < n.value.rows(); ++r)
            for (int c = 0; c < n.value.cols(); ++c)
              if (n.value(r, c) < 0.0) n.value(r, c) = 0.0;
          break;
        }
        case Op::kTanh: {
          n.value = node_value(a);
          for (int r = 0; r < n.value.rows(); ++r)
            for (int c = 0; c < n.value.cols(); ++c)
              n.value(r, c) = std::tanh(n.value(r, c));
          break;
        }
        case Op::kScalarMul:
          n.value = scale(node_value(a), n.scalar);
          break;
        case Op::kScalarAdd: {
          n.value = node_value(a);
          for (int r = 0; r < n.value.rows(); ++r)
            for (int c = 0; c < n.value.cols(); ++c) n.value(r, c) += n.scalar;
          break;
        }
        case Op::kSumAll:
          n.value = Matrix(1, 1);
          n.value(0, 0) = pcc::sum_all(node_value(a));
          break;
        case Op::kRowSoftmax:
          n.value = pcc::row_softmax(node_value(a), n.scalar);
          break;
        case Op::kRowMaxOffDiag: {
          const Matrix& x = node_value(a);
          n.value = Matrix(x.rows(), 1);
          for (int r = 0; r < x.rows(); ++r) {
            double best = -std::numeric_limits<double>::infinity();
            int argb = -1;
            for (int c = 0; c < x.cols(); ++c) {
              if (c == r) continue;
              if (x(r, c) > best) {
                best = x(r, c);
                argb = c;
              }
            }
            n.value(r, 0) = best;
            n.argmax[static_cast<std::size_t>(r)] = argb;
          }
          break;
        }
        case Op::kDiagonal: {
          const Matrix& x = node_value(a);
          n.value = Matrix(x.rows(), 1);
          for (int r = 0; r < x.rows(); ++r) n.value(r, 0) = x(r, r);
          break;
        }
        case Op::kRowNormalize: {
          const Matrix& x = node_value(a);
          n.value = Matrix(x.rows(), x.cols());
          for (int r = 0; r < x.rows(); ++r) {
            double s = kNormEps;
            for (int c = 0; c < x.cols(); ++c) s += x(r, c) * x(r, c);
            const double nr = std::sqrt(s);
            for (int c = 0; c < x.cols(); ++c) n.value(r, c) = x(r, c) / nr;
          }
          break;
        }
        case Op::kAddRowVec: {
          const Matrix& x = node_value(a);
          const Matrix& rv = node_value(b);
          n.value = x;
          for (int r = 0; r < n.value.rows(); ++r)
            for (int c = 0; c < n.value.cols(); ++c)
              n.value(r, c) += rv(0, c);
          break;
        }
      }
    }
  }

  // Shared with code that mirrors row_l2_normalize without a tape.
  static constexpr double kNormEps = 1e-30;

 private:
  enum class Op {
    kLeaf,
    kConstant,
    kAdd,
    kSub,
    kHadamard,
    kMatMul,
    kTranspose,
    kRelu,
    kTanh,
    kScalarMul,
    kScalarAdd,
    kSumAll,
    kRowSoftmax,
    kRowMaxOffDiag,
    kDiagonal,
    kRowNormalize,
    kAddRowVec,
  };

  struct Node {
    Op op;
    int a, b;
    double scalar;
    Matrix value;
    std::vector<int> argmax;  // kRowMaxOffDiag only
  };

  Var push(Op op, int a, int b, double scalar, Matrix value) {
    nodes_.push_back(Node{op, a, b, scalar, std::move(value), {}});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  const Matrix& val(Var v) const {
    assert(v.valid() && v.id < size());
    return nodes_[static_cast<std::size_t>(v.id)].value;
  }

  const Matrix& node_value(int id) const {
    return nodes_[static_cast<std::size_t>(id)].value;
  }

  static void accumulate(std::vector<Matrix>& adj, int id, const Matrix& g) {
    Matrix& a = adj[static_cast<std::size_t>(id)];
    for (int r = 0; r < a.rows(); ++r)
      for (int c = 0; c < a.cols(); ++c) a(r, c) += g(r, c);
  }

  std::vector<Node> nodes_;
};

// Gradients of one scalar output, keyed by the handles the tape issued.
// Holds an entry for every node; leaves are the ones callers read.
class GradientTable {
 public:
  explicit GradientTable(std::vector<Matrix> adjoints)
      : adjoints_(std::move(adjoints)) {}

  const Matrix& at(Var v) const {
    return adjoints_.at(static_cast<std::size_t>(v.id));
  }

 private:
  std::vector<Matrix> adjoints_;
};

inline GradientTable backward(const Tape& tape, Var scalar_output) {
  return GradientTable(tape.gradients(scalar_output));
}

// Expression handle pairing a tape with a node, so formulas compose
// without threading the tape through every call site.
struct DiffMatrix {
  Tape* tape = nullptr;
  Var v;

  const Matrix& value() const { return tape->value(v); }
};

inline DiffMatrix operator+(DiffMatrix a, DiffMatrix b) {
  return {a.tape, a.tape->add(a.v, b.v)};
}
inline DiffMatrix operator-(DiffMatrix a, DiffMatrix b) {
  return {a.tape, a.tape->sub(a.v, b.v)};
}
inline DiffMatrix operator*(double c, DiffMatrix a) {
  return {a.tape, a.tape->scalar_mul(a.v, c)};
}
inline DiffMatrix matmul(DiffMatrix a, DiffMatrix b) {
  return {a.tape, a.tape->matmul(a.v, b.v)};
}
inline DiffMatrix hadamard(DiffMatrix a, DiffMatrix b) {
  return {a.tape, a.tape->hadamard(a.v, b.v)};
}
inline DiffMatrix transpose(DiffMatrix a) {
  return {a.tape, a.tape->transpose(a.v)};
}
inline DiffMatrix relu(DiffMatrix a) { return {a.tape, a.tape->relu(a.v)}; }
inline DiffMatrix tanh(DiffMatrix a) { return {a.tape, a.tape->tanh(a.v)}; }
inline DiffMatrix scalar_add(DiffMatrix a, double c) {
  return {a.tape, a.tape->scalar_add(a.v, c)};
}
inline DiffMatrix sum_all(DiffMatrix a) {
  return {a.tape, a.tape->sum_all(a.v)};
}
inline DiffMatrix row_softmax(DiffMatrix a, double temperature) {
  return {a.tape, a.tape->row_softmax(a.v, temperature)};
}
inline DiffMatrix row_max_excluding_diagonal(DiffMatrix a) {
  return {a.tape, a.tape->row_max_excluding_diagonal(a.v)};
}
inline DiffMatrix diagonal(DiffMatrix a) {
  return {a.tape, a.tape->diagonal(a.v)};
}
inline DiffMatrix row_l2_normalize(DiffMatrix a) {
  return {a.tape, a.tape->row_l2_normalize(a.v)};
}
inline DiffMatrix add_rowvec(DiffMatrix a, DiffMatrix row) {
  return {a.tape, a.tape->add_rowvec(a.v, row.v)};
}

}  // namespace pcc
