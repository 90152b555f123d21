#ifndef HBGNN_TAPE_HPP_
#define HBGNN_TAPE_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hbgnn/error.hpp"
#include "hbgnn/tensor.hpp"

namespace hbgnn {

/// Handle to a value recorded on a Tape.
struct Var {
  std::int32_t index = -1;
  bool valid() const { return index >= 0; }
};

template <typename S>
using GradientMap = std::unordered_map<std::string, Tensor<S>>;

/// Reverse-mode tape over dense tensors. Operations execute eagerly and
/// record enough to run one backward sweep. Construction order is the
/// topological order: every operation's inputs precede it, and backward
/// visits each recorded operation exactly once, accumulating gradients in
/// a fixed left-to-right order so results are bit-reproducible.
///
/// A tape is single-writer: one forward + backward sequence at a time.
template <typename S>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- leaves ----

  /// Record a leaf value. Named leaves with requires_grad show up in the
  /// gradient map returned by backward().
  Var leaf(Tensor<S> value, bool requires_grad = false, std::string name = {}) {
    Node n;
    n.op = Op::kLeaf;
    n.requires_grad = requires_grad;
    n.value = std::move(value);
    n.name = std::move(name);
    return push(std::move(n));
  }

  Var constant(Tensor<S> value) { return leaf(std::move(value), false); }

  // ---- operations ----

  /// Matrix product [m x k] . [k x n] -> [m x n].
  Var matmul(Var a, Var b) {
    const Tensor<S>& ta = value(a);
    const Tensor<S>& tb = value(b);
    if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows()) {
      throw DimensionError("matmul: incompatible shapes " + ta.shape_str() + " and " +
                           tb.shape_str());
    }
    const std::size_t m = ta.rows(), k = ta.cols(), n = tb.cols();
    Tensor<S> out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        S acc = 0;
        for (std::size_t p = 0; p < k; ++p) acc += ta.at(i, p) * tb.at(p, j);
        out.at(i, j) = acc;
      }
    }
    return push_binary(Op::kMatMul, a, b, std::move(out));
  }

  /// Matrix-vector product [m x k] . [k] -> [m].
  Var matvec(Var w, Var x) {
    const Tensor<S>& tw = value(w);
    const Tensor<S>& tx = value(x);
    if (tw.rank() != 2 || tx.rank() != 1 || tw.cols() != tx.size()) {
      throw DimensionError("matvec: incompatible shapes " + tw.shape_str() + " and " +
                           tx.shape_str());
    }
    const std::size_t m = tw.rows(), k = tw.cols();
    Tensor<S> out({m});
    const S* wd = tw.data.data();
    const S* xd = tx.data.data();
    for (std::size_t i = 0; i < m; ++i) {
      S acc = 0;
      const S* row = wd + i * k;
      for (std::size_t p = 0; p < k; ++p) acc += row[p] * xd[p];
      out.data[i] = acc;
    }
    return push_binary(Op::kMatVec, w, x, std::move(out));
  }

  Var add(Var a, Var b) { return elementwise_binary(Op::kAdd, a, b); }
  Var sub(Var a, Var b) { return elementwise_binary(Op::kSub, a, b); }
  Var hadamard(Var a, Var b) { return elementwise_binary(Op::kMul, a, b); }

  Var sigmoid(Var x) {
    Tensor<S> out = value(x);
    for (auto& v : out.data) v = stable_sigmoid(v);
    return push_unary(Op::kSigmoid, x, std::move(out));
  }

  Var tanh(Var x) {
    Tensor<S> out = value(x);
    for (auto& v : out.data) v = std::tanh(v);
    return push_unary(Op::kTanh, x, std::move(out));
  }

  /// Leaky rectifier; negative inputs are scaled by `slope`.
  Var leaky_relu(Var x, S slope = S(0.01)) {
    Tensor<S> out = value(x);
    for (auto& v : out.data) v = v > S(0) ? v : slope * v;
    Var r = push_unary(Op::kLeakyRelu, x, std::move(out));
    nodes_[r.index].scalar_aux = slope;
    return r;
  }

  /// Numerically stable softmax over a vector (max subtraction).
  Var softmax(Var x) {
    const Tensor<S>& tx = value(x);
    if (tx.rank() != 1 || tx.size() == 0) {
      throw DomainError("softmax: requires a non-empty vector, got " + tx.shape_str());
    }
    S mx = tx.data[0];
    for (S v : tx.data) mx = v > mx ? v : mx;
    Tensor<S> out({tx.size()});
    S total = 0;
    for (std::size_t i = 0; i < tx.size(); ++i) {
      out.data[i] = std::exp(tx.data[i] - mx);
      total += out.data[i];
    }
    for (auto& v : out.data) v /= total;
    return push_unary(Op::kSoftmax, x, std::move(out));
  }

  /// Concatenation of vectors, in argument order.
  Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw DomainError("concat: no operands");
    std::size_t total = 0;
    for (Var p : parts) {
      const Tensor<S>& t = value(p);
      if (t.rank() != 1) throw DimensionError("concat: operands must be vectors, got " + t.shape_str());
      total += t.size();
    }
    Tensor<S> out({total});
    std::size_t off = 0;
    for (Var p : parts) {
      const Tensor<S>& t = value(p);
      for (std::size_t i = 0; i < t.size(); ++i) out.data[off + i] = t.data[i];
      off += t.size();
    }
    Node n;
    n.op = Op::kConcat;
    n.rest = indices(parts);
    n.requires_grad = any_requires_grad(parts);
    n.value = std::move(out);
    return push(std::move(n));
  }

  /// Sum of all elements -> scalar.
  Var sum(Var x) {
    const Tensor<S>& tx = value(x);
    S acc = 0;
    for (S v : tx.data) acc += v;
    return push_unary(Op::kSum, x, Tensor<S>::scalar(acc));
  }

  /// Multiply by a compile-time constant.
  Var scale(Var x, S c) {
    Tensor<S> out = value(x);
    for (auto& v : out.data) v *= c;
    Var r = push_unary(Op::kScale, x, std::move(out));
    nodes_[r.index].scalar_aux = c;
    return r;
  }

  /// Inner product of two vectors -> scalar.
  Var dot(Var a, Var b) {
    const Tensor<S>& ta = value(a);
    const Tensor<S>& tb = value(b);
    if (ta.rank() != 1 || !ta.same_shape(tb)) {
      throw DimensionError("dot: incompatible shapes " + ta.shape_str() + " and " + tb.shape_str());
    }
    S acc = 0;
    for (std::size_t i = 0; i < ta.size(); ++i) acc += ta.data[i] * tb.data[i];
    return push_binary(Op::kDot, a, b, Tensor<S>::scalar(acc));
  }

  /// Row of a matrix -> vector. Backward scatters only into that row.
  Var lookup(Var table, std::size_t row) {
    const Tensor<S>& tt = value(table);
    if (tt.rank() != 2) throw DimensionError("lookup: table must be 2-D, got " + tt.shape_str());
    if (row >= tt.rows()) {
      throw DimensionError("lookup: row " + std::to_string(row) + " out of range for " +
                           tt.shape_str());
    }
    Tensor<S> out({tt.cols()});
    for (std::size_t j = 0; j < tt.cols(); ++j) out.data[j] = tt.at(row, j);
    Var r = push_unary(Op::kLookup, table, std::move(out));
    nodes_[r.index].rows = {row};
    return r;
  }

  /// Sum of several rows of a matrix, in the order given.
  Var lookup_sum(Var table, const std::vector<std::size_t>& rows) {
    const Tensor<S>& tt = value(table);
    if (tt.rank() != 2) throw DimensionError("lookup_sum: table must be 2-D, got " + tt.shape_str());
    if (rows.empty()) throw DomainError("lookup_sum: no rows requested");
    Tensor<S> out({tt.cols()});
    for (std::size_t r : rows) {
      if (r >= tt.rows()) {
        throw DimensionError("lookup_sum: row " + std::to_string(r) + " out of range for " +
                             tt.shape_str());
      }
      for (std::size_t j = 0; j < tt.cols(); ++j) out.data[j] += tt.at(r, j);
    }
    Var v = push_unary(Op::kLookupSum, table, std::move(out));
    nodes_[v.index].rows = rows;
    return v;
  }

  /// Weighted sum of equally shaped vectors: out = sum_j weights[j] * vecs[j].
  /// Terms accumulate in argument order.
  Var weighted_sum(const std::vector<Var>& vecs, Var weights) {
    if (vecs.empty()) throw DomainError("weighted_sum: no operands");
    const Tensor<S>& tw = value(weights);
    if (tw.rank() != 1 || tw.size() != vecs.size()) {
      throw DimensionError("weighted_sum: weight shape " + tw.shape_str() + " does not cover " +
                           std::to_string(vecs.size()) + " operands");
    }
    const Tensor<S>& first = value(vecs[0]);
    Tensor<S> out({first.size()});
    for (std::size_t j = 0; j < vecs.size(); ++j) {
      const Tensor<S>& tv = value(vecs[j]);
      if (tv.rank() != 1 || !tv.same_shape(first)) {
        throw DimensionError("weighted_sum: operand shape " + tv.shape_str() +
                             " differs from " + first.shape_str());
      }
      const S w = tw.data[j];
      for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += w * tv.data[i];
    }
    Node n;
    n.op = Op::kWeightedSum;
    n.a = weights.index;
    n.rest = indices(vecs);
    n.requires_grad = node(weights).requires_grad || any_requires_grad(vecs);
    n.value = std::move(out);
    return push(std::move(n));
  }

  /// Root mean squared error between predictions and constant targets.
  /// At exactly zero error the gradient is defined as zero.
  Var rmse(Var predictions, Var targets) {
    const Tensor<S>& tp = value(predictions);
    const Tensor<S>& tt = value(targets);
    if (tp.size() == 0) throw DomainError("rmse: empty prediction vector");
    if (tp.rank() != 1 || !tp.same_shape(tt)) {
      throw DimensionError("rmse: prediction shape " + tp.shape_str() + " vs target shape " +
                           tt.shape_str());
    }
    S acc = 0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
      const S d = tp.data[i] - tt.data[i];
      acc += d * d;
    }
    const S out = std::sqrt(acc / S(tp.size()));
    return push_binary(Op::kRmse, predictions, targets, Tensor<S>::scalar(out));
  }

  // ---- access ----

  const Tensor<S>& value(Var v) const { return node(v).value; }

  S scalar_value(Var v) const {
    const Tensor<S>& t = value(v);
    if (t.size() != 1) throw ContractError("scalar_value: tensor " + t.shape_str() + " is not scalar");
    return t.data[0];
  }

  /// Gradient of the backward root w.r.t. this node; valid after backward().
  const Tensor<S>& grad(Var v) const {
    if (!backward_done_) throw ContractError("grad: backward has not run on this tape");
    return node(v).grad;
  }

  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a scalar root. Returns the gradient for every named
  /// requires_grad leaf; leaves the root does not reach keep zero gradients.
  /// A tape records one forward pass and supports exactly one backward pass;
  /// running it twice without re-recording is a contract error.
  GradientMap<S> backward(Var root) {
    if (backward_done_) throw ContractError("backward: tape already swept; re-record first");
    const Tensor<S>& rv = value(root);
    if (rv.size() != 1) {
      throw ContractError("backward: root must be scalar, got " + rv.shape_str());
    }
    for (Node& n : nodes_) {
      n.grad = Tensor<S>(n.value.shape);
    }
    nodes_[root.index].grad.data[0] = S(1);

    for (std::int32_t i = root.index; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.op == Op::kLeaf) continue;
      propagate(n);
    }

    GradientMap<S> grads;
    for (Node& n : nodes_) {
      if (n.op == Op::kLeaf && n.requires_grad && !n.name.empty()) {
        grads.emplace(n.name, n.grad);
      }
    }
    backward_done_ = true;
    return grads;
  }

  /// Drop every recorded node so the tape can record a fresh pass.
  void reset() {
    nodes_.clear();
    backward_done_ = false;
  }

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kMatMul,
    kMatVec,
    kAdd,
    kSub,
    kMul,
    kSigmoid,
    kTanh,
    kLeakyRelu,
    kSoftmax,
    kConcat,
    kSum,
    kScale,
    kDot,
    kLookup,
    kLookupSum,
    kWeightedSum,
    kRmse,
  };

  struct Node {
    Op op = Op::kLeaf;
    bool requires_grad = false;
    std::int32_t a = -1;
    std::int32_t b = -1;
    std::vector<std::int32_t> rest;      // concat / weighted_sum operands
    std::vector<std::size_t> rows;       // lookup / lookup_sum rows
    S scalar_aux = 0;                    // leaky slope / scale constant
    Tensor<S> value;
    Tensor<S> grad;
    std::string name;
  };

  static S stable_sigmoid(S x) {
    if (x >= S(0)) {
      const S e = std::exp(-x);
      return S(1) / (S(1) + e);
    }
    const S e = std::exp(x);
    return e / (S(1) + e);
  }

  const Node& node(Var v) const {
    if (!v.valid() || std::size_t(v.index) >= nodes_.size()) {
      throw ContractError("tape: invalid variable handle");
    }
    return nodes_[v.index];
  }

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{std::int32_t(nodes_.size() - 1)};
  }

  Var push_unary(Op op, Var x, Tensor<S> out) {
    Node n;
    n.op = op;
    n.a = x.index;
    n.requires_grad = node(x).requires_grad;
    n.value = std::move(out);
    return push(std::move(n));
  }

  Var push_binary(Op op, Var a, Var b, Tensor<S> out) {
    Node n;
    n.op = op;
    n.a = a.index;
    n.b = b.index;
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    n.value = std::move(out);
    return push(std::move(n));
  }

  Var elementwise_binary(Op op, Var a, Var b) {
    const Tensor<S>& ta = value(a);
    const Tensor<S>& tb = value(b);
    if (!ta.same_shape(tb)) {
      throw DimensionError("elementwise: shape " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Tensor<S> out(ta.shape);
    switch (op) {
      case Op::kAdd:
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = ta.data[i] + tb.data[i];
        break;
      case Op::kSub:
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = ta.data[i] - tb.data[i];
        break;
      case Op::kMul:
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = ta.data[i] * tb.data[i];
        break;
      default:
        throw ContractError("elementwise: bad op");
    }
    return push_binary(op, a, b, std::move(out));
  }

  std::vector<std::int32_t> indices(const std::vector<Var>& vs) const {
    std::vector<std::int32_t> out;
    out.reserve(vs.size());
    for (Var v : vs) {
      node(v);  // bounds check
      out.push_back(v.index);
    }
    return out;
  }

  bool any_requires_grad(const std::vector<Var>& vs) const {
    for (Var v : vs) {
      if (node(v).requires_grad) return true;
    }
    return false;
  }

  void propagate(Node& n) {
    const Tensor<S>& g = n.grad;
    switch (n.op) {
      case Op::kMatMul: {
        Node& na = nodes_[n.a];
        Node& nb = nodes_[n.b];
        const std::size_t m = na.value.rows(), k = na.value.cols(), c = nb.value.cols();
        if (na.requires_grad) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              S acc = 0;
              for (std::size_t j = 0; j < c; ++j) acc += g.at(i, j) * nb.value.at(p, j);
              na.grad.at(i, p) += acc;
            }
        }
        if (nb.requires_grad) {
          for (std::size_t p = 0; p < k; ++p)
            for (std::size_t j = 0; j < c; ++j) {
              S acc = 0;
              for (std::size_t i = 0; i < m; ++i) acc += na.value.at(i, p) * g.at(i, j);
              nb.grad.at(p, j) += acc;
            }
        }
        break;
      }
      case Op::kMatVec: {
        Node& nw = nodes_[n.a];
        Node& nx = nodes_[n.b];
        const std::size_t m = nw.value.rows(), k = nw.value.cols();
        if (nw.requires_grad) {
          for (std::size_t i = 0; i < m; ++i) {
            const S gi = g.data[i];
            S* row = nw.grad.data.data() + i * k;
            const S* xd = nx.value.data.data();
            for (std::size_t p = 0; p < k; ++p) row[p] += gi * xd[p];
          }
        }
        if (nx.requires_grad) {
          for (std::size_t i = 0; i < m; ++i) {
            const S gi = g.data[i];
            const S* row = nw.value.data.data() + i * k;
            S* xg = nx.grad.data.data();
            for (std::size_t p = 0; p < k; ++p) xg[p] += gi * row[p];
          }
        }
        break;
      }
      case Op::kAdd: {
        accumulate(n.a, g, S(1));
        accumulate(n.b, g, S(1));
        break;
      }
      case Op::kSub: {
        accumulate(n.a, g, S(1));
        accumulate(n.b, g, S(-1));
        break;
      }
      case Op::kMul: {
        Node& na = nodes_[n.a];
        Node& nb = nodes_[n.b];
        if (na.requires_grad)
          for (std::size_t i = 0; i < g.size(); ++i) na.grad.data[i] += g.data[i] * nb.value.data[i];
        if (nb.requires_grad)
          for (std::size_t i = 0; i < g.size(); ++i) nb.grad.data[i] += g.data[i] * na.value.data[i];
        break;
      }
      case Op::kSigmoid: {
        Node& nx = nodes_[n.a];
        if (nx.requires_grad)
          for (std::size_t i = 0; i < g.size(); ++i) {
            const S y = n.value.data[i];
            nx.grad.data[i] += g.data[i] * y * (S(1) - y);
          }
        break;
      }
      case Op::kTanh: {
        Node& nx = nodes_[n.a];
        if (nx.requires_grad)
          for (std::size_t i = 0; i < g.size(); ++i) {
            const S y = n.value.data[i];
            nx.grad.data[i] += g.data[i] * (S(1) - y * y);
          }
        break;
      }
      case Op::kLeakyRelu: {
        Node& nx = nodes_[n.a];
        if (nx.requires_grad)
          for (std::size_t i = 0; i < g.size(); ++i) {
            const S x = nx.value.data[i];
            nx.grad.data[i] += g.data[i] * (x > S(0) ? S(1) : n.scalar_aux);
          }
        break;
      }
      case Op::kSoftmax: {
        Node& nx = nodes_[n.a];
        if (nx.requires_grad) {
          S inner = 0;
          for (std::size_t i = 0; i < g.size(); ++i) inner += g.data[i] * n.value.data[i];
          for (std::size_t i = 0; i < g.size(); ++i) {
            nx.grad.data[i] += n.value.data[i] * (g.data[i] - inner);
          }
        }
        break;
      }
      case Op::kConcat: {
        std::size_t off = 0;
        for (std::int32_t idx : n.rest) {
          Node& np = nodes_[idx];
          if (np.requires_grad) {
            for (std::size_t i = 0; i < np.value.size(); ++i) np.grad.data[i] += g.data[off + i];
          }
          off += np.value.size();
        }
        break;
      }
      case Op::kSum: {
        accumulate_broadcast(n.a, g.data[0]);
        break;
      }
      case Op::kScale: {
        accumulate(n.a, g, n.scalar_aux);
        break;
      }
      case Op::kDot: {
        Node& na = nodes_[n.a];
        Node& nb = nodes_[n.b];
        const S g0 = g.data[0];
        if (na.requires_grad)
          for (std::size_t i = 0; i < na.value.size(); ++i) na.grad.data[i] += g0 * nb.value.data[i];
        if (nb.requires_grad)
          for (std::size_t i = 0; i < nb.value.size(); ++i) nb.grad.data[i] += g0 * na.value.data[i];
        break;
      }
      case Op::kLookup:
      case Op::kLookupSum: {
        Node& nt = nodes_[n.a];
        if (nt.requires_grad) {
          const std::size_t dim = nt.value.cols();
          for (std::size_t r : n.rows) {
            S* row = nt.grad.data.data() + r * dim;
            for (std::size_t j = 0; j < dim; ++j) row[j] += g.data[j];
          }
        }
        break;
      }
      case Op::kWeightedSum: {
        Node& nw = nodes_[n.a];
        for (std::size_t j = 0; j < n.rest.size(); ++j) {
          Node& nv = nodes_[n.rest[j]];
          const S w = nw.value.data[j];
          if (nv.requires_grad) {
            for (std::size_t i = 0; i < g.size(); ++i) nv.grad.data[i] += w * g.data[i];
          }
          if (nw.requires_grad) {
            S acc = 0;
            for (std::size_t i = 0; i < g.size(); ++i) acc += g.data[i] * nv.value.data[i];
            nw.grad.data[j] += acc;
          }
        }
        break;
      }
      case Op::kRmse: {
        Node& np = nodes_[n.a];
        Node& nt = nodes_[n.b];
        const S y = n.value.data[0];
        const S g0 = g.data[0];
        if (y > S(0)) {
          const S denom = S(np.value.size()) * y;
          if (np.requires_grad) {
            for (std::size_t i = 0; i < np.value.size(); ++i) {
              np.grad.data[i] += g0 * (np.value.data[i] - nt.value.data[i]) / denom;
            }
          }
          if (nt.requires_grad) {
            for (std::size_t i = 0; i < nt.value.size(); ++i) {
              nt.grad.data[i] -= g0 * (np.value.data[i] - nt.value.data[i]) / denom;
            }
          }
        }
        break;
      }
      case Op::kLeaf:
        break;
    }
  }

  void accumulate(std::int32_t idx, const Tensor<S>& g, S factor) {
    Node& n = nodes_[idx];
    if (!n.requires_grad) return;
    for (std::size_t i = 0; i < g.size(); ++i) n.grad.data[i] += factor * g.data[i];
  }

  void accumulate_broadcast(std::int32_t idx, S g0) {
    Node& n = nodes_[idx];
    if (!n.requires_grad) return;
    for (auto& v : n.grad.data) v += g0;
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace hbgnn

#endif  // HBGNN_TAPE_HPP_
