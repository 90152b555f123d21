#ifndef HBGNN_NN_HPP_
#define HBGNN_NN_HPP_

#include <string>
#include <vector>

#include "hbgnn/error.hpp"
#include "hbgnn/tape.hpp"

namespace hbgnn {

/// Affine layer y = W.x + b, with W leased on a tape as [out x in].
template <typename S>
struct Affine {
  Var weight;
  Var bias;
  std::size_t in = 0;
  std::size_t out = 0;
};

/// Gated recurrent unit cell. Six gate matrices plus three biases, all
/// leased on one tape. Input and hidden widths are fixed at construction.
template <typename S>
struct GruCell {
  Var w_z, w_r, w_h;  // input-to-gate, [hidden x input]
  Var u_z, u_r, u_h;  // hidden-to-gate, [hidden x hidden]
  Var b_z, b_r, b_h;  // gate biases, [hidden]
  std::size_t input = 0;
  std::size_t hidden = 0;
};

/// Learnable embedding rows [vocab x dim]; lookups must stay in range.
template <typename S>
struct EmbeddingTable {
  std::string name;
  Var rows;
  std::size_t vocab = 0;
  std::size_t dim = 0;
};

template <typename S>
Var affine_forward(Tape<S>& tape, const Affine<S>& layer, Var x) {
  const Tensor<S>& tx = tape.value(x);
  if (tx.rank() != 1 || tx.size() != layer.in) {
    throw DimensionError("affine_forward: input " + tx.shape_str() + " does not match width " +
                         std::to_string(layer.in));
  }
  return tape.add(tape.matvec(layer.weight, x), layer.bias);
}

/// One GRU update:
///   z = sigmoid(W_z.x + U_z.h + b_z)
///   r = sigmoid(W_r.x + U_r.h + b_r)
///   hc = tanh(W_h.x + U_h.(r*h) + b_h)
///   h' = (1 - z)*h + z*hc
template <typename S>
Var gru_step(Tape<S>& tape, const GruCell<S>& cell, Var x, Var h) {
  const Tensor<S>& tx = tape.value(x);
  const Tensor<S>& th = tape.value(h);
  if (tx.rank() != 1 || tx.size() != cell.input || th.rank() != 1 || th.size() != cell.hidden) {
    throw DimensionError("gru_step: input " + tx.shape_str() + " / hidden " + th.shape_str() +
                         " do not match cell dims " + std::to_string(cell.input) + "/" +
                         std::to_string(cell.hidden));
  }
  Var z = tape.sigmoid(tape.add(tape.add(tape.matvec(cell.w_z, x), tape.matvec(cell.u_z, h)), cell.b_z));
  Var r = tape.sigmoid(tape.add(tape.add(tape.matvec(cell.w_r, x), tape.matvec(cell.u_r, h)), cell.b_r));
  Var gated = tape.hadamard(r, h);
  Var hc = tape.tanh(tape.add(tape.add(tape.matvec(cell.w_h, x), tape.matvec(cell.u_h, gated)), cell.b_h));
  Var ones = tape.constant(Tensor<S>::full({cell.hidden}, S(1)));
  return tape.add(tape.hadamard(tape.sub(ones, z), h), tape.hadamard(z, hc));
}

template <typename S>
Var embed_lookup(Tape<S>& tape, const EmbeddingTable<S>& table, std::size_t index) {
  if (index >= table.vocab) {
    throw VocabularyError("embedding table '" + table.name + "': index " + std::to_string(index) +
                          " outside vocabulary of size " + std::to_string(table.vocab));
  }
  return tape.lookup(table.rows, index);
}

/// Multi-hot feature: the sum of the active rows. Callers pass indices in
/// canonical (ascending) order so the reduction is order-stable.
template <typename S>
Var embed_lookup_sum(Tape<S>& tape, const EmbeddingTable<S>& table,
                     const std::vector<std::size_t>& indices) {
  for (std::size_t i : indices) {
    if (i >= table.vocab) {
      throw VocabularyError("embedding table '" + table.name + "': index " + std::to_string(i) +
                            " outside vocabulary of size " + std::to_string(table.vocab));
    }
  }
  return tape.lookup_sum(table.rows, indices);
}

/// Affine stack with a leaky rectifier between layers and none after the
/// last. Consecutive widths must chain.
template <typename S>
Var mlp_forward(Tape<S>& tape, const std::vector<Affine<S>>& layers, Var x, S slope = S(0.01)) {
  if (layers.empty()) throw DimensionError("mlp_forward: no layers");
  Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (tape.value(h).size() != layers[i].in) {
      throw DimensionError("mlp_forward: layer " + std::to_string(i) + " expects width " +
                           std::to_string(layers[i].in) + ", got " +
                           tape.value(h).shape_str());
    }
    h = affine_forward(tape, layers[i], h);
    if (i + 1 < layers.size()) h = tape.leaky_relu(h, slope);
  }
  return h;
}

}  // namespace hbgnn

#endif  // HBGNN_NN_HPP_
