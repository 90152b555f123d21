#ifndef HBGNN_PARAMS_HPP_
#define HBGNN_PARAMS_HPP_

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hbgnn/error.hpp"
#include "hbgnn/nn.hpp"
#include "hbgnn/rng.hpp"
#include "hbgnn/tape.hpp"
#include "hbgnn/tensor.hpp"

namespace hbgnn {

/// Ordered registry of every learnable tensor under a stable name.
/// Iteration order is insertion order, which is fixed by the builder, so
/// two builds from the same seed are bit-identical and optimizer sweeps
/// are deterministic.
template <typename S>
class ParameterSet {
 public:
  void add(std::string name, Tensor<S> tensor) {
    if (index_.count(name)) throw ConstructionError("parameter '" + name + "' already exists");
    tensor.requires_grad = true;
    index_.emplace(name, items_.size());
    items_.emplace_back(std::move(name), std::move(tensor));
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Tensor<S>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
    return items_[it->second].second;
  }

  const Tensor<S>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
    return items_[it->second].second;
  }

  std::size_t size() const { return items_.size(); }

  const std::vector<std::pair<std::string, Tensor<S>>>& items() const { return items_; }
  std::vector<std::pair<std::string, Tensor<S>>>& items() { return items_; }

 private:
  std::vector<std::pair<std::string, Tensor<S>>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---- builders ----

template <typename S>
void add_affine_params(ParameterSet<S>& ps, const std::string& prefix, std::size_t in,
                       std::size_t out, Rng& rng) {
  ps.add(prefix + ".weight", kaiming_uniform<S>(in, {out, in}, rng));
  ps.add(prefix + ".bias", Tensor<S>({out}));
}

template <typename S>
void add_gru_params(ParameterSet<S>& ps, const std::string& prefix, std::size_t input,
                    std::size_t hidden, Rng& rng) {
  for (const char* gate : {"W_z", "W_r", "W_h"}) {
    ps.add(prefix + "." + gate, kaiming_uniform<S>(input, {hidden, input}, rng));
  }
  for (const char* gate : {"U_z", "U_r", "U_h"}) {
    ps.add(prefix + "." + gate, kaiming_uniform<S>(hidden, {hidden, hidden}, rng));
  }
  for (const char* gate : {"b_z", "b_r", "b_h"}) {
    ps.add(prefix + "." + gate, Tensor<S>({hidden}));
  }
}

template <typename S>
void add_embedding_params(ParameterSet<S>& ps, const std::string& name, std::size_t vocab,
                          std::size_t dim, Rng& rng) {
  if (vocab == 0) throw ConstructionError("embedding '" + name + "': empty vocabulary");
  ps.add(name, kaiming_uniform<S>(dim, {vocab, dim}, rng));
}

/// Leases ParameterSet tensors onto a tape as named gradient leaves, one
/// leaf per parameter per tape, and assembles the layer views the model
/// layers operate on.
template <typename S>
class ParamSession {
 public:
  ParamSession(Tape<S>& tape, const ParameterSet<S>& params, bool requires_grad = true)
      : tape_(tape), params_(params), requires_grad_(requires_grad) {}

  Var operator()(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    Var v = tape_.leaf(params_.at(name), requires_grad_, name);
    cache_.emplace(name, v);
    return v;
  }

  Affine<S> affine(const std::string& prefix) {
    Affine<S> layer;
    layer.weight = (*this)(prefix + ".weight");
    layer.bias = (*this)(prefix + ".bias");
    const Tensor<S>& w = tape_.value(layer.weight);
    layer.out = w.rows();
    layer.in = w.cols();
    return layer;
  }

  GruCell<S> gru(const std::string& prefix) {
    GruCell<S> cell;
    cell.w_z = (*this)(prefix + ".W_z");
    cell.w_r = (*this)(prefix + ".W_r");
    cell.w_h = (*this)(prefix + ".W_h");
    cell.u_z = (*this)(prefix + ".U_z");
    cell.u_r = (*this)(prefix + ".U_r");
    cell.u_h = (*this)(prefix + ".U_h");
    cell.b_z = (*this)(prefix + ".b_z");
    cell.b_r = (*this)(prefix + ".b_r");
    cell.b_h = (*this)(prefix + ".b_h");
    const Tensor<S>& w = tape_.value(cell.w_z);
    cell.hidden = w.rows();
    cell.input = w.cols();
    return cell;
  }

  EmbeddingTable<S> table(const std::string& name) {
    EmbeddingTable<S> t;
    t.name = name;
    t.rows = (*this)(name);
    const Tensor<S>& v = tape_.value(t.rows);
    t.vocab = v.rows();
    t.dim = v.cols();
    return t;
  }

 private:
  Tape<S>& tape_;
  const ParameterSet<S>& params_;
  bool requires_grad_;
  std::unordered_map<std::string, Var> cache_;
};

}  // namespace hbgnn

#endif  // HBGNN_PARAMS_HPP_
