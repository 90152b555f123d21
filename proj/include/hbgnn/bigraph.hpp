#ifndef HBGNN_BIGRAPH_HPP_
#define HBGNN_BIGRAPH_HPP_

#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "hbgnn/error.hpp"
#include "hbgnn/nn.hpp"
#include "hbgnn/tape.hpp"

namespace hbgnn {

/// Key/query projections for attention edge reweighing within a link graph.
template <typename S>
struct LinkAttention {
  Affine<S> key;
  Affine<S> query;
};

/// Fully connected feature graph of one entity. Topology is implicit:
/// every node is a neighbor of every other node, no self-loops. All nodes
/// share one GRU cell, and node states share one dimension.
template <typename S>
struct LinkGraph {
  std::vector<std::string> node_names;
  std::vector<Var> states;
  GruCell<S> cell;
  std::optional<LinkAttention<S>> attention;
};

/// Two entity nodes joined by a single bidirectional port, each updated by
/// the one shared GRU cell.
template <typename S>
struct PlaceGraph {
  Var user_state;
  Var item_state;
  GruCell<S> cell;
};

/// Per-node edge weights over that node's neighbors, in ascending neighbor
/// index order. With attention each vector is a softmax distribution; without
/// attention every weight is exactly 1.
struct EdgeWeights {
  std::vector<Var> per_node;
};

/// Assign feature embeddings as the initial node states of a complete graph.
template <typename S>
LinkGraph<S> assign_embeddings(Tape<S>& tape, const std::vector<std::string>& names,
                               const std::vector<Var>& embeddings, GruCell<S> cell,
                               std::optional<LinkAttention<S>> attention = std::nullopt) {
  if (names.empty() || names.size() != embeddings.size()) {
    throw ConstructionError("assign_embeddings: need one embedding per node name");
  }
  std::unordered_set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw ConstructionError("assign_embeddings: duplicate node '" + n + "'");
  }
  const std::size_t dim = tape.value(embeddings[0]).size();
  for (Var e : embeddings) {
    const Tensor<S>& t = tape.value(e);
    if (t.rank() != 1 || t.size() != dim) {
      throw ConstructionError("assign_embeddings: embedding " + t.shape_str() +
                              " does not match link dimension " + std::to_string(dim));
    }
  }
  LinkGraph<S> g;
  g.node_names = names;
  g.states = embeddings;
  g.cell = cell;
  g.attention = attention;
  return g;
}

/// Neighbor indices of node i: every other node, ascending.
template <typename S>
std::vector<std::size_t> neighbors(const LinkGraph<S>& g, std::size_t i) {
  std::vector<std::size_t> out;
  out.reserve(g.states.size() - 1);
  for (std::size_t j = 0; j < g.states.size(); ++j) {
    if (j != i) out.push_back(j);
  }
  return out;
}

/// Attention coefficients for one node: the hidden state is the key, each
/// incoming message the query; scores are key/query inner products after
/// linear projection, normalized by softmax.
template <typename S>
Var attention_coefficients(Tape<S>& tape, Var h, const std::vector<Var>& messages,
                           const Affine<S>& key_proj, const Affine<S>& query_proj) {
  if (messages.empty()) throw DomainError("attention_coefficients: no messages");
  Var key = affine_forward(tape, key_proj, h);
  std::vector<Var> scores;
  scores.reserve(messages.size());
  for (Var m : messages) {
    scores.push_back(tape.dot(key, affine_forward(tape, query_proj, m)));
  }
  return tape.softmax(tape.concat(scores));
}

/// One synchronous message-passing round over a link graph. Every node
/// aggregates its neighbors' time-t states (messages carry no per-message
/// transform), weighted by attention coefficients when attention is enabled
/// and by exactly 1 otherwise, and updates through the shared GRU cell.
/// All reads come from the pre-round snapshot, so visitation order cannot
/// leak into the result. Optionally reports the edge weights used.
template <typename S>
void link_round(Tape<S>& tape, LinkGraph<S>& g, EdgeWeights* weights_out = nullptr) {
  if (g.states.empty()) throw ConstructionError("link_round: graph has no nodes");
  const std::vector<Var> snapshot = g.states;
  const std::size_t dim = tape.value(snapshot[0]).size();
  std::vector<Var> updated(snapshot.size());
  if (weights_out) weights_out->per_node.clear();

  for (std::size_t i = 0; i < snapshot.size(); ++i) {
    std::vector<Var> messages;
    messages.reserve(snapshot.size() - 1);
    for (std::size_t j = 0; j < snapshot.size(); ++j) {
      if (j != i) messages.push_back(snapshot[j]);
    }
    Var aggregated;
    if (messages.empty()) {
      aggregated = tape.constant(Tensor<S>({dim}));
    } else {
      Var weights = g.attention.has_value()
                        ? attention_coefficients(tape, snapshot[i], messages,
                                                 g.attention->key, g.attention->query)
                        : tape.constant(Tensor<S>::full({messages.size()}, S(1)));
      if (weights_out) weights_out->per_node.push_back(weights);
      aggregated = tape.weighted_sum(messages, weights);
    }
    updated[i] = gru_step(tape, g.cell, aggregated, snapshot[i]);
  }
  g.states = std::move(updated);
}

/// Concatenate the node states in declared order and encapsulate them into
/// one place-graph state through the encoder stack.
template <typename S>
Var encapsulate(Tape<S>& tape, const LinkGraph<S>& g, const std::vector<Affine<S>>& encoder) {
  if (encoder.empty()) throw DimensionError("encapsulate: empty encoder");
  std::size_t width = 0;
  for (Var s : g.states) width += tape.value(s).size();
  if (encoder.front().in != width) {
    throw DimensionError("encapsulate: encoder expects width " +
                         std::to_string(encoder.front().in) + ", graph provides " +
                         std::to_string(width));
  }
  return mlp_forward(tape, encoder, tape.concat(g.states));
}

/// One synchronous exchange across the port: each node's aggregated message
/// is exactly the other's pre-update state.
template <typename S>
void place_round(Tape<S>& tape, PlaceGraph<S>& pg) {
  Var user_before = pg.user_state;
  Var item_before = pg.item_state;
  pg.user_state = gru_step(tape, pg.cell, item_before, user_before);
  pg.item_state = gru_step(tape, pg.cell, user_before, item_before);
}

}  // namespace hbgnn

#endif  // HBGNN_BIGRAPH_HPP_
