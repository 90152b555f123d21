#ifndef HBGNN_MODEL_HPP_
#define HBGNN_MODEL_HPP_

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "hbgnn/bigraph.hpp"
#include "hbgnn/data.hpp"
#include "hbgnn/error.hpp"
#include "hbgnn/params.hpp"
#include "hbgnn/tape.hpp"

namespace hbgnn {

/// Where the ID embeddings enter the hierarchy: alpha keeps them as
/// link-graph nodes, beta eliminates those nodes and injects the IDs at
/// the place graph.
enum class Variant { alpha, beta };

inline const char* variant_name(Variant v) { return v == Variant::alpha ? "alpha" : "beta"; }

inline Variant variant_from_name(const std::string& s) {
  if (s == "alpha") return Variant::alpha;
  if (s == "beta") return Variant::beta;
  throw ConfigError("unknown variant '" + s + "' (expected alpha or beta)");
}

/// Every dimension and switch of the model. Defaults are the paper's full
/// configuration; the interior head widths are a config choice.
struct ModelConfig {
  Variant variant = Variant::alpha;
  bool attention = false;
  bool baseline = false;  // the plain MLP reference model
  std::size_t link_dim = 512;
  std::size_t place_dim = 2048;
  std::size_t encoder_hidden = 4096;
  std::vector<std::size_t> mlp_widths = {2048, 1024, 512, 128, 1};
  std::size_t rounds_link = 1;
  std::size_t rounds_place = 1;
  std::uint64_t seed = 0;
};

/// The user age table has a fixed range of 100 so it transfers across
/// datasets; ages index it clamped.
inline constexpr std::size_t kAgeTableRows = 100;

inline void validate(const ModelConfig& cfg) {
  if (cfg.mlp_widths.size() != 5 || cfg.mlp_widths.back() != 1) {
    throw ConfigError("mlp_widths must list exactly 5 layers ending at width 1");
  }
  for (std::size_t w : cfg.mlp_widths) {
    if (w == 0) throw ConfigError("mlp_widths must be positive");
  }
  if (cfg.link_dim == 0 || cfg.place_dim == 0 || cfg.encoder_hidden == 0) {
    throw ConfigError("link_dim/place_dim/encoder_hidden must be positive");
  }
  if (cfg.rounds_link == 0 || cfg.rounds_place == 0) {
    throw ConfigError("message passing rounds must be >= 1");
  }
}

/// Link-graph node names per entity, in declared (concatenation) order.
inline std::vector<std::string> user_link_features(const ModelConfig& cfg) {
  if (cfg.variant == Variant::alpha) return {"user_id", "age", "occupation", "zip", "gender"};
  return {"age", "occupation", "zip", "gender"};
}

inline std::vector<std::string> item_link_features(const ModelConfig& cfg) {
  if (cfg.variant == Variant::alpha) return {"movie_id", "genre"};
  return {"genre"};
}

/// All features, used by the MLP baseline regardless of variant.
inline std::vector<std::string> all_features() {
  return {"user_id", "age", "occupation", "zip", "gender", "movie_id", "genre"};
}

namespace detail {

inline std::size_t feature_vocab_size(const std::string& feature, const Vocabularies& v) {
  if (feature == "user_id") return v.user_id.size();
  if (feature == "movie_id") return v.movie_id.size();
  if (feature == "age") return kAgeTableRows;
  if (feature == "occupation") return v.occupation.size();
  if (feature == "zip") return v.zip.size();
  if (feature == "gender") return v.gender.size();
  if (feature == "genre") return v.genre.size();
  throw ContractError("unknown feature '" + feature + "'");
}

template <typename S>
Var embed_feature(Tape<S>& tape, ParamSession<S>& sess, const std::string& feature,
                  const RatingExample& ex) {
  EmbeddingTable<S> table = sess.table("embed." + feature);
  if (feature == "user_id") return embed_lookup(tape, table, ex.user_idx);
  if (feature == "movie_id") return embed_lookup(tape, table, ex.movie_idx);
  if (feature == "age") {
    const std::size_t idx = std::size_t(std::clamp(ex.age, 0, int(kAgeTableRows) - 1));
    return embed_lookup(tape, table, idx);
  }
  if (feature == "occupation") return embed_lookup(tape, table, ex.occupation_idx);
  if (feature == "zip") return embed_lookup(tape, table, ex.zip_idx);
  if (feature == "gender") return embed_lookup(tape, table, ex.gender_idx);
  if (feature == "genre") return embed_lookup_sum(tape, table, ex.genre_idxs);
  throw ContractError("unknown feature '" + feature + "'");
}

template <typename S>
std::vector<Affine<S>> encoder_layers(ParamSession<S>& sess, const std::string& prefix) {
  return {sess.affine(prefix + ".l0"), sess.affine(prefix + ".l1")};
}

template <typename S>
std::vector<Affine<S>> head_layers(ParamSession<S>& sess) {
  std::vector<Affine<S>> layers;
  for (int i = 0; i < 5; ++i) layers.push_back(sess.affine("head.l" + std::to_string(i)));
  return layers;
}

}  // namespace detail

/// Create and seed every learnable tensor of the configured model. Two
/// builds with the same config and vocabularies are bit-identical: all
/// draws come from one generator in a fixed insertion order.
template <typename S>
ParameterSet<S> build(const ModelConfig& cfg, const Vocabularies& vocabs) {
  validate(cfg);
  Rng rng(cfg.seed);
  ParameterSet<S> ps;

  if (cfg.baseline) {
    for (const auto& f : all_features()) {
      add_embedding_params(ps, "embed." + f, detail::feature_vocab_size(f, vocabs), cfg.link_dim,
                           rng);
    }
    std::size_t in = all_features().size() * cfg.link_dim;
    for (std::size_t i = 0; i < cfg.mlp_widths.size(); ++i) {
      add_affine_params(ps, "head.l" + std::to_string(i), in, cfg.mlp_widths[i], rng);
      in = cfg.mlp_widths[i];
    }
    return ps;
  }

  const auto user_features = user_link_features(cfg);
  const auto item_features = item_link_features(cfg);
  for (const auto& f : user_features) {
    add_embedding_params(ps, "embed." + f, detail::feature_vocab_size(f, vocabs), cfg.link_dim,
                         rng);
  }
  for (const auto& f : item_features) {
    add_embedding_params(ps, "embed." + f, detail::feature_vocab_size(f, vocabs), cfg.link_dim,
                         rng);
  }

  add_gru_params(ps, "user_link.gru", cfg.link_dim, cfg.link_dim, rng);
  add_gru_params(ps, "item_link.gru", cfg.link_dim, cfg.link_dim, rng);

  if (cfg.attention) {
    add_affine_params(ps, "user_link.attn_key", cfg.link_dim, cfg.link_dim, rng);
    add_affine_params(ps, "user_link.attn_query", cfg.link_dim, cfg.link_dim, rng);
    add_affine_params(ps, "item_link.attn_key", cfg.link_dim, cfg.link_dim, rng);
    add_affine_params(ps, "item_link.attn_query", cfg.link_dim, cfg.link_dim, rng);
  }

  add_affine_params(ps, "user_encoder.l0", user_features.size() * cfg.link_dim,
                    cfg.encoder_hidden, rng);
  add_affine_params(ps, "user_encoder.l1", cfg.encoder_hidden, cfg.place_dim, rng);
  add_affine_params(ps, "item_encoder.l0", item_features.size() * cfg.link_dim,
                    cfg.encoder_hidden, rng);
  add_affine_params(ps, "item_encoder.l1", cfg.encoder_hidden, cfg.place_dim, rng);

  if (cfg.variant == Variant::beta) {
    add_embedding_params(ps, "embed.place_user_id", vocabs.user_id.size(), cfg.place_dim, rng);
    add_embedding_params(ps, "embed.place_movie_id", vocabs.movie_id.size(), cfg.place_dim, rng);
  }

  add_gru_params(ps, "place.gru", cfg.place_dim, cfg.place_dim, rng);

  std::size_t in = 2 * cfg.place_dim;
  for (std::size_t i = 0; i < cfg.mlp_widths.size(); ++i) {
    add_affine_params(ps, "head.l" + std::to_string(i), in, cfg.mlp_widths[i], rng);
    in = cfg.mlp_widths[i];
  }
  return ps;
}

/// Tape handles for the interesting intermediates of one forward pass.
struct ForwardTrace {
  Var user_place;  // post-message-passing N_u
  Var item_place;  // post-message-passing N_i
  Var prediction;  // scalar rating, unclamped
};

/// The full hierarchical forward pass on an existing tape:
/// feature embeddings -> link-graph message passing on both entities ->
/// encapsulation -> (beta: ID injection) -> place-graph rounds ->
/// rating head over both place states.
template <typename S>
ForwardTrace forward_on_tape(Tape<S>& tape, ParamSession<S>& sess, const ModelConfig& cfg,
                             const RatingExample& ex) {
  if (cfg.baseline) {
    std::vector<Var> embeds;
    for (const auto& f : all_features()) {
      embeds.push_back(detail::embed_feature(tape, sess, f, ex));
    }
    Var out = mlp_forward(tape, detail::head_layers(sess), tape.concat(embeds));
    return {Var{}, Var{}, out};
  }

  auto build_graph = [&](const std::vector<std::string>& features, const std::string& prefix) {
    std::vector<Var> embeds;
    embeds.reserve(features.size());
    for (const auto& f : features) embeds.push_back(detail::embed_feature(tape, sess, f, ex));
    std::optional<LinkAttention<S>> attn;
    if (cfg.attention) {
      attn = LinkAttention<S>{sess.affine(prefix + ".attn_key"), sess.affine(prefix + ".attn_query")};
    }
    return assign_embeddings(tape, features, embeds, sess.gru(prefix + ".gru"), attn);
  };

  LinkGraph<S> user_graph = build_graph(user_link_features(cfg), "user_link");
  LinkGraph<S> item_graph = build_graph(item_link_features(cfg), "item_link");
  for (std::size_t r = 0; r < cfg.rounds_link; ++r) {
    link_round(tape, user_graph);
    link_round(tape, item_graph);
  }

  Var n_user = encapsulate(tape, user_graph, detail::encoder_layers(sess, "user_encoder"));
  Var n_item = encapsulate(tape, item_graph, detail::encoder_layers(sess, "item_encoder"));

  if (cfg.variant == Variant::beta) {
    n_user = tape.add(n_user, embed_lookup(tape, sess.table("embed.place_user_id"), ex.user_idx));
    n_item = tape.add(n_item, embed_lookup(tape, sess.table("embed.place_movie_id"), ex.movie_idx));
  }

  PlaceGraph<S> pg{n_user, n_item, sess.gru("place.gru")};
  for (std::size_t r = 0; r < cfg.rounds_place; ++r) place_round(tape, pg);

  Var out = mlp_forward(tape, detail::head_layers(sess),
                        tape.concat({pg.user_state, pg.item_state}));
  return {pg.user_state, pg.item_state, out};
}

/// One prediction on a private tape. Pure: the same example yields the
/// identical value.
template <typename S>
S forward(const ParameterSet<S>& params, const ModelConfig& cfg, const RatingExample& ex) {
  Tape<S> tape;
  ParamSession<S> sess(tape, params, /*requires_grad=*/false);
  return tape.scalar_value(forward_on_tape(tape, sess, cfg, ex).prediction);
}

/// The reference model: all feature embeddings concatenated into the
/// 5-layer rating head, no graphs involved.
template <typename S>
S forward_mlp_baseline(const ParameterSet<S>& params, const ModelConfig& cfg,
                       const RatingExample& ex) {
  ModelConfig base = cfg;
  base.baseline = true;
  return forward(params, base, ex);
}

/// A complete model: configuration, the vocabularies it was built over,
/// and its parameters.
template <typename S>
struct Model {
  ModelConfig config;
  Vocabularies vocabs;
  ParameterSet<S> params;
};

template <typename S>
Model<S> build_model(const ModelConfig& cfg, const Vocabularies& vocabs) {
  return Model<S>{cfg, vocabs, build<S>(cfg, vocabs)};
}

}  // namespace hbgnn

#endif  // HBGNN_MODEL_HPP_
