#ifndef HBGNN_TRAIN_HPP_
#define HBGNN_TRAIN_HPP_

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "hbgnn/checkpoint.hpp"
#include "hbgnn/data.hpp"
#include "hbgnn/error.hpp"
#include "hbgnn/model.hpp"
#include "hbgnn/optim.hpp"

namespace hbgnn {

struct TrainRunConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 256;
  std::uint64_t shuffle_seed = 0;
  AmsgradConfig optimizer;
  std::size_t eval_every = 1;  // test RMSE cadence, in epochs
};

/// Per-epoch record: train RMSE is the running average of batch RMSEs,
/// test RMSE is over the full test split (NaN on epochs the cadence skips).
struct EpochStats {
  double train_rmse = std::numeric_limits<double>::quiet_NaN();
  double test_rmse = std::numeric_limits<double>::quiet_NaN();
};

struct History {
  std::vector<EpochStats> epochs;
};

namespace detail {

template <typename S>
std::string format_real(S v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// RMSE of unclamped predictions over an index set. Read-only on the model;
/// accumulation order is the index order, so results are bit-stable.
template <typename S>
double evaluate(const Model<S>& model, const Dataset& ds, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw DomainError("evaluate: empty index set");
  double acc = 0;
  for (std::size_t i : indices) {
    const RatingExample& ex = ds.examples[i];
    const double d = double(forward(model.params, model.config, ex)) - ex.rating;
    acc += d * d;
  }
  return std::sqrt(acc / double(indices.size()));
}

/// Mini-batch training with AMSGrad on the batch RMSE objective. Each epoch
/// shuffles the train indices with the run's seeded generator, so a fixed
/// seed reproduces the history bit for bit. batch_size must be >= 1;
/// epochs may be 0, which performs no optimizer step.
template <typename S>
History train(Model<S>& model, const Dataset& ds, const Split& split, const TrainRunConfig& cfg) {
  if (cfg.batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (!(model.vocabs == ds.vocabs)) {
    throw ContractError("train: model and dataset vocabularies disagree");
  }
  AmsgradState<S> opt(model.params, cfg.optimizer);
  History history;
  Rng shuffle_rng(cfg.shuffle_seed);
  std::vector<std::size_t> order = split.train;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double batch_rmse_sum = 0;
    std::size_t batches = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      Tape<S> tape;
      ParamSession<S> sess(tape, model.params);
      std::vector<Var> preds;
      preds.reserve(end - start);
      Tensor<S> targets({end - start});
      for (std::size_t b = start; b < end; ++b) {
        const RatingExample& ex = ds.examples[order[b]];
        preds.push_back(forward_on_tape(tape, sess, model.config, ex).prediction);
        targets.data[b - start] = S(ex.rating);
      }
      Var loss = tape.rmse(tape.concat(preds), tape.constant(std::move(targets)));
      batch_rmse_sum += double(tape.scalar_value(loss));
      ++batches;
      GradientMap<S> grads = tape.backward(loss);
      opt.step(model.params, grads);
    }

    EpochStats stats;
    if (batches > 0) stats.train_rmse = batch_rmse_sum / double(batches);
    const bool eval_now = !split.test.empty() &&
                          (cfg.eval_every == 0 ? false
                                               : ((epoch + 1) % cfg.eval_every == 0 ||
                                                  epoch + 1 == cfg.epochs));
    if (eval_now) stats.test_rmse = evaluate(model, ds, split.test);
    history.epochs.push_back(stats);
  }
  return history;
}

/// The transfer protocol: the user-ID, movie-ID and zip embedding tables
/// are rebuilt at the target's vocabulary sizes with fresh Kaiming draws
/// from `seed`; every other tensor is copied from the checkpoint bit for
/// bit. Optimizer state does not transfer.
inline Model<float> transfer(const Checkpoint& ckpt, const Dataset& target, std::uint64_t seed) {
  if (!(target.vocabs.genre == Vocabulary("genre", canonical_genres()))) {
    throw ContractError("transfer: target dataset lacks the canonical genre vocabulary");
  }
  ModelConfig cfg = ckpt.config;
  cfg.seed = seed;
  Model<float> model = build_model<float>(cfg, target.vocabs);

  auto reinitialized = [](const std::string& name) {
    return name == "embed.user_id" || name == "embed.movie_id" || name == "embed.zip" ||
           name == "embed.place_user_id" || name == "embed.place_movie_id";
  };

  std::string mismatches;
  for (auto& [name, tensor] : model.params.items()) {
    if (reinitialized(name)) continue;
    const Tensor<float>& src = ckpt.params.at(name);
    if (!src.same_shape(tensor)) {
      mismatches += (mismatches.empty() ? "" : ", ") + name + " " + src.shape_str() + " vs " +
                    tensor.shape_str();
      continue;
    }
    tensor.data = src.data;
  }
  if (!mismatches.empty()) {
    throw ContractError("transfer: tensor shapes disagree between checkpoint and target: " +
                        mismatches);
  }
  return model;
}

/// Write the post-message-passing user place state (and the prediction)
/// for each requested example as one tab-separated row. Deterministic:
/// two exports of the same model and examples are byte-identical.
template <typename S>
void export_embeddings(const Model<S>& model, const Dataset& ds,
                       const std::vector<std::size_t>& indices,
                       const std::filesystem::path& path) {
  if (model.config.baseline) {
    throw ContractError("export_embeddings: the MLP baseline has no place states");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());

  out << "user_id\tmovie_id\tprediction";
  for (std::size_t j = 0; j < model.config.place_dim; ++j) out << "\tn_u_" << j;
  out << "\n";

  for (std::size_t i : indices) {
    const RatingExample& ex = ds.examples[i];
    Tape<S> tape;
    ParamSession<S> sess(tape, model.params, /*requires_grad=*/false);
    ForwardTrace trace = forward_on_tape(tape, sess, model.config, ex);
    out << ex.user_id << '\t' << ex.movie_id << '\t'
        << detail::format_real(tape.scalar_value(trace.prediction));
    const Tensor<S>& nu = tape.value(trace.user_place);
    for (std::size_t j = 0; j < nu.size(); ++j) out << '\t' << detail::format_real(nu.data[j]);
    out << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

/// History file: one "epoch<TAB>train_rmse<TAB>test_rmse" row per epoch.
inline void save_history(const History& h, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch\ttrain_rmse\ttest_rmse\n";
  for (std::size_t i = 0; i < h.epochs.size(); ++i) {
    out << (i + 1) << '\t' << detail::format_real(h.epochs[i].train_rmse) << '\t'
        << detail::format_real(h.epochs[i].test_rmse) << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace hbgnn

#endif  // HBGNN_TRAIN_HPP_
