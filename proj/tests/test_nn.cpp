#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hbgnn/nn.hpp"
#include "hbgnn/params.hpp"
#include "support/oracles.hpp"

using namespace hbgnn;

namespace {

Tensor<double> random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                             double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

/// GRU parameters as plain double vectors for the independent oracle.
oracle::GruWeights to_oracle(const ParameterSet<double>& ps, const std::string& prefix,
                             std::size_t input, std::size_t hidden) {
  oracle::GruWeights g;
  g.input = input;
  g.hidden = hidden;
  g.wz = ps.at(prefix + ".W_z").data;
  g.wr = ps.at(prefix + ".W_r").data;
  g.wh = ps.at(prefix + ".W_h").data;
  g.uz = ps.at(prefix + ".U_z").data;
  g.ur = ps.at(prefix + ".U_r").data;
  g.uh = ps.at(prefix + ".U_h").data;
  g.bz = ps.at(prefix + ".b_z").data;
  g.br = ps.at(prefix + ".b_r").data;
  g.bh = ps.at(prefix + ".b_h").data;
  return g;
}

}  // namespace

TEST(AffineForward, IdentityWeightZeroBias) {
  ParameterSet<double> ps;
  ps.add("l.weight", Tensor<double>({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  ps.add("l.bias", Tensor<double>({3}));
  Tape<double> tape;
  ParamSession<double> sess(tape, ps);
  Var x = tape.constant(Tensor<double>({3}, {2.5, -1.0, 7.0}));
  Var y = affine_forward(tape, sess.affine("l"), x);
  EXPECT_EQ(tape.value(y).data, (std::vector<double>{2.5, -1.0, 7.0}));
}

TEST(AffineForward, ZeroInputYieldsBias) {
  Rng rng(21);
  ParameterSet<double> ps;
  add_affine_params(ps, "l", 4, 2, rng);
  ps.at("l.bias").data = {0.25, -0.5};
  Tape<double> tape;
  ParamSession<double> sess(tape, ps);
  Var y = affine_forward(tape, sess.affine("l"), tape.constant(Tensor<double>({4})));
  EXPECT_EQ(tape.value(y).data, (std::vector<double>{0.25, -0.5}));
}

TEST(AffineForward, RandomCaseMatchesScalarOracle) {
  Rng rng(22);
  ParameterSet<double> ps;
  add_affine_params(ps, "l", 2, 3, rng);
  Tensor<double> x = random_tensor({2}, rng);
  Tape<double> tape;
  ParamSession<double> sess(tape, ps);
  Var y = affine_forward(tape, sess.affine("l"), tape.constant(x));
  const auto expect = oracle::matvec(ps.at("l.weight").data, 3, 2, x.data);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(tape.value(y).data[i], expect[i] + ps.at("l.bias").data[i], 1e-12);
  }
}

TEST(AffineForward, DimensionMismatch) {
  Rng rng(23);
  ParameterSet<double> ps;
  add_affine_params(ps, "l", 4, 2, rng);
  Tape<double> tape;
  ParamSession<double> sess(tape, ps);
  EXPECT_THROW(affine_forward(tape, sess.affine("l"), tape.constant(Tensor<double>({3}))),
               DimensionError);
}

TEST(GruStep, AllZeroEverything) {
  ParameterSet<double> ps;
  Rng rng(31);
  add_gru_params(ps, "g", 2, 2, rng);
  for (auto& [name, t] : ps.items()) {
    for (auto& v : t.data) v = 0;
  }
  Tape<double> tape;
  ParamSession<double> sess(tape, ps);
  Var h = gru_step(tape, sess.gru("g"), tape.constant(Tensor<double>({2})),
                   tape.constant(Tensor<double>({2})));
  EXPECT_EQ(tape.value(h).data, (std::vector<double>{0, 0}));
}

TEST(GruStep, SaturatedClosedUpdateGateFreezesState) {
  Rng rng(32);
  ParameterSet<double> ps;
  add_gru_params(ps, "g", 3, 3, rng);
  for (auto& v : ps.at("g.b_z").data) v = -1e6;
  Tensor<double> h0 = random_tensor({3}, rng);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor<double> x = random_tensor({3}, rng, -10, 10);
    Tape<double> tape;
    ParamSession<double> sess(tape, ps);
    Var h1 = gru_step(tape, sess.gru("g"), tape.constant(x), tape.constant(h0));
    EXPECT_EQ(tape.value(h1).data, h0.data);
  }
}

TEST(GruStep, SaturatedOpenUpdateGateReturnsCandidate) {
  Rng rng(33);
  ParameterSet<double> ps;
  add_gru_params(ps, "g", 3, 3, rng);
  for (auto& v : ps.at("g.b_z").data) v = 1e6;
  Tensor<double> x = random_tensor({3}, rng);
  Tensor<double> h0 = random_tensor({3}, rng);
  Tape<double> tape;
  ParamSession<double> sess(tape, ps);
  Var h1 = gru_step(tape, sess.gru("g"), tape.constant(x), tape.constant(h0));
  // With z == 1 the oracle's output is exactly the candidate state.
  const auto expect = oracle::gru_reference(to_oracle(ps, "g", 3, 3), x.data, h0.data);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(tape.value(h1).data[i], expect[i], 1e-12);
}

TEST(GruStep, RandomInstanceMatchesScalarOracle) {
  Rng rng(34);
  for (int trial = 0; trial < 10; ++trial) {
    ParameterSet<double> ps;
    add_gru_params(ps, "g", 3, 3, rng);
    Tensor<double> x = random_tensor({3}, rng, -2, 2);
    Tensor<double> h0 = random_tensor({3}, rng, -2, 2);
    Tape<double> tape;
    ParamSession<double> sess(tape, ps);
    Var h1 = gru_step(tape, sess.gru("g"), tape.constant(x), tape.constant(h0));
    const auto expect = oracle::gru_reference(to_oracle(ps, "g", 3, 3), x.data, h0.data);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(tape.value(h1).data[i], expect[i], 1e-12);
  }
}

TEST(GruStep, DimensionMismatch) {
  Rng rng(35);
  ParameterSet<double> ps;
  add_gru_params(ps, "g", 3, 2, rng);
  Tape<double> tape;
  ParamSession<double> sess(tape, ps);
  EXPECT_THROW(gru_step(tape, sess.gru("g"), tape.constant(Tensor<double>({2})),
                        tape.constant(Tensor<double>({2}))),
               DimensionError);
  EXPECT_THROW(gru_step(tape, sess.gru("g"), tape.constant(Tensor<double>({3})),
                        tape.constant(Tensor<double>({3}))),
               DimensionError);
}

TEST(GruStep, ParameterGradientsMatchFiniteDifferences) {
  Rng rng(36);
  ParameterSet<double> ps;
  add_gru_params(ps, "g", 2, 2, rng);
  const Tensor<double> x = random_tensor({2}, rng);
  const Tensor<double> h0 = random_tensor({2}, rng);

  Tape<double> tape;
  ParamSession<double> sess(tape, ps);
  auto grads =
      tape.backward(tape.sum(gru_step(tape, sess.gru("g"), tape.constant(x), tape.constant(h0))));

  auto eval = [&]() {
    Tape<double> t;
    ParamSession<double> s(t, ps, /*requires_grad=*/false);
    return t.scalar_value(t.sum(gru_step(t, s.gru("g"), t.constant(x), t.constant(h0))));
  };
  for (auto& [name, tensor] : ps.items()) {
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double fd = oracle::central_difference(eval, &tensor.data[i]);
      EXPECT_TRUE(oracle::close(grads[name].data[i], fd, 1e-5, 1e-9))
          << name << "[" << i << "]: ad=" << grads[name].data[i] << " fd=" << fd;
    }
  }
}

TEST(EmbedLookup, RowZeroVerbatim) {
  Rng rng(41);
  ParameterSet<double> ps;
  add_embedding_params(ps, "embed.t", 5, 4, rng);
  Tape<double> tape;
  ParamSession<double> sess(tape, ps);
  Var row = embed_lookup(tape, sess.table("embed.t"), 0);
  for (int j = 0; j < 4; ++j) EXPECT_EQ(tape.value(row).data[j], ps.at("embed.t").at(0, j));
}

TEST(EmbedLookup, GradientScattersIntoOneRowOnly) {
  Rng rng(42);
  ParameterSet<double> ps;
  add_embedding_params(ps, "embed.t", 6, 3, rng);
  Tape<double> tape;
  ParamSession<double> sess(tape, ps);
  auto grads = tape.backward(tape.sum(embed_lookup(tape, sess.table("embed.t"), 3)));
  const Tensor<double>& g = grads["embed.t"];
  double off_row_abs = 0;
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      if (r == 3) {
        EXPECT_DOUBLE_EQ(g.at(r, c), 1.0);
      } else {
        off_row_abs += std::fabs(g.at(r, c));
      }
    }
  }
  EXPECT_EQ(off_row_abs, 0.0);
}

TEST(EmbedLookup, IndexAtVocabSizeIsVocabularyError) {
  Rng rng(43);
  ParameterSet<double> ps;
  add_embedding_params(ps, "embed.occupation", 5, 4, rng);
  Tape<double> tape;
  ParamSession<double> sess(tape, ps);
  auto table = sess.table("embed.occupation");
  try {
    embed_lookup(tape, table, 5);
    FAIL() << "expected VocabularyError";
  } catch (const VocabularyError& e) {
    EXPECT_NE(std::string(e.what()).find("embed.occupation"), std::string::npos);
  }
}

TEST(EmbedLookupSum, MatchesSumOfRowsAndScattersToAll) {
  Rng rng(44);
  ParameterSet<double> ps;
  add_embedding_params(ps, "embed.genre", 7, 3, rng);
  Tape<double> tape;
  ParamSession<double> sess(tape, ps);
  auto table = sess.table("embed.genre");
  Var s = embed_lookup_sum(tape, table, {1, 4, 6});
  const Tensor<double>& t = ps.at("embed.genre");
  for (int j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(tape.value(s).data[j], t.at(1, j) + t.at(4, j) + t.at(6, j));
  }
  auto grads = tape.backward(tape.sum(s));
  for (std::size_t r = 0; r < 7; ++r) {
    const double expect = (r == 1 || r == 4 || r == 6) ? 1.0 : 0.0;
    for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(grads["embed.genre"].at(r, c), expect);
  }
  EXPECT_THROW(embed_lookup_sum(tape, table, {0, 7}), VocabularyError);
}

TEST(MlpForward, SingleIdentityLayer) {
  ParameterSet<double> ps;
  ps.add("m.l0.weight", Tensor<double>({2, 2}, {1, 0, 0, 1}));
  ps.add("m.l0.bias", Tensor<double>({2}));
  Tape<double> tape;
  ParamSession<double> sess(tape, ps);
  Var y = mlp_forward(tape, {sess.affine("m.l0")}, tape.constant(Tensor<double>({2}, {3, -4})));
  EXPECT_EQ(tape.value(y).data, (std::vector<double>{3, -4}));
}

TEST(MlpForward, FiveLayersEndAtScalar) {
  Rng rng(51);
  ParameterSet<double> ps;
  const std::vector<std::size_t> widths = {8, 8, 8, 8, 1};
  std::size_t in = 6;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    add_affine_params(ps, "m.l" + std::to_string(i), in, widths[i], rng);
    in = widths[i];
  }
  Tape<double> tape;
  ParamSession<double> sess(tape, ps);
  std::vector<Affine<double>> layers;
  for (int i = 0; i < 5; ++i) layers.push_back(sess.affine("m.l" + std::to_string(i)));
  Var y = mlp_forward(tape, layers, tape.constant(random_tensor({6}, rng)));
  EXPECT_EQ(tape.value(y).size(), 1u);
}

TEST(MlpForward, TwoLayerCaseMatchesHandComposition) {
  Rng rng(52);
  ParameterSet<double> ps;
  add_affine_params(ps, "m.l0", 2, 3, rng);
  add_affine_params(ps, "m.l1", 3, 1, rng);
  ps.at("m.l0.bias").data = {0.1, -0.2, 0.3};
  ps.at("m.l1.bias").data = {0.05};
  const Tensor<double> x = random_tensor({2}, rng);

  Tape<double> tape;
  ParamSession<double> sess(tape, ps);
  Var y = mlp_forward(tape, {sess.affine("m.l0"), sess.affine("m.l1")}, tape.constant(x));

  auto hidden = oracle::matvec(ps.at("m.l0.weight").data, 3, 2, x.data);
  for (int i = 0; i < 3; ++i) {
    hidden[i] += ps.at("m.l0.bias").data[i];
    hidden[i] = hidden[i] > 0 ? hidden[i] : 0.01 * hidden[i];
  }
  auto out = oracle::matvec(ps.at("m.l1.weight").data, 1, 3, hidden);
  EXPECT_NEAR(tape.value(y).data[0], out[0] + ps.at("m.l1.bias").data[0], 1e-12);
}

TEST(MlpForward, ChainMismatchIsDimensionError) {
  Rng rng(53);
  ParameterSet<double> ps;
  add_affine_params(ps, "m.l0", 2, 3, rng);
  add_affine_params(ps, "m.l1", 4, 1, rng);  // expects 4, gets 3
  Tape<double> tape;
  ParamSession<double> sess(tape, ps);
  EXPECT_THROW(mlp_forward(tape, {sess.affine("m.l0"), sess.affine("m.l1")},
                           tape.constant(Tensor<double>({2}))),
               DimensionError);
}

TEST(MlpForward, FiniteForKaimingDrawsOnFiniteInput) {
  Rng rng(54);
  for (int trial = 0; trial < 20; ++trial) {
    ParameterSet<double> ps;
    const std::vector<std::size_t> widths = {16, 8, 8, 4, 1};
    std::size_t in = 12;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      add_affine_params(ps, "m.l" + std::to_string(i), in, widths[i], rng);
      in = widths[i];
    }
    Tape<double> tape;
    ParamSession<double> sess(tape, ps);
    std::vector<Affine<double>> layers;
    for (int i = 0; i < 5; ++i) layers.push_back(sess.affine("m.l" + std::to_string(i)));
    Var y = mlp_forward(tape, layers, tape.constant(random_tensor({12}, rng, -5, 5)));
    EXPECT_TRUE(all_finite(tape.value(y)));
  }
}

TEST(Params, GruBuilderShapesAndKaimingInit) {
  Rng rng(61);
  ParameterSet<double> ps;
  add_gru_params(ps, "g", 4, 6, rng);
  EXPECT_EQ(ps.size(), 9u);
  EXPECT_EQ(ps.at("g.W_z").shape, (std::vector<std::size_t>{6, 4}));
  EXPECT_EQ(ps.at("g.U_h").shape, (std::vector<std::size_t>{6, 6}));
  EXPECT_EQ(ps.at("g.b_r").shape, (std::vector<std::size_t>{6}));
  for (double v : ps.at("g.b_z").data) EXPECT_EQ(v, 0.0);
  const double w_bound = std::sqrt(6.0 / 4.0);
  for (double v : ps.at("g.W_z").data) EXPECT_LE(std::fabs(v), w_bound);
}

TEST(Params, DuplicateNameIsConstructionError) {
  ParameterSet<double> ps;
  ps.add("x", Tensor<double>({1}));
  EXPECT_THROW(ps.add("x", Tensor<double>({1})), ConstructionError);
}
