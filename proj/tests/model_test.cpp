// Copyright 2026 The tilegene Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "invariants.hpp"
#include "oracles.hpp"
#include "support.hpp"
#include "tilegene/model.hpp"

namespace tilegene {
namespace {

using oracle::tiny_model_config;

TEST(ModelGradient, WholeModelMatchesFiniteDifferences) {
  auto check = oracle::model_gradcheck(1);
  EXPECT_EQ(check.rel_error.size(), Model<double>(tiny_model_config()).parameters().size());
  for (const auto& [name, err] : check.rel_error) EXPECT_LT(err, 1e-4) << name;
}

TEST(ModelGradient, TestAggregationAndAbsoluteLoss) {
  Model<double> model(tiny_model_config());
  oracle::randomize(model.parameters(), 4);
  const auto x = invariants::random_bag(4, 8, 5);
  const auto target = Tensor<double>::row({0.1, -0.4, 0.3, 2.0, -1.0});
  auto loss = [&](bool backward) {
    Tape<double> tape(backward);
    Rng rng(0);
    ForwardOptions opt;
    opt.aggregation = TestAggregation::kLiteral;
    auto f = model.forward(tape, x, opt, rng);
    auto l = total_loss(f.logits, 0, f.slide_genes, tape.constant(target), 0.7, GeneLoss::kAbsolute);
    if (backward) tape.backward(l);
    return l.value()[0];
  };
  for (const auto& [name, err] : oracle::check_gradients(model.parameters(), loss).rel_error)
    EXPECT_LT(err, 1e-4) << name;
}

TEST(Embedding, IdentityProjectionPassesInstancesThrough) {
  auto c = tiny_model_config();
  Model<double> model(c);
  model.params().projection.value = Tensor<double>::identity(8);
  model.params().class_token.value = Tensor<double>::row({1, 2, 3, 4, 5, 6, 7, 8});
  const auto x = invariants::random_bag(4, 8, 9);
  Tape<double> tape(false);
  auto z0 = embed_input(tape, tape.constant(x), model.params()).value();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(z0(i + 1, j), x(i, j));
  for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(z0(0, j), double(j + 1));
}

TEST(Embedding, ZeroBagGivesPositionRows) {
  auto model = invariants::random_model(tiny_model_config(), 3, false);
  Tape<double> tape(false);
  auto z0 = embed_input(tape, tape.constant(Tensor<double>({4, 8})), model.params()).value();
  const auto& pos = model.params().positions.value;
  const auto& cls = model.params().class_token.value;
  for (std::size_t j = 0; j < 8; ++j) EXPECT_DOUBLE_EQ(z0(0, j), cls[j] + pos(0, j));
  for (std::size_t i = 1; i <= 4; ++i)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(z0(i, j), pos(i, j));
}

TEST(Embedding, BlockConvolutionEquivalence) { EXPECT_LT(invariants::block_conv_equivalence(16, 21), 1e-6); }

TEST(Encoder, ZeroWeightsGiveResidualIdentity) {
  EXPECT_EQ(invariants::zero_weight_encoder(tiny_model_config(), 2), 0.0);
}

TEST(Encoder, NoBlocksIsIdentity) {
  Rng rng(1);
  Tape<double> tape(false);
  auto z0 = tape.constant(testing::random_tensor<double>(5, 8, rng));
  auto zl = encoder_forward<double>(tape, z0, {}, 2, 0.0, rng, false);
  EXPECT_EQ(zl.value(), z0.value());
}

TEST(Encoder, PermutationEquivariantWithoutPositions) {
  auto r = invariants::permutation_check(tiny_model_config(), 11);
  EXPECT_LT(r.logits, 1e-6);
  EXPECT_LT(r.c, 1e-6);
  EXPECT_LT(r.rows, 1e-6);
}

TEST(Encoder, PositionsBreakPermutationInvariance) {
  auto model = invariants::random_model(tiny_model_config(), 12, false);
  const auto x = invariants::random_bag(4, 8, 13);
  const auto px = invariants::permute_rows(x, {3, 2, 1, 0});
  EXPECT_GT(max_abs_diff(model.infer(x).logits, model.infer(px).logits), 1e-6);
}

TEST(Encoder, AttentionMatricesReported) {
  auto model = invariants::random_model(tiny_model_config(), 14, false);
  Tape<double> tape(false);
  Rng rng(0);
  std::vector<Tensor<double>> attn;
  model.forward(tape, invariants::random_bag(4, 8, 15), {}, rng, &attn);
  ASSERT_EQ(attn.size(), 4u);  // layers x heads
  for (const auto& a : attn) EXPECT_EQ(a.shape(), (Shape{5, 5}));
}

TEST(ClassHead, ZeroWeightsGiveUniformSoftmax) {
  auto model = invariants::random_model(tiny_model_config(), 4, false);
  model.params().class_head.weight.value.fill(0);
  model.params().class_head.bias.value.fill(0);
  auto out = model.infer(invariants::random_bag(4, 8, 5));
  for (double v : out.logits.data()) EXPECT_EQ(v, 0.0);
  const auto probs = softmax_rows_value(out.logits);
  for (double p : probs.data()) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}

TEST(ClassHead, IndependentOfGeneHead) {
  auto model = invariants::random_model(tiny_model_config(), 6, false);
  const auto x = invariants::random_bag(4, 8, 7);
  auto before = model.infer(x);
  oracle::randomize({&model.params().gene_head.weight, &model.params().gene_head.bias}, 99);
  auto after = model.infer(x);
  EXPECT_EQ(before.c, after.c);
  EXPECT_EQ(before.logits, after.logits);
  EXPECT_NE(before.S, after.S);
}

TEST(ClassHead, ThreeClassOutput) {
  auto model = invariants::random_model(tiny_model_config(), 8, false);
  auto out = model.infer(invariants::random_bag(4, 8, 9));
  EXPECT_EQ(out.logits.shape(), (Shape{1, 3}));
  EXPECT_EQ(out.c.shape(), (Shape{1, 8}));
  EXPECT_EQ(out.s.shape(), (Shape{5, 4}));
  EXPECT_EQ(out.S.shape(), (Shape{1, 5}));
}

Tensor<double> one_gene(std::initializer_list<double> v) { return Tensor<double>({v.size(), 1}, std::vector<double>(v)); }

TEST(GeneAggregation, TopNMeans) {
  Tape<double> tape(false);
  auto s = tape.constant(one_gene({0.2, 0.9, 0.5}));
  EXPECT_NEAR(top_n_mean(s, 1).value()[0], 0.9, 1e-15);
  EXPECT_NEAR(top_n_mean(s, 2).value()[0], 0.7, 1e-15);
  EXPECT_NEAR(top_n_mean(s, 3).value()[0], 1.6 / 3.0, 1e-15);
  EXPECT_NEAR(top_n_mean(s, 3).value()[0], 0.5333, 1e-4);
  EXPECT_THROW(top_n_mean(s, 0), ContractError);
  EXPECT_THROW(top_n_mean(s, 4), ContractError);
}

TEST(GeneAggregation, ConstantRowIsFixedPoint) {
  Tape<double> tape(false);
  auto s = tape.constant(one_gene({0.4, 0.4, 0.4, 0.4}));
  for (std::size_t n = 1; n <= 4; ++n) EXPECT_NEAR(top_n_mean(s, n).value()[0], 0.4, 1e-15);
  EXPECT_NEAR(aggregate_test(s, TestAggregation::kMean).value()[0], 0.4, 1e-15);
}

TEST(GeneAggregation, TestTimeForms) {
  Tape<double> tape(false);
  auto s = tape.constant(one_gene({0.2, 0.9, 0.5}));
  const double s1 = 0.9, s2 = 0.7, s3 = 1.6 / 3.0;
  EXPECT_NEAR(aggregate_test(s, TestAggregation::kMean).value()[0], (s1 + s2 + s3) / 3.0, 1e-15);
  EXPECT_NEAR(aggregate_test(s, TestAggregation::kMean).value()[0], 0.7111, 1e-4);
  EXPECT_NEAR(aggregate_test(s, TestAggregation::kLiteral).value()[0], s1 / 1 + s2 / 2 + s3 / 3, 1e-15);
  EXPECT_NEAR(aggregate_test(s, TestAggregation::kLiteral).value()[0], 1.4278, 1e-4);
}

TEST(GeneAggregation, WeightsReproduceAverageOfTopNMeans) {
  Rng rng(3);
  for (std::size_t k : {1u, 2u, 7u, 49u}) {
    auto col = testing::random_tensor<double>(k, 1, rng);
    Tape<double> tape(false);
    auto s = tape.constant(col);
    double mean = 0, literal = 0;
    for (std::size_t n = 1; n <= k; ++n) {
      const double v = top_n_mean(s, n).value()[0];
      mean += v / double(k);
      literal += v / double(n);
    }
    EXPECT_NEAR(aggregate_test(s, TestAggregation::kMean).value()[0], mean, 1e-12);
    EXPECT_NEAR(aggregate_test(s, TestAggregation::kLiteral).value()[0], literal, 1e-12);
  }
}

TEST(GeneAggregation, TopNNonIncreasing) { EXPECT_LE(invariants::top_n_monotonicity(tiny_model_config(), 5), 0.0); }

TEST(Loss, PerfectPredictionNearZero) {
  Tape<double> tape(false);
  auto l = total_loss(tape.constant(Tensor<double>::row({20, 0, 0})), 0, tape.constant(Tensor<double>::row({1, 2})),
                      tape.constant(Tensor<double>::row({1, 2})), 0.5, GeneLoss::kMse);
  EXPECT_LT(l.value()[0], 1e-6);
}

TEST(Loss, UniformLogitsGiveLogC) {
  Tape<double> tape(false);
  auto l = ops::cross_entropy(tape.constant(Tensor<double>::row({0.3, 0.3, 0.3})), 2);
  EXPECT_NEAR(l.value()[0], std::log(3.0), 1e-15);
}

TEST(Loss, GeneTermWeightedByGamma) {
  Tape<double> tape(false);
  auto logits = tape.constant(Tensor<double>::row({0, 0, 0}));
  auto pred = tape.constant(Tensor<double>::row({2, 0}));
  auto target = tape.constant(Tensor<double>::row({1, 1}));
  auto mse = total_loss(logits, 0, pred, target, 0.5, GeneLoss::kMse);
  EXPECT_NEAR(mse.value()[0] - std::log(3.0), 0.5, 1e-15);
  auto mae = total_loss(logits, 0, pred, target, 0.5, GeneLoss::kAbsolute);
  EXPECT_NEAR(mae.value()[0] - std::log(3.0), 0.5, 1e-15);
}

TEST(Loss, LabelOutOfRange) {
  Tape<double> tape(false);
  EXPECT_THROW(ops::cross_entropy(tape.constant(Tensor<double>::row({0, 0, 0})), 3), ContractError);
}

TEST(ModelInit, DeterministicTruncatedWeights) {
  ModelConfig c = tiny_model_config();
  Model<float> a(c), b(c), other(c);
  a.initialize(5);
  b.initialize(5);
  other.initialize(6);
  bool differs = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    EXPECT_EQ(a.parameters()[i]->value, b.parameters()[i]->value);
    differs |= a.parameters()[i]->value != other.parameters()[i]->value;
  }
  EXPECT_TRUE(differs);
  for (float v : a.params().class_token.value.data()) EXPECT_EQ(v, 0.0f);
  for (float v : a.params().positions.value.data()) EXPECT_EQ(v, 0.0f);
  for (float v : a.params().projection.value.data()) EXPECT_LE(std::abs(v), 0.04f + 1e-7f);
  for (float v : a.params().blocks[0].ln1.gain.value.data()) EXPECT_EQ(v, 1.0f);
}

TEST(ModelInit, ParameterCountAndNames) {
  Model<float> m(tiny_model_config());
  std::size_t total = 0;
  std::set<std::string> names;
  for (auto* p : m.parameters()) {
    total += p->value.size();
    names.insert(p->name);
  }
  EXPECT_EQ(m.parameter_count(), total);
  EXPECT_EQ(names.size(), m.parameters().size());
}

TEST(ModelInit, CastRoundTrip) {
  Model<float> m(tiny_model_config());
  m.initialize(3);
  auto back = m.cast<double>().cast<float>();
  for (std::size_t i = 0; i < m.parameters().size(); ++i)
    EXPECT_EQ(m.parameters()[i]->value, back.parameters()[i]->value);
}

TEST(ModelInit, WrongBagShapeRejected) {
  Model<double> m(tiny_model_config());
  EXPECT_THROW(m.infer(Tensor<double>({5, 8})), DimensionError);
  EXPECT_THROW(m.infer(Tensor<double>({4, 7})), DimensionError);
}

TEST(ModelConfig, ValidationAndJson) {
  ModelConfig c = tiny_model_config();
  EXPECT_NO_THROW(c.validate());
  auto bad = c;
  bad.layers = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.heads = 3;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.n_set = {1, 5};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.gene_dropout = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  nlohmann::json j = c;
  EXPECT_EQ(j.get<ModelConfig>(), c);
  EXPECT_THROW(parse_gene_loss("huber"), ConfigError);
  EXPECT_EQ(parse_aggregation(to_string(TestAggregation::kLiteral)), TestAggregation::kLiteral);
}

}  // namespace
}  // namespace tilegene
