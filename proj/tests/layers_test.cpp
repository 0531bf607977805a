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

#include "oracles.hpp"
#include "support.hpp"
#include "tilegene/layers.hpp"

namespace tilegene {
namespace {

using testing::random_tensor;

void set_identity(LinearParams<double>& p) {
  p.weight.value = Tensor<double>::identity(p.weight.value.rows());
  p.bias.value.fill(0);
}

TEST(Attention, SingleTokenWithIdentityProjectionsReturnsInput) {
  AttentionParams<double> p("attn", 4);
  set_identity(p.query);
  set_identity(p.key);
  set_identity(p.value);
  set_identity(p.out);
  const auto x = Tensor<double>::row({0.3, -1.2, 2.0, 0.7});
  Tape<double> tape;
  std::vector<Tensor<double>> probs;
  auto y = multi_head_self_attention(tape, tape.constant(x), p, 2, &probs);
  EXPECT_LT(max_abs_diff(y.value(), x), 1e-15);
  ASSERT_EQ(probs.size(), 2u);
  EXPECT_EQ(probs[0](0, 0), 1.0);
}

TEST(Attention, ZeroQueryKeyGivesMeanOfValues) {
  Rng rng(2);
  AttentionParams<double> p("attn", 4);
  p.value.weight.value = random_tensor<double>(4, 4, rng);
  p.value.bias.value = random_tensor<double>(1, 4, rng);
  p.out.weight.value = random_tensor<double>(4, 4, rng);
  p.out.bias.value = random_tensor<double>(1, 4, rng);
  const auto x = random_tensor<double>(5, 4, rng);

  // mean_i (x_i Wv + bv) Wo + bo, computed by hand.
  std::vector<double> mean_v(4, 0.0);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 4; ++c) {
      double v = p.value.bias.value[c];
      for (std::size_t r = 0; r < 4; ++r) v += x(i, r) * p.value.weight.value(r, c);
      mean_v[c] += v / 5.0;
    }
  std::vector<double> expect(4);
  for (std::size_t c = 0; c < 4; ++c) {
    expect[c] = p.out.bias.value[c];
    for (std::size_t r = 0; r < 4; ++r) expect[c] += mean_v[r] * p.out.weight.value(r, c);
  }

  Tape<double> tape;
  std::vector<Tensor<double>> probs;
  auto y = multi_head_self_attention(tape, tape.constant(x), p, 2, &probs);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(y.value()(i, c), expect[c], 1e-12);
  for (const auto& h : probs)
    for (double v : h.data()) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(Attention, GradientMatchesFiniteDifferences) {
  AttentionParams<double> p("attn", 4);
  std::vector<Param<double>*> params{&p.query.weight, &p.query.bias, &p.key.weight, &p.key.bias,
                                     &p.value.weight, &p.value.bias, &p.out.weight, &p.out.bias};
  oracle::randomize(params, 5);
  Rng rng(6);
  Param<double> x("x", random_tensor<double>(3, 4, rng));
  params.push_back(&x);
  const auto w = random_tensor<double>(3, 4, rng);
  auto loss = [&](bool backward) {
    Tape<double> tape(backward);
    auto y = multi_head_self_attention(tape, tape.param(x), p, 2);
    auto l = ops::sum(ops::mul(y, tape.constant(w)));
    if (backward) tape.backward(l);
    return l.value()[0];
  };
  auto check = oracle::check_gradients(params, loss);
  for (const auto& [name, err] : check.rel_error) EXPECT_LT(err, 1e-5) << name;
}

TEST(Attention, KeyBiasHasNoGradient) {
  AttentionParams<double> p("attn", 4);
  std::vector<Param<double>*> params{&p.query.weight, &p.query.bias, &p.key.weight, &p.key.bias,
                                     &p.value.weight, &p.value.bias, &p.out.weight, &p.out.bias};
  oracle::randomize(params, 6);
  Rng rng(7);
  Tape<double> tape(true);
  auto y = multi_head_self_attention(tape, tape.constant(random_tensor<double>(5, 4, rng)), p, 2);
  tape.backward(ops::sum(ops::mul(y, tape.constant(random_tensor<double>(5, 4, rng)))));
  for (double g : p.key.bias.grad.data()) EXPECT_LT(std::abs(g), 1e-12);
  for (double g : p.query.bias.grad.data()) EXPECT_GT(std::abs(g), 1e-6);
}

TEST(Attention, WidthMustDivideHeads) {
  AttentionParams<double> p("attn", 6);
  Tape<double> tape;
  EXPECT_THROW(multi_head_self_attention(tape, tape.constant(Tensor<double>({2, 6})), p, 4), ConfigError);
}

TEST(Mlp, ZeroWeightsGiveZeroOutput) {
  MlpParams<double> p("mlp", 4, 8);
  Rng rng(1), drop(2);
  Tape<double> tape;
  auto y = mlp_block(tape, tape.constant(random_tensor<double>(3, 4, rng)), p, 0.1, drop, true);
  for (double v : y.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  MlpParams<double> p("mlp", 4, 8);
  std::vector<Param<double>*> params{&p.fc1.weight, &p.fc1.bias, &p.fc2.weight, &p.fc2.bias};
  oracle::randomize(params, 7);
  Rng rng(8);
  const auto x = random_tensor<double>(3, 4, rng);
  const auto w = random_tensor<double>(3, 4, rng);
  auto loss = [&](bool backward) {
    Tape<double> tape(backward);
    Rng drop(0);
    auto l = ops::sum(ops::mul(mlp_block(tape, tape.constant(x), p, 0.0, drop, true), tape.constant(w)));
    if (backward) tape.backward(l);
    return l.value()[0];
  };
  EXPECT_LT(oracle::check_gradients(params, loss).worst, 1e-6);
}

TEST(Linear, AddsBiasToEveryRow) {
  LinearParams<double> p("fc", 2, 2);
  p.weight.value = Tensor<double>::matrix(2, 2, {1, 2, 3, 4});
  p.bias.value = Tensor<double>::row({10, 20});
  Tape<double> tape;
  auto y = linear(tape, tape.constant(Tensor<double>::matrix(2, 2, {1, 0, 0, 1})), p);
  EXPECT_EQ(y.value(), Tensor<double>::matrix(2, 2, {11, 22, 13, 24}));
}

}  // namespace
}  // namespace tilegene
