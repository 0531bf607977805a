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

#include "tilegene/layers.hpp"

#include <cmath>

namespace tilegene {

template <typename T>
Var<T> linear(Tape<T>& tape, const Var<T>& x, LinearParams<T>& p) {
  return ops::add_row(ops::matmul(x, tape.param(p.weight)), tape.param(p.bias));
}

template <typename T>
Var<T> layernorm(Tape<T>& tape, const Var<T>& x, LayerNormParams<T>& p, T eps) {
  return ops::layernorm(x, tape.param(p.gain), tape.param(p.bias), eps);
}

template <typename T>
Var<T> multi_head_self_attention(Tape<T>& tape, const Var<T>& z, AttentionParams<T>& p, std::size_t heads,
                                 std::vector<Tensor<T>>* probs) {
  const std::size_t width = z.value().cols();
  if (heads == 0 || width % heads != 0) {
    throw ConfigError("attention: width " + std::to_string(width) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const std::size_t head_dim = width / heads;
  const T scale = T(1) / std::sqrt(T(head_dim));
  auto q = linear(tape, z, p.query);
  auto k = linear(tape, z, p.key);
  auto v = linear(tape, z, p.value);
  std::vector<Var<T>> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t b = h * head_dim, e = b + head_dim;
    auto qh = heads == 1 ? q : ops::slice_cols(q, b, e);
    auto kh = heads == 1 ? k : ops::slice_cols(k, b, e);
    auto vh = heads == 1 ? v : ops::slice_cols(v, b, e);
    auto attn = ops::softmax_rows(ops::scale(ops::matmul_nt(qh, kh), scale));
    if (probs) probs->push_back(attn.value());
    outs.push_back(ops::matmul(attn, vh));
  }
  auto merged = heads == 1 ? outs[0] : ops::concat_cols<T>(outs);
  return linear(tape, merged, p.out);
}

template <typename T>
Var<T> mlp_block(Tape<T>& tape, const Var<T>& z, MlpParams<T>& p, T drop_p, Rng& rng, bool training) {
  if (!(drop_p >= T(0) && drop_p < T(1))) throw ConfigError("mlp_block: drop_p must lie in [0, 1)");
  auto h = ops::gelu(linear(tape, z, p.fc1));
  return ops::dropout(linear(tape, h, p.fc2), drop_p, rng, training);
}

#define TILEGENE_INSTANTIATE(T)                                                                            \
  template Var<T> linear<T>(Tape<T>&, const Var<T>&, LinearParams<T>&);                                    \
  template Var<T> layernorm<T>(Tape<T>&, const Var<T>&, LayerNormParams<T>&, T);                           \
  template Var<T> multi_head_self_attention<T>(Tape<T>&, const Var<T>&, AttentionParams<T>&, std::size_t, \
                                               std::vector<Tensor<T>>*);                                   \
  template Var<T> mlp_block<T>(Tape<T>&, const Var<T>&, MlpParams<T>&, T, Rng&, bool);

TILEGENE_INSTANTIATE(float)
TILEGENE_INSTANTIATE(double)

}  // namespace tilegene
