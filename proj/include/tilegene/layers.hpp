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

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tilegene/autodiff.hpp"

namespace tilegene {

template <typename T>
struct LinearParams {
  Param<T> weight;  // in x out
  Param<T> bias;    // 1 x out

  LinearParams() = default;
  LinearParams(const std::string& name, std::size_t in, std::size_t out)
      : weight(name + ".weight", Tensor<T>({in, out})), bias(name + ".bias", Tensor<T>({1, out})) {}
};

template <typename T>
struct LayerNormParams {
  Param<T> gain;
  Param<T> bias;

  LayerNormParams() = default;
  LayerNormParams(const std::string& name, std::size_t width)
      : gain(name + ".gain", Tensor<T>({1, width}, T(1))), bias(name + ".bias", Tensor<T>({1, width})) {}
};

template <typename T>
struct AttentionParams {
  LinearParams<T> query, key, value, out;

  AttentionParams() = default;
  AttentionParams(const std::string& name, std::size_t width)
      : query(name + ".query", width, width),
        key(name + ".key", width, width),
        value(name + ".value", width, width),
        out(name + ".out", width, width) {}
};

template <typename T>
struct MlpParams {
  LinearParams<T> fc1, fc2;

  MlpParams() = default;
  MlpParams(const std::string& name, std::size_t width, std::size_t hidden)
      : fc1(name + ".fc1", width, hidden), fc2(name + ".fc2", hidden, width) {}
};

template <typename T>
Var<T> linear(Tape<T>& tape, const Var<T>& x, LinearParams<T>& p);

template <typename T>
Var<T> layernorm(Tape<T>& tape, const Var<T>& x, LayerNormParams<T>& p, T eps = T(1e-5));

// softmax(Q K^T / sqrt(d_head)) V per head, heads concatenated, then the
// output projection. When `probs` is non-null the per-head attention
// matrices are appended to it.
template <typename T>
Var<T> multi_head_self_attention(Tape<T>& tape, const Var<T>& z, AttentionParams<T>& p, std::size_t heads,
                                 std::vector<Tensor<T>>* probs = nullptr);

// fc1 -> GELU -> fc2 -> dropout.
template <typename T>
Var<T> mlp_block(Tape<T>& tape, const Var<T>& z, MlpParams<T>& p, T drop_p, Rng& rng, bool training);

}  // namespace tilegene
