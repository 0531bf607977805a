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
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tilegene/autodiff.hpp"
#include "tilegene/layers.hpp"

namespace tilegene {

enum class GeneLoss { kMse, kAbsolute };
// kMean: S = (1/k) sum_i S(i).  kLiteral: S = sum_i S(i) / i.
enum class TestAggregation { kMean, kLiteral };

const char* to_string(GeneLoss g);
const char* to_string(TestAggregation a);
GeneLoss parse_gene_loss(const std::string& s);
TestAggregation parse_aggregation(const std::string& s);

struct ModelConfig {
  std::size_t layers = 1;       // encoder depth L
  std::size_t width = 384;      // internal width D
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  std::size_t instances = 49;   // k
  std::size_t input_dim = 1024; // d
  std::size_t genes = 0;        // G
  std::size_t classes = 3;      // C
  double gene_dropout = 0.25;
  double mlp_dropout = 0.1;
  std::vector<std::size_t> n_set{1, 2, 5, 10, 20, 49};

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

template <typename T>
struct EncoderBlock {
  LayerNormParams<T> ln1;
  AttentionParams<T> attn;
  LayerNormParams<T> ln2;
  MlpParams<T> mlp;

  EncoderBlock() = default;
  EncoderBlock(const std::string& name, std::size_t width, std::size_t hidden)
      : ln1(name + ".ln1", width), attn(name + ".attn", width), ln2(name + ".ln2", width),
        mlp(name + ".mlp", width, hidden) {}
};

template <typename T>
struct ModelParams {
  Param<T> projection;   // E, d x D
  Param<T> class_token;  // 1 x D
  Param<T> positions;    // E_pos, (k+1) x D
  std::vector<EncoderBlock<T>> blocks;
  LayerNormParams<T> final_norm;
  LinearParams<T> class_head;  // D -> C
  LinearParams<T> gene_head;   // D -> G, applied per instance

  // Stable, named order used by the optimizer and checkpoints.
  std::vector<Param<T>*> all();
  std::vector<const Param<T>*> all() const;
};

// Value-level result of one bag forward.
template <typename T>
struct ForwardOutput {
  Tensor<T> c;       // 1 x D slide representation
  Tensor<T> logits;  // 1 x C
  Tensor<T> s;       // G x k per-instance gene predictions
  Tensor<T> S;       // 1 x G slide-level gene prediction
};

// Tape handles for one bag forward.
template <typename T>
struct ForwardVars {
  Var<T> z0, zL, c, logits;
  Var<T> instance_genes;  // k x G
  Var<T> slide_genes;     // 1 x G
};

struct ForwardOptions {
  bool training = false;
  // Top-n mean when set (training); otherwise the test-time aggregation.
  std::optional<std::size_t> top_n;
  TestAggregation aggregation = TestAggregation::kMean;
};

// z0 = [x_class; X E] + E_pos.
template <typename T>
Var<T> embed_input(Tape<T>& tape, const Var<T>& instances, ModelParams<T>& p);

// Pre-norm residual blocks: z' = MSA(LN(z)) + z; z = MLP(LN(z')) + z'.
template <typename T>
Var<T> encoder_forward(Tape<T>& tape, const Var<T>& z0, std::span<EncoderBlock<T>> blocks, std::size_t heads,
                       T mlp_dropout, Rng& rng, bool training, std::vector<Tensor<T>>* attention = nullptr);

// c = LN(z_L row 0); logits = linear(c).
template <typename T>
std::pair<Var<T>, Var<T>> classify(Tape<T>& tape, const Var<T>& zL, ModelParams<T>& p);

// Per-instance gene predictions (k x G) from rows 1..k after dropout.
template <typename T>
Var<T> gene_head(Tape<T>& tape, const Var<T>& zL, ModelParams<T>& p, T dropout, Rng& rng, bool training);

// Mean of the n largest per-instance predictions of every gene.
template <typename T>
Var<T> top_n_mean(const Var<T>& instance_genes, std::size_t n);

// Weights over descending ranks that reproduce the test-time aggregation.
template <typename T>
std::vector<T> aggregation_weights(std::size_t k, TestAggregation form);

template <typename T>
Var<T> aggregate_test(const Var<T>& instance_genes, TestAggregation form);

// Cross-entropy + gamma * gene loss. Weight decay lives in the optimizer.
template <typename T>
Var<T> total_loss(const Var<T>& logits, std::size_t label, const Var<T>& slide_genes, const Var<T>& target,
                  T gamma, GeneLoss form);

template <typename T>
class Model {
 public:
  Model() = default;
  // Parameters start at the deterministic part of the initialization (zeros,
  // unit layernorm gains); call initialize() for the random weights.
  explicit Model(ModelConfig config);

  // Truncated N(0, 0.02^2) weights, zero biases, zero class token and
  // positional embedding.
  void initialize(std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ModelParams<T>& params() { return params_; }
  const ModelParams<T>& params() const { return params_; }
  std::vector<Param<T>*> parameters() { return params_.all(); }
  std::size_t parameter_count() const;
  void zero_grad();

  ForwardVars<T> forward(Tape<T>& tape, const Tensor<T>& instances, const ForwardOptions& options, Rng& rng,
                         std::vector<Tensor<T>>* attention = nullptr);

  // Eval-mode forward returning values only.
  ForwardOutput<T> infer(const Tensor<T>& instances, TestAggregation form = TestAggregation::kMean);

  template <typename U>
  Model<U> cast() const;

 private:
  ModelConfig config_;
  ModelParams<T> params_;
};

}  // namespace tilegene
