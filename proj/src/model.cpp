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

#include "tilegene/model.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace tilegene {

const char* to_string(GeneLoss g) { return g == GeneLoss::kMse ? "mse" : "absolute"; }
const char* to_string(TestAggregation a) { return a == TestAggregation::kMean ? "mean" : "literal"; }

GeneLoss parse_gene_loss(const std::string& s) {
  if (s == "mse") return GeneLoss::kMse;
  if (s == "absolute" || s == "mae") return GeneLoss::kAbsolute;
  throw ConfigError("unknown gene loss \"" + s + "\" (expected mse or absolute)");
}

TestAggregation parse_aggregation(const std::string& s) {
  if (s == "mean") return TestAggregation::kMean;
  if (s == "literal") return TestAggregation::kLiteral;
  throw ConfigError("unknown test aggregation \"" + s + "\" (expected mean or literal)");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
  if (layers < 1) fail("layers must be >= 1");
  if (width < 1) fail("width must be >= 1");
  if (heads < 1 || width % heads != 0) fail("width must be divisible by heads");
  if (mlp_ratio < 1) fail("mlp_ratio must be >= 1");
  if (instances < 1) fail("instances must be >= 1");
  if (input_dim < 1) fail("input_dim must be >= 1");
  if (genes < 1) fail("genes must be >= 1");
  if (classes < 2) fail("classes must be >= 2");
  if (!(gene_dropout >= 0 && gene_dropout < 1)) fail("gene_dropout must lie in [0, 1)");
  if (!(mlp_dropout >= 0 && mlp_dropout < 1)) fail("mlp_dropout must lie in [0, 1)");
  if (n_set.empty()) fail("n_set must not be empty");
  for (auto n : n_set)
    if (n < 1 || n > instances) fail("n_set values must lie in [1, instances]");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"layers", c.layers},         {"width", c.width},
                     {"heads", c.heads},           {"mlp_ratio", c.mlp_ratio},
                     {"instances", c.instances},   {"input_dim", c.input_dim},
                     {"genes", c.genes},           {"classes", c.classes},
                     {"gene_dropout", c.gene_dropout}, {"mlp_dropout", c.mlp_dropout},
                     {"n_set", c.n_set}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("layers").get_to(c.layers);
  j.at("width").get_to(c.width);
  j.at("heads").get_to(c.heads);
  j.at("mlp_ratio").get_to(c.mlp_ratio);
  j.at("instances").get_to(c.instances);
  j.at("input_dim").get_to(c.input_dim);
  j.at("genes").get_to(c.genes);
  j.at("classes").get_to(c.classes);
  j.at("gene_dropout").get_to(c.gene_dropout);
  j.at("mlp_dropout").get_to(c.mlp_dropout);
  j.at("n_set").get_to(c.n_set);
}

template <typename T>
std::vector<Param<T>*> ModelParams<T>::all() {
  std::vector<Param<T>*> out{&projection, &class_token, &positions};
  for (auto& b : blocks) {
    for (auto* p : {&b.ln1.gain, &b.ln1.bias, &b.attn.query.weight, &b.attn.query.bias, &b.attn.key.weight,
                    &b.attn.key.bias, &b.attn.value.weight, &b.attn.value.bias, &b.attn.out.weight,
                    &b.attn.out.bias, &b.ln2.gain, &b.ln2.bias, &b.mlp.fc1.weight, &b.mlp.fc1.bias,
                    &b.mlp.fc2.weight, &b.mlp.fc2.bias})
      out.push_back(p);
  }
  for (auto* p : {&final_norm.gain, &final_norm.bias, &class_head.weight, &class_head.bias, &gene_head.weight,
                  &gene_head.bias})
    out.push_back(p);
  return out;
}

template <typename T>
std::vector<const Param<T>*> ModelParams<T>::all() const {
  auto ptrs = const_cast<ModelParams<T>*>(this)->all();
  return std::vector<const Param<T>*>(ptrs.begin(), ptrs.end());
}

template <typename T>
Var<T> embed_input(Tape<T>& tape, const Var<T>& instances, ModelParams<T>& p) {
  const auto& x = instances.value();
  const auto& e = p.projection.value;
  if (x.cols() != e.rows()) {
    throw DimensionError("embed_input: bag width " + std::to_string(x.cols()) + " does not match projection input " +
                         std::to_string(e.rows()));
  }
  if (x.rows() + 1 != p.positions.value.rows()) {
    throw DimensionError("embed_input: bag has " + std::to_string(x.rows()) + " instances, positional table expects " +
                         std::to_string(p.positions.value.rows() - 1));
  }
  auto projected = ops::matmul(instances, tape.param(p.projection));
  Var<T> rows[] = {tape.param(p.class_token), projected};
  return ops::add(ops::concat_rows<T>(rows), tape.param(p.positions));
}

template <typename T>
Var<T> encoder_forward(Tape<T>& tape, const Var<T>& z0, std::span<EncoderBlock<T>> blocks, std::size_t heads,
                       T mlp_dropout, Rng& rng, bool training, std::vector<Tensor<T>>* attention) {
  Var<T> z = z0;
  for (auto& b : blocks) {
    auto z_mid = ops::add(multi_head_self_attention(tape, layernorm(tape, z, b.ln1), b.attn, heads, attention), z);
    z = ops::add(mlp_block(tape, layernorm(tape, z_mid, b.ln2), b.mlp, mlp_dropout, rng, training), z_mid);
  }
  return z;
}

template <typename T>
std::pair<Var<T>, Var<T>> classify(Tape<T>& tape, const Var<T>& zL, ModelParams<T>& p) {
  auto c = layernorm(tape, ops::slice_rows(zL, 0, 1), p.final_norm);
  return {c, linear(tape, c, p.class_head)};
}

template <typename T>
Var<T> gene_head(Tape<T>& tape, const Var<T>& zL, ModelParams<T>& p, T dropout, Rng& rng, bool training) {
  auto tokens = ops::slice_rows(zL, 1, zL.value().rows());
  return linear(tape, ops::dropout(tokens, dropout, rng, training), p.gene_head);
}

template <typename T>
Var<T> top_n_mean(const Var<T>& instance_genes, std::size_t n) {
  const std::size_t k = instance_genes.value().rows();
  if (n < 1 || n > k) {
    throw ContractError("top_n_mean: n = " + std::to_string(n) + " outside [1, " + std::to_string(k) + "]");
  }
  std::vector<T> w(k, T(0));
  for (std::size_t j = 0; j < n; ++j) w[j] = T(1) / T(n);
  return ops::rank_weighted_sum<T>(instance_genes, w);
}

template <typename T>
std::vector<T> aggregation_weights(std::size_t k, TestAggregation form) {
  // S(i) = (1/i) sum_{j<i} v_j, so the j-th ranked value (0-based) enters
  // every S(i) with i > j.
  std::vector<T> w(k, T(0));
  T tail = 0;
  for (std::size_t j = k; j-- > 0;) {
    const T i = T(j + 1);
    tail += form == TestAggregation::kMean ? T(1) / i : T(1) / (i * i);
    w[j] = form == TestAggregation::kMean ? tail / T(k) : tail;
  }
  return w;
}

template <typename T>
Var<T> aggregate_test(const Var<T>& instance_genes, TestAggregation form) {
  return ops::rank_weighted_sum<T>(instance_genes, aggregation_weights<T>(instance_genes.value().rows(), form));
}

template <typename T>
Var<T> total_loss(const Var<T>& logits, std::size_t label, const Var<T>& slide_genes, const Var<T>& target,
                  T gamma, GeneLoss form) {
  auto ce = ops::cross_entropy(logits, label);
  auto gene = form == GeneLoss::kMse ? ops::mse(slide_genes, target) : ops::mae(slide_genes, target);
  Var<T> terms[] = {ce, ops::scale(gene, gamma)};
  return ops::add_n<T>(terms);
}

namespace {

template <typename T>
void truncated_normal(Tensor<T>& t, double stddev, Rng& rng) {
  for (auto& v : t.data()) {
    double z = normal01(rng);
    while (std::abs(z) > 2.0) z = normal01(rng);
    v = static_cast<T>(z * stddev);
  }
}

}  // namespace

template <typename T>
Model<T>::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& c = config_;
  params_.projection = Param<T>("embed.projection", Tensor<T>({c.input_dim, c.width}));
  params_.class_token = Param<T>("embed.class_token", Tensor<T>({1, c.width}));
  params_.positions = Param<T>("embed.positions", Tensor<T>({c.instances + 1, c.width}));
  for (std::size_t l = 0; l < c.layers; ++l)
    params_.blocks.emplace_back("blocks." + std::to_string(l), c.width, c.width * c.mlp_ratio);
  params_.final_norm = LayerNormParams<T>("final_norm", c.width);
  params_.class_head = LinearParams<T>("class_head", c.width, c.classes);
  params_.gene_head = LinearParams<T>("gene_head", c.width, c.genes);
}

template <typename T>
void Model<T>::initialize(std::uint64_t seed) {
  Rng rng(seed);
  constexpr double kStd = 0.02;
  truncated_normal(params_.projection.value, kStd, rng);
  for (auto& b : params_.blocks) {
    for (auto* lin : {&b.attn.query, &b.attn.key, &b.attn.value, &b.attn.out, &b.mlp.fc1, &b.mlp.fc2}) {
      truncated_normal(lin->weight.value, kStd, rng);
      lin->bias.value.fill(T(0));
    }
  }
  truncated_normal(params_.class_head.weight.value, kStd, rng);
  truncated_normal(params_.gene_head.weight.value, kStd, rng);
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : params_.all()) n += p->value.size();
  return n;
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto* p : params_.all()) p->zero_grad();
}

template <typename T>
ForwardVars<T> Model<T>::forward(Tape<T>& tape, const Tensor<T>& instances, const ForwardOptions& options, Rng& rng,
                                 std::vector<Tensor<T>>* attention) {
  if (instances.rank() != 2 || instances.rows() != config_.instances || instances.cols() != config_.input_dim) {
    throw DimensionError("bag shape " + shape_string(instances.shape()) + " does not match model k x d = [" +
                         std::to_string(config_.instances) + "," + std::to_string(config_.input_dim) + "]");
  }
  ForwardVars<T> out;
  out.z0 = embed_input(tape, tape.constant(instances), params_);
  out.zL = encoder_forward<T>(tape, out.z0, params_.blocks, config_.heads, T(config_.mlp_dropout), rng,
                              options.training, attention);
  std::tie(out.c, out.logits) = classify(tape, out.zL, params_);
  out.instance_genes = gene_head(tape, out.zL, params_, T(config_.gene_dropout), rng, options.training);
  out.slide_genes = options.top_n ? top_n_mean(out.instance_genes, *options.top_n)
                                  : aggregate_test(out.instance_genes, options.aggregation);
  return out;
}

template <typename T>
ForwardOutput<T> Model<T>::infer(const Tensor<T>& instances, TestAggregation form) {
  Tape<T> tape(false);
  Rng rng(0);
  ForwardOptions opt;
  opt.aggregation = form;
  auto v = forward(tape, instances, opt, rng);
  return {v.c.value(), v.logits.value(), transpose(v.instance_genes.value()), v.slide_genes.value()};
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  Model<U> out(config_);
  auto dst = out.params().all();
  auto src = params_.all();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value.template cast<U>();
  return out;
}

#define TILEGENE_INSTANTIATE(T)                                                                                    \
  template struct ModelParams<T>;                                                                                  \
  template class Model<T>;                                                                                         \
  template Var<T> embed_input<T>(Tape<T>&, const Var<T>&, ModelParams<T>&);                                        \
  template Var<T> encoder_forward<T>(Tape<T>&, const Var<T>&, std::span<EncoderBlock<T>>, std::size_t, T, Rng&,  \
                                     bool, std::vector<Tensor<T>>*);                                               \
  template std::pair<Var<T>, Var<T>> classify<T>(Tape<T>&, const Var<T>&, ModelParams<T>&);                        \
  template Var<T> gene_head<T>(Tape<T>&, const Var<T>&, ModelParams<T>&, T, Rng&, bool);                           \
  template Var<T> top_n_mean<T>(const Var<T>&, std::size_t);                                                       \
  template std::vector<T> aggregation_weights<T>(std::size_t, TestAggregation);                                    \
  template Var<T> aggregate_test<T>(const Var<T>&, TestAggregation);                                               \
  template Var<T> total_loss<T>(const Var<T>&, std::size_t, const Var<T>&, const Var<T>&, T, GeneLoss);

TILEGENE_INSTANTIATE(float)
TILEGENE_INSTANTIATE(double)

template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template Model<float> Model<float>::cast<float>() const;
template Model<double> Model<double>::cast<double>() const;

}  // namespace tilegene
