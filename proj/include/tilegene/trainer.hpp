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
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tilegene/bag.hpp"
#include "tilegene/model.hpp"

namespace tilegene {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch = 64;
  double lr = 3e-4;
  double weight_decay = 0.01;
  double gamma = 0.5;
  std::size_t plateau_patience = 2;
  double plateau_factor = 10.0;  // lr is divided by this
  std::uint64_t seed = 0;
  GeneLoss gene_loss = GeneLoss::kMse;
  TestAggregation aggregation = TestAggregation::kMean;
  double clip_norm = 0.0;  // 0 disables gradient clipping
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double improvement = 1e-6;  // relative decrease that counts as progress

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

template <typename T>
struct AdamState {
  std::uint64_t step = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam step with decoupled weight decay:
//   p <- p - lr * wd * p - lr * m_hat / (sqrt(v_hat) + eps)
// Throws NonFiniteError naming the parameter if a gradient is NaN/Inf.
template <typename T>
void adamw_step(std::span<Param<T>* const> params, AdamState<T>& state, double lr, double weight_decay,
                const AdamHyper& hyper = {});

// Global L2 norm clipping; returns the norm before clipping.
template <typename T>
double clip_grad_norm(std::span<Param<T>* const> params, double max_norm);

// Divides the learning rate by `factor` once `patience` consecutive epochs
// pass without a strict relative improvement, then restarts the count.
struct PlateauScheduler {
  double lr = 3e-4;
  std::size_t patience = 2;
  double factor = 10.0;
  double threshold = 1e-6;
  double best = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;

  // Returns true when the learning rate was reduced.
  bool step(double val_loss);
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;
  double lr = 0;
};

struct TrainState {
  std::size_t epoch = 0;  // completed epochs
  AdamState<float> adam;
  PlateauScheduler scheduler;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::vector<EpochMetrics> log;
};

struct EvalLoss {
  double loss = 0;
  double slide_accuracy = 0;  // majority vote over each slide's bags
};

// Eval-mode loss with the test-time aggregation, averaged over bags.
EvalLoss evaluate_loss(Model<float>& model, std::span<const Bag* const> bags, const TrainConfig& config);

struct TrainHooks {
  std::function<void(const Model<float>&, const TrainState&)> on_improve;
  std::function<void(const Model<float>&, const TrainState&)> on_epoch_end;
  bool verbose = false;
};

struct TrainResult {
  Model<float> best;
  Model<float> last;
  TrainState state;
};

// Mini-batch AdamW training with reduce-on-plateau scheduling. `model` holds
// the starting weights. To continue a previous run pass its state in
// `resume` (the model must then hold that run's last weights) and, if
// available, its best weights in `resume_best`.
TrainResult train(Model<float> model, std::span<const Bag* const> train_bags, std::span<const Bag* const> val_bags,
                  const TrainConfig& config, const TrainState* resume = nullptr, const TrainHooks& hooks = {},
                  const Model<float>* resume_best = nullptr);

std::string metrics_csv(std::span<const EpochMetrics> log);

}  // namespace tilegene
