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

#include "tilegene/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "tilegene/metrics.hpp"

namespace tilegene {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch < 1) fail("batch must be >= 1");
  if (!(lr > 0)) fail("lr must be positive");
  if (!(weight_decay >= 0)) fail("weight_decay must be non-negative");
  if (!(gamma >= 0)) fail("gamma must be non-negative");
  if (plateau_patience < 1) fail("plateau_patience must be >= 1");
  if (!(plateau_factor > 1)) fail("plateau_factor must be > 1");
  if (!(clip_norm >= 0)) fail("clip_norm must be non-negative");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) fail("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0)) fail("adam_eps must be positive");
  if (!(improvement >= 0)) fail("improvement must be non-negative");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"batch", c.batch},
                     {"lr", c.lr},
                     {"weight_decay", c.weight_decay},
                     {"gamma", c.gamma},
                     {"plateau_patience", c.plateau_patience},
                     {"plateau_factor", c.plateau_factor},
                     {"seed", c.seed},
                     {"gene_loss", to_string(c.gene_loss)},
                     {"aggregation", to_string(c.aggregation)},
                     {"clip_norm", c.clip_norm},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"adam_eps", c.adam_eps},
                     {"improvement", c.improvement}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  j.at("epochs").get_to(c.epochs);
  j.at("batch").get_to(c.batch);
  j.at("lr").get_to(c.lr);
  j.at("weight_decay").get_to(c.weight_decay);
  j.at("gamma").get_to(c.gamma);
  j.at("plateau_patience").get_to(c.plateau_patience);
  j.at("plateau_factor").get_to(c.plateau_factor);
  j.at("seed").get_to(c.seed);
  c.gene_loss = parse_gene_loss(j.at("gene_loss").get<std::string>());
  c.aggregation = parse_aggregation(j.at("aggregation").get<std::string>());
  j.at("clip_norm").get_to(c.clip_norm);
  j.at("beta1").get_to(c.beta1);
  j.at("beta2").get_to(c.beta2);
  j.at("adam_eps").get_to(c.adam_eps);
  j.at("improvement").get_to(c.improvement);
}

template <typename T>
void adamw_step(std::span<Param<T>* const> params, AdamState<T>& state, double lr, double weight_decay,
                const AdamHyper& hyper) {
  for (const auto* p : params) {
    if (!p->grad.all_finite()) throw NonFiniteError("adamw_step: non-finite gradient in " + p->name);
  }
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adamw_step: optimizer state does not match parameters");
  ++state.step;
  const double bc1 = 1.0 - std::pow(hyper.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, double(state.step));
  const T b1 = T(hyper.beta1), b2 = T(hyper.beta2);
  const T decay = T(1.0 - lr * weight_decay);
  const T step_size = T(lr / bc1);
  const T inv_sqrt_bc2 = T(1.0 / std::sqrt(bc2));
  const T eps = T(hyper.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.shape() != p.value.shape()) throw ContractError("adamw_step: moment shape mismatch for " + p.name);
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const T g = p.grad[j];
      m[j] = b1 * m[j] + (T(1) - b1) * g;
      v[j] = b2 * v[j] + (T(1) - b2) * g * g;
      p.value[j] *= decay;
      p.value[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_bc2 + eps);
    }
  }
}

template <typename T>
double clip_grad_norm(std::span<Param<T>* const> params, double max_norm) {
  double sq = 0;
  for (const auto* p : params)
    for (T g : p->grad.data()) sq += double(g) * double(g);
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T s = T(max_norm / (norm + 1e-12));
    for (auto* p : params)
      for (auto& g : p->grad.data()) g *= s;
  }
  return norm;
}

template void adamw_step<float>(std::span<Param<float>* const>, AdamState<float>&, double, double, const AdamHyper&);
template void adamw_step<double>(std::span<Param<double>* const>, AdamState<double>&, double, double, const AdamHyper&);
template double clip_grad_norm<float>(std::span<Param<float>* const>, double);
template double clip_grad_norm<double>(std::span<Param<double>* const>, double);

bool PlateauScheduler::step(double val_loss) {
  if (val_loss < best * (1.0 - threshold)) {
    best = val_loss;
    bad_epochs = 0;
    return false;
  }
  if (++bad_epochs >= patience) {
    lr /= factor;
    bad_epochs = 0;
    return true;
  }
  return false;
}

namespace {

Tensor<float> target_of(const Bag& bag, std::size_t genes) {
  if (bag.gene_target.size() != genes) {
    throw DataError("bag " + bag.slide_id + " has " + std::to_string(bag.gene_target.size()) +
                    " gene targets, model expects " + std::to_string(genes));
  }
  return Tensor<float>({1, genes}, bag.gene_target);
}

}  // namespace

EvalLoss evaluate_loss(Model<float>& model, std::span<const Bag* const> bags, const TrainConfig& config) {
  EvalLoss out;
  if (bags.empty()) return out;
  const std::size_t genes = model.config().genes;
  std::map<std::string, std::vector<std::size_t>> votes;
  std::map<std::string, std::size_t> truth;
  double total = 0;
  Rng rng(0);
  ForwardOptions opt;
  opt.aggregation = config.aggregation;
  for (const Bag* bag : bags) {
    Tape<float> tape(false);
    auto fv = model.forward(tape, bag->instances, opt, rng);
    auto loss = total_loss(fv.logits, bag->label, fv.slide_genes, tape.constant(target_of(*bag, genes)),
                           float(config.gamma), config.gene_loss);
    total += loss.value()[0];
    const auto& lg = fv.logits.value();
    const auto pred = static_cast<std::size_t>(std::max_element(lg.data().begin(), lg.data().end()) - lg.data().begin());
    votes[bag->slide_id].push_back(pred);
    truth[bag->slide_id] = bag->label;
  }
  out.loss = total / double(bags.size());
  std::size_t correct = 0;
  for (const auto& [slide, v] : votes) correct += slide_vote(v) == truth[slide];
  out.slide_accuracy = double(correct) / double(votes.size());
  return out;
}

TrainResult train(Model<float> model, std::span<const Bag* const> train_bags, std::span<const Bag* const> val_bags,
                  const TrainConfig& config, const TrainState* resume, const TrainHooks& hooks,
                  const Model<float>* resume_best) {
  config.validate();
  if (train_bags.empty()) throw ConfigError("train: empty training set");
  if (val_bags.empty()) throw ConfigError("train: empty validation set");
  const auto& mc = model.config();

  TrainResult result;
  TrainState& st = result.state;
  if (resume) {
    st = *resume;
  } else {
    st.scheduler.lr = config.lr;
    st.scheduler.patience = config.plateau_patience;
    st.scheduler.factor = config.plateau_factor;
    st.scheduler.threshold = config.improvement;
  }
  result.best = resume_best ? *resume_best : model;

  auto params = model.parameters();
  const AdamHyper hyper{config.beta1, config.beta2, config.adam_eps};
  std::vector<std::size_t> order(train_bags.size());

  for (std::size_t epoch = st.epoch; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, "epoch", epoch));
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order.begin(), order.end(), rng);
    const double lr = st.scheduler.lr;
    double loss_sum = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch) {
      const std::size_t end = std::min(order.size(), begin + config.batch);
      ForwardOptions opt;
      opt.training = true;
      opt.top_n = mc.n_set[uniform_index(rng, mc.n_set.size())];
      model.zero_grad();
      Tape<float> tape;
      std::vector<Var<float>> losses;
      losses.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        const Bag& bag = *train_bags[order[i]];
        auto fv = model.forward(tape, bag.instances, opt, rng);
        losses.push_back(total_loss(fv.logits, bag.label, fv.slide_genes, tape.constant(target_of(bag, mc.genes)),
                                    float(config.gamma), config.gene_loss));
      }
      auto loss = ops::scale(ops::add_n<float>(std::span<const Var<float>>(losses)), 1.0f / float(end - begin));
      tape.backward(loss);
      if (config.clip_norm > 0) clip_grad_norm<float>(std::span<Param<float>* const>(params), config.clip_norm);
      adamw_step<float>(std::span<Param<float>* const>(params), st.adam, lr, config.weight_decay, hyper);
      loss_sum += double(loss.value()[0]) * double(end - begin);
    }
    EpochMetrics em;
    em.epoch = epoch + 1;
    em.train_loss = loss_sum / double(order.size());
    const auto val = evaluate_loss(model, val_bags, config);
    em.val_loss = val.loss;
    em.val_accuracy = val.slide_accuracy;
    em.lr = lr;
    st.log.push_back(em);
    st.epoch = epoch + 1;
    st.scheduler.step(val.loss);
    if (hooks.verbose) {
      std::fprintf(stderr, "epoch %zu  train %.5f  val %.5f  acc %.4f  lr %.3g\n", em.epoch, em.train_loss,
                   em.val_loss, em.val_accuracy, em.lr);
    }
    if (val.loss < st.best_val) {
      st.best_val = val.loss;
      st.best_epoch = em.epoch;
      result.best = model;
      if (hooks.on_improve) hooks.on_improve(model, st);
    }
    if (hooks.on_epoch_end) hooks.on_epoch_end(model, st);
  }
  result.last = std::move(model);
  return result;
}

std::string metrics_csv(std::span<const EpochMetrics> log) {
  std::string out = "epoch,train_loss,val_loss,val_accuracy,lr\n";
  char buf[256];
  for (const auto& m : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g\n", m.epoch, m.train_loss, m.val_loss, m.val_accuracy,
                  m.lr);
    out += buf;
  }
  return out;
}

}  // namespace tilegene
