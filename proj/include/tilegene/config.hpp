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

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tilegene/metrics.hpp"
#include "tilegene/model.hpp"
#include "tilegene/synth.hpp"
#include "tilegene/trainer.hpp"
#include "tilegene/wsi.hpp"

namespace tilegene {

struct BagConfig {
  std::size_t bags_per_slide = 100;
  std::size_t clusters = kClusters;
  std::size_t tile = kTilePixels;
  double min_tissue = 0.5;
  CenterOrigin origin = CenterOrigin::kImageOrigin;
  std::size_t max_iterations = 300;
  std::uint64_t seed = 0;
};

struct SplitConfig {
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;
};

struct EvalConfig {
  double alpha = 0.01;
  std::size_t subsets = 100;
  std::vector<std::size_t> ks{5, 10};
  ApNormalization ap = ApNormalization::kK;
  Split split = Split::kTest;
};

struct RunOptions {
  std::size_t workers = 0;  // 0: all available cores
  bool verbose = false;
};

// Sections: model, train, synth, bag, split, eval, run. Precedence, lowest
// first: defaults, --config file, TILEGENE_<SECTION>_<KEY> environment
// variables, --set section.key=value and dedicated flags.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SynthSpec synth;
  BagConfig bag;
  SplitConfig split;
  EvalConfig eval;
  RunOptions run;

  std::size_t workers() const;
  void validate() const;
};

nlohmann::json config_to_json(const RunConfig& c);
RunConfig config_from_json(const nlohmann::json& j);

// Mutable JSON view used while layering sources; every key must already
// exist in the defaults.
class ConfigBuilder {
 public:
  ConfigBuilder();

  void merge(const nlohmann::json& patch, const std::string& origin);
  void merge_file(const std::string& path);
  void set(const std::string& dotted_key, const std::string& value, const std::string& origin = "--set");
  // Applies TILEGENE_* variables from `env` (a null-terminated environ-style array).
  void merge_environment(char** env);

  const nlohmann::json& tree() const { return tree_; }
  RunConfig resolve() const;

 private:
  nlohmann::json tree_;
};

}  // namespace tilegene
