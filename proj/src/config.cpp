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

#include "tilegene/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <thread>

namespace tilegene {

namespace {

const char* origin_name(CenterOrigin o) { return o == CenterOrigin::kImageOrigin ? "image" : "tissue"; }

CenterOrigin parse_origin(const std::string& s) {
  if (s == "image") return CenterOrigin::kImageOrigin;
  if (s == "tissue") return CenterOrigin::kTissueCentroid;
  throw ConfigError("unknown cluster origin \"" + s + "\" (expected image or tissue)");
}

const char* ap_name(ApNormalization a) { return a == ApNormalization::kK ? "k" : "relevant"; }

ApNormalization parse_ap(const std::string& s) {
  if (s == "k") return ApNormalization::kK;
  if (s == "relevant") return ApNormalization::kRelevant;
  throw ConfigError("unknown AP normalization \"" + s + "\" (expected k or relevant)");
}

std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

// Checks that `patch` only uses keys and value kinds present in `base`.
void merge_checked(nlohmann::json& base, const nlohmann::json& patch, const std::string& path,
                   const std::string& origin) {
  if (!patch.is_object()) throw ConfigError(origin + ": " + (path.empty() ? "config" : path) + " must be an object");
  for (const auto& [key, value] : patch.items()) {
    const auto where = join(path, key);
    if (!base.contains(key)) throw ConfigError(origin + ": unknown config key " + where);
    auto& target = base[key];
    if (target.is_object()) {
      merge_checked(target, value, where, origin);
      continue;
    }
    const bool ok = (target.is_number_unsigned() && value.is_number_unsigned()) ||
                    (target.is_number_integer() && !target.is_number_unsigned() && value.is_number_integer()) ||
                    (target.is_number_float() && value.is_number()) ||
                    (target.is_boolean() && value.is_boolean()) || (target.is_string() && value.is_string()) ||
                    (target.is_array() && value.is_array());
    if (!ok) {
      throw ConfigError(origin + ": " + where + " expects a value like " + target.dump() + ", got " + value.dump());
    }
    target = value;
  }
}

}  // namespace

std::size_t RunConfig::workers() const {
  return run.workers ? run.workers : std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void RunConfig::validate() const {
  // genes = 0 means "take from the dataset"; everything else must be valid now.
  auto m = model;
  m.genes = std::max<std::size_t>(m.genes, 1);
  m.validate();
  train.validate();
  synth.validate();
  if (bag.bags_per_slide < 1 || bag.clusters < 1 || bag.tile < 1 || bag.max_iterations < 1) {
    throw ConfigError("bag: counts must be positive");
  }
  if (!(bag.min_tissue >= 0 && bag.min_tissue <= 1)) throw ConfigError("bag: min_tissue must lie in [0, 1]");
  double sum = 0;
  for (double f : split.fractions) {
    if (!(f >= 0)) throw ConfigError("split: fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");
  if (!(eval.alpha > 0 && eval.alpha < 1)) throw ConfigError("eval: alpha must lie in (0, 1)");
  if (eval.subsets < 1) throw ConfigError("eval: subsets must be >= 1");
  if (eval.ks.empty() || std::count(eval.ks.begin(), eval.ks.end(), std::size_t{0})) {
    throw ConfigError("eval: ks must be a non-empty list of positive integers");
  }
}

nlohmann::json config_to_json(const RunConfig& c) {
  return {{"model", c.model},
          {"train", c.train},
          {"synth", c.synth},
          {"bag",
           {{"bags_per_slide", c.bag.bags_per_slide},
            {"clusters", c.bag.clusters},
            {"tile", c.bag.tile},
            {"min_tissue", c.bag.min_tissue},
            {"origin", origin_name(c.bag.origin)},
            {"max_iterations", c.bag.max_iterations},
            {"seed", c.bag.seed}}},
          {"split", {{"fractions", c.split.fractions}, {"seed", c.split.seed}}},
          {"eval",
           {{"alpha", c.eval.alpha},
            {"subsets", c.eval.subsets},
            {"ks", c.eval.ks},
            {"ap", ap_name(c.eval.ap)},
            {"split", split_name(c.eval.split)}}},
          {"run", {{"workers", c.run.workers}, {"verbose", c.run.verbose}}}};
}

RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    j.at("model").get_to(c.model);
    j.at("train").get_to(c.train);
    j.at("synth").get_to(c.synth);
    const auto& b = j.at("bag");
    b.at("bags_per_slide").get_to(c.bag.bags_per_slide);
    b.at("clusters").get_to(c.bag.clusters);
    b.at("tile").get_to(c.bag.tile);
    b.at("min_tissue").get_to(c.bag.min_tissue);
    c.bag.origin = parse_origin(b.at("origin").get<std::string>());
    b.at("max_iterations").get_to(c.bag.max_iterations);
    b.at("seed").get_to(c.bag.seed);
    j.at("split").at("fractions").get_to(c.split.fractions);
    j.at("split").at("seed").get_to(c.split.seed);
    const auto& e = j.at("eval");
    e.at("alpha").get_to(c.eval.alpha);
    e.at("subsets").get_to(c.eval.subsets);
    e.at("ks").get_to(c.eval.ks);
    c.eval.ap = parse_ap(e.at("ap").get<std::string>());
    c.eval.split = parse_split(e.at("split").get<std::string>());
    j.at("run").at("workers").get_to(c.run.workers);
    j.at("run").at("verbose").get_to(c.run.verbose);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  return c;
}

ConfigBuilder::ConfigBuilder() : tree_(config_to_json(RunConfig{})) {}

void ConfigBuilder::merge(const nlohmann::json& patch, const std::string& origin) {
  merge_checked(tree_, patch, "", origin);
}

void ConfigBuilder::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  merge(j, path);
}

void ConfigBuilder::set(const std::string& dotted_key, const std::string& value, const std::string& origin) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string::npos) throw ConfigError(origin + ": expected section.key, got \"" + dotted_key + "\"");
  const auto section = dotted_key.substr(0, dot), key = dotted_key.substr(dot + 1);
  if (!tree_.contains(section)) throw ConfigError(origin + ": unknown config section " + section);
  if (!tree_[section].contains(key)) throw ConfigError(origin + ": unknown config key " + dotted_key);
  nlohmann::json v;
  if (tree_[section][key].is_string()) {
    v = value;
  } else {
    try {
      v = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(origin + ": cannot parse value \"" + value + "\" for " + dotted_key);
    }
  }
  merge({{section, {{key, v}}}}, origin);
}

void ConfigBuilder::merge_environment(char** env) {
  static constexpr std::string_view kPrefix = "TILEGENE_";
  if (!env) return;
  for (; *env; ++env) {
    std::string entry(*env);
    if (entry.rfind(kPrefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string name = entry.substr(kPrefix.size(), eq - kPrefix.size());
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return char(std::tolower(ch)); });
    std::string section;
    for (const auto& [s, _] : tree_.items()) {
      if (name.rfind(s + "_", 0) == 0) section = s;
    }
    if (section.empty()) throw ConfigError("environment: " + entry.substr(0, eq) + " names no config section");
    set(section + "." + name.substr(section.size() + 1), entry.substr(eq + 1), "environment " + entry.substr(0, eq));
  }
}

RunConfig ConfigBuilder::resolve() const {
  auto c = config_from_json(tree_);
  c.validate();
  return c;
}

}  // namespace tilegene
