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

#include <cstdio>
#include <functional>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "tilegene/errors.hpp"

namespace tilegene::cli {

namespace {

struct Sub {
  CLI::App* app = nullptr;
  ConfigSources sources;
  std::function<int(const RunConfig&)> run;
};

// Options every subcommand understands.
void add_common(Sub& s) {
  s.app->add_option("--config", s.sources.file, "JSON config file (sections model, train, synth, bag, split, eval, run)")
      ->check(CLI::ExistingFile);
  s.app->add_option("--set", s.sources.sets, "Override a config key: section.key=value (repeatable)");
  s.app->add_option("--workers", s.sources.workers, "Worker threads (default: all cores)");
  s.app->add_flag("-v,--verbose", s.sources.verbose, "Progress output on stderr");
}

// A flag that writes one config key.
void add_key_flag(Sub& s, const std::string& flag, const std::string& key, const std::string& help) {
  s.app->add_option_function<std::string>(
      flag, [&s, key](const std::string& v) { s.sources.flags[key] = v; }, help + " [" + key + "]");
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"tilegene: transformer MIL for slide classification and gene expression"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Sub>> subs;
  auto make = [&](const std::string& name, const std::string& help) -> Sub& {
    subs.push_back(std::make_unique<Sub>());
    subs.back()->app = app.add_subcommand(name, help);
    add_common(*subs.back());
    return *subs.back();
  };

  SynthArgs synth;
  auto& s_synth = make("synth", "Generate a seeded synthetic bag dataset");
  s_synth.app->add_option("--out", synth.out, "Output dataset directory")->required();
  add_key_flag(s_synth, "--seed", "synth.seed", "Random seed");
  add_key_flag(s_synth, "--classes", "synth.classes", "Number of classes");
  add_key_flag(s_synth, "--slides-per-class", "synth.slides_per_class", "Slides per class");
  add_key_flag(s_synth, "--bags-per-slide", "synth.bags_per_slide", "Bags per slide");
  add_key_flag(s_synth, "--dim", "synth.d", "Embedding width d");
  add_key_flag(s_synth, "--genes", "synth.genes", "Number of genes");
  s_synth.run = [&](const RunConfig& c) { return run_synth(synth, c); };

  BagArgs bag;
  auto& s_bag = make("bag", "Cluster tiles and sample bags from tile embedding tables");
  s_bag.app->add_option("--input", bag.input, "Input manifest JSON (class_names, slides)")->required()->check(CLI::ExistingFile);
  s_bag.app->add_option("--out", bag.out, "Output dataset directory")->required();
  s_bag.app->add_option("--genes", bag.genes, "Preprocessed expression matrix TSV (output of `genes`)")
      ->check(CLI::ExistingFile);
  s_bag.app->add_flag("--raw-genes", bag.raw_genes, "Apply the median filter and log transform to --genes first");
  add_key_flag(s_bag, "--seed", "bag.seed", "Random seed");
  add_key_flag(s_bag, "--bags-per-slide", "bag.bags_per_slide", "Bags per slide");
  s_bag.run = [&](const RunConfig& c) { return run_bag(bag, c); };

  GenesArgs genes;
  auto& s_genes = make("genes", "Filter zero-median genes and log-transform expression");
  auto* g_matrix = s_genes.app->add_option("--matrix", genes.matrix, "Matrix TSV: gene_id then one column per case")
                       ->check(CLI::ExistingFile);
  auto* g_dir = s_genes.app->add_option("--case-dir", genes.case_dir, "Directory of <case_id>.tsv files (gene, value)")
                    ->check(CLI::ExistingDirectory);
  g_matrix->excludes(g_dir);
  s_genes.app->add_option("--out", genes.out, "Output directory")->required();
  s_genes.run = [&](const RunConfig& c) {
    if (!genes.matrix && !genes.case_dir) throw ConfigError("genes: one of --matrix or --case-dir is required");
    return run_genes(genes, c);
  };

  SplitArgs split;
  auto& s_split = make("split", "Stratified case-level train/val/test split");
  s_split.app->add_option("--cases", split.cases, "TSV of case_id<TAB>label")->required()->check(CLI::ExistingFile);
  s_split.app->add_option("--out", split.out, "Output directory")->required();
  add_key_flag(s_split, "--seed", "split.seed", "Random seed");
  s_split.run = [&](const RunConfig& c) { return run_split(split, c); };

  TrainArgs train;
  auto& s_train = make("train", "Train a model on a bag dataset");
  s_train.app->add_option("--data", train.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  s_train.app->add_option("--out", train.out, "Run directory")->required();
  s_train.app->add_option("--resume", train.resume, "Run directory or checkpoint to continue from")
      ->check(CLI::ExistingPath);
  add_key_flag(s_train, "--seed", "train.seed", "Random seed");
  add_key_flag(s_train, "--epochs", "train.epochs", "Epochs");
  add_key_flag(s_train, "--lr", "train.lr", "Initial learning rate");
  add_key_flag(s_train, "--batch", "train.batch", "Mini-batch size");
  add_key_flag(s_train, "--layers", "model.layers", "Encoder depth L");
  add_key_flag(s_train, "--width", "model.width", "Model width D");
  add_key_flag(s_train, "--heads", "model.heads", "Attention heads");
  s_train.run = [&](const RunConfig& c) { return run_train(train, c); };

  EvalArgs eval;
  auto& s_eval = make("eval", "Gene, error and classification reports for a checkpoint");
  s_eval.app->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  s_eval.app->add_option("--data", eval.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  s_eval.app->add_option("--out", eval.out, "Report directory")->required();
  add_key_flag(s_eval, "--split", "eval.split", "Split to evaluate (train, val, test)");
  add_key_flag(s_eval, "--alpha", "eval.alpha", "Significance level after correction");
  s_eval.run = [&](const RunConfig& c) { return run_eval(eval, c); };

  EvalArgs search;
  auto& s_search = make("search", "Leave-one-patient-out slide search (MAP@K)");
  s_search.app->add_option("--checkpoint", search.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  s_search.app->add_option("--data", search.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  s_search.app->add_option("--out", search.out, "Report directory")->required();
  add_key_flag(s_search, "--subsets", "eval.subsets", "Number of search subsets");
  std::string ks;
  s_search.app->add_option_function<std::string>(
      "--k", [&](const std::string& v) { ks = v; }, "Comma-separated K values [eval.ks]");
  add_key_flag(s_search, "--split", "eval.split", "Split to search (train, val, test)");
  s_search.run = [&](const RunConfig& c) { return run_search(search, c); };

  ValidateArgs validate;
  auto& s_validate = make("validate", "Check bag files or dataset directories");
  s_validate.app->add_option("paths", validate.paths, "Bag files (.trnb) or dataset directories")->required();
  s_validate.app->add_option("--k", validate.k, "Expected instances per bag");
  s_validate.app->add_option("--d", validate.d, "Expected embedding width");
  s_validate.app->add_option("--genes", validate.genes, "Expected gene target count");
  s_validate.app->add_option("--classes", validate.classes, "Number of classes (label bound)");
  s_validate.run = [&](const RunConfig& c) { return run_validate(validate, c); };

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (auto& s : subs) {
      if (!s->app->parsed()) continue;
      if (s.get() == &s_search && !ks.empty()) s->sources.flags["eval.ks"] = "[" + ks + "]";
      const auto config = resolve_config(s->sources);
      return s->run(config);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace tilegene::cli
