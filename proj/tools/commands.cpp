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

#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "tilegene/checkpoint.hpp"
#include "tilegene/dataset.hpp"
#include "tilegene/evaluate.hpp"
#include "tilegene/genes.hpp"
#include "tilegene/pipeline.hpp"
#include "tilegene/rng.hpp"
#include "tilegene/synth.hpp"
#include "tilegene/trainer.hpp"

extern char** environ;

namespace fs = std::filesystem;

namespace tilegene::cli {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

void echo_config(const std::string& dir, const RunConfig& config) {
  fs::create_directories(dir);
  write_json(fs::path(dir) / "config.json", config_to_json(config));
}

std::vector<std::string> gene_ids_for(const Checkpoint& ck, const std::string& data_dir, const DatasetManifest& m) {
  if (ck.meta.contains("gene_ids")) return ck.meta.at("gene_ids").get<std::vector<std::string>>();
  return read_gene_index((fs::path(data_dir) / m.gene_index).string());
}

std::vector<std::string> class_names_for(const Checkpoint& ck, const DatasetManifest& m) {
  if (ck.meta.contains("class_names")) return ck.meta.at("class_names").get<std::vector<std::string>>();
  return m.class_names;
}

void check_compatible(const ModelConfig& mc, const DatasetManifest& m) {
  if (mc.instances != m.k || mc.input_dim != m.d || mc.genes != m.genes || mc.classes != m.classes) {
    throw DataError("checkpoint model (k=" + std::to_string(mc.instances) + ", d=" + std::to_string(mc.input_dim) +
                    ", G=" + std::to_string(mc.genes) + ", C=" + std::to_string(mc.classes) +
                    ") does not match the dataset (k=" + std::to_string(m.k) + ", d=" + std::to_string(m.d) +
                    ", G=" + std::to_string(m.genes) + ", C=" + std::to_string(m.classes) + ")");
  }
}

struct Predicted {
  LoadedDataset data;
  std::vector<const Bag*> bags;
  BagPredictions preds;
  SlideSummary slides;
};

Predicted predict_split(const Checkpoint& ck, const std::string& data_dir, const RunConfig& config) {
  Predicted p;
  p.data = load_dataset(data_dir, config.eval.split, config.workers());
  check_compatible(ck.model.config(), p.data.manifest);
  p.bags = p.data.in(config.eval.split);
  if (p.bags.empty()) throw DataError(data_dir + ": no bags in the " + split_name(config.eval.split) + " split");
  p.preds = predict_bags(ck.model, p.bags, ck.train.aggregation, config.workers());
  p.slides = summarize_slides(p.bags, p.preds);
  return p;
}

}  // namespace

RunConfig resolve_config(const ConfigSources& sources) {
  ConfigBuilder b;
  if (sources.file) b.merge_file(*sources.file);
  b.merge_environment(environ);
  for (const auto& s : sources.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got \"" + s + "\"");
    b.set(s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [key, value] : sources.flags) b.set(key, value, "command line");
  if (sources.workers) b.set("run.workers", std::to_string(*sources.workers), "--workers");
  if (sources.verbose) b.set("run.verbose", "true", "--verbose");
  return b.resolve();
}

int run_synth(const SynthArgs& args, const RunConfig& config) {
  auto data = generate(config.synth, config.workers());
  write_dataset(args.out, data);
  const auto bayes = oracle_bayes_accuracy(config.synth);
  write_json(fs::path(args.out) / "bayes.json", {{"accuracy", bayes.accuracy},
                                                 {"ci95", {bayes.ci_low, bayes.ci_high}},
                                                 {"draws", bayes.draws}});
  echo_config(args.out, config);
  std::printf("synth: %zu slides, %zu bags, %zu genes -> %s (Bayes accuracy %.4f)\n", data.manifest.slides.size(),
              data.manifest.bag_count(), data.manifest.genes, args.out.c_str(), bayes.accuracy);
  return 0;
}

int run_genes(const GenesArgs& args, const RunConfig& config) {
  GeneTable raw;
  if (args.matrix) {
    raw = ingest_expression_matrix(*args.matrix);
  } else {
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& e : fs::directory_iterator(*args.case_dir)) {
      if (e.is_regular_file() && e.path().extension() == ".tsv") files.emplace_back(e.path().stem().string(), e.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError(*args.case_dir + ": no .tsv case files");
    raw = ingest_expression_files(files);
  }
  const auto table = preprocess_genes(raw);
  fs::create_directories(args.out);
  write_gene_matrix((fs::path(args.out) / "expression.tsv").string(), table);
  write_gene_index((fs::path(args.out) / "genes.json").string(), table);
  echo_config(args.out, config);
  std::printf("genes: %zu cases, kept %zu genes, dropped %zu with zero median\n", table.num_cases(), table.num_genes(),
              table.dropped_ids.size());
  return 0;
}

int run_split(const SplitArgs& args, const RunConfig& config) {
  const auto cases = read_case_labels(args.cases);
  const auto split = split_cases(cases, config.split.fractions, config.split.seed);
  nlohmann::json assignment = nlohmann::json::object();
  for (const auto& [id, s] : split.assignment) assignment[id] = split_name(s);
  fs::create_directories(args.out);
  write_json(fs::path(args.out) / "split.json",
             {{"fractions", config.split.fractions}, {"seed", config.split.seed}, {"cases", assignment}});
  echo_config(args.out, config);
  std::printf("split: %zu train, %zu val, %zu test cases\n", split.cases_in(Split::kTrain).size(),
              split.cases_in(Split::kVal).size(), split.cases_in(Split::kTest).size());
  return 0;
}

int run_bag(const BagArgs& args, const RunConfig& config) {
  const auto input = read_bag_input(args.input);
  std::optional<GeneTable> genes;
  if (args.genes) {
    genes = ingest_expression_matrix(*args.genes);
    if (args.raw_genes) genes = preprocess_genes(*genes);
  }
  const auto run = run_bagging(input, args.out, config, genes ? &*genes : nullptr);
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : run.failures) {
    failures.push_back({{"slide_id", f.slide_id}, {"error", f.error}});
    std::fprintf(stderr, "bag: slide %s failed: %s\n", f.slide_id.c_str(), f.error.c_str());
  }
  for (const auto& w : run.warnings) std::fprintf(stderr, "bag: warning: %s\n", w.c_str());
  fs::create_directories(args.out);
  write_json(fs::path(args.out) / "failures.json", {{"failures", failures}, {"warnings", run.warnings}});
  echo_config(args.out, config);
  std::printf("bag: %zu slides, %zu bags, %zu failed\n", run.manifest.slides.size(), run.manifest.bag_count(),
              run.failures.size());
  return run.failures.empty() ? 0 : 1;
}

int run_train(const TrainArgs& args, const RunConfig& config_in) {
  RunConfig config = config_in;
  auto data = load_dataset(args.data, std::nullopt, config.workers());
  const auto& m = data.manifest;
  config.model.instances = m.k;
  config.model.input_dim = m.d;
  config.model.genes = m.genes;
  config.model.classes = m.classes;
  config.model.validate();

  const auto train_bags = data.in(Split::kTrain);
  const auto val_bags = data.in(Split::kVal);
  if (train_bags.empty()) throw ConfigError("train: dataset has no training bags");
  if (val_bags.empty()) throw ConfigError("train: dataset has no validation bags");

  nlohmann::json meta = {{"class_names", m.class_names},
                         {"gene_ids", read_gene_index((fs::path(args.data) / m.gene_index).string())}};

  Model<float> model(config.model);
  std::optional<TrainState> resume_state;
  std::optional<Model<float>> resume_best;
  if (args.resume) {
    fs::path p(*args.resume);
    const auto last = fs::is_directory(p) ? p / "last.ckpt" : p;
    auto ck = load_checkpoint(last.string());
    if (!(ck.model.config() == config.model)) throw ConfigError("--resume: checkpoint model config differs from this run");
    auto stored = ck.train;
    stored.epochs = config.train.epochs;
    if (!(stored == config.train)) throw ConfigError("--resume: checkpoint train config differs from this run");
    model = std::move(ck.model);
    resume_state = std::move(ck.state);
    const auto best = last.parent_path() / "best.ckpt";
    if (fs::exists(best)) resume_best = load_checkpoint(best.string()).model;
  } else {
    model.initialize(derive_seed(config.train.seed, "init"));
  }

  fs::create_directories(args.out);
  echo_config(args.out, config);
  const fs::path out(args.out);
  TrainHooks hooks;
  hooks.verbose = config.run.verbose;
  hooks.on_improve = [&](const Model<float>& best, const TrainState& st) {
    save_checkpoint((out / "best.ckpt").string(), {best, config.train, st, meta});
  };
  hooks.on_epoch_end = [&](const Model<float>& last, const TrainState& st) {
    save_checkpoint((out / "last.ckpt").string(), {last, config.train, st, meta});
    write_text(out / "metrics.csv", metrics_csv(st.log));
  };
  const auto result = train(std::move(model), train_bags, val_bags, config.train,
                            resume_state ? &*resume_state : nullptr, hooks, resume_best ? &*resume_best : nullptr);
  const auto& st = result.state;
  write_text(out / "metrics.csv", metrics_csv(st.log));
  write_json(out / "summary.json", {{"epochs", st.epoch},
                                    {"best_epoch", st.best_epoch},
                                    {"best_val_loss", st.best_val},
                                    {"train_bags", train_bags.size()},
                                    {"val_bags", val_bags.size()},
                                    {"parameters", result.last.parameter_count()}});
  std::printf("train: %zu epochs, best epoch %zu (val loss %.6g) -> %s\n", st.epoch, st.best_epoch, st.best_val,
              (out / "best.ckpt").c_str());
  return 0;
}

int run_eval(const EvalArgs& args, const RunConfig& config) {
  const auto ck = load_checkpoint(args.checkpoint);
  auto p = predict_split(ck, args.data, config);
  const auto& s = p.slides;
  const auto& mc = ck.model.config();
  const fs::path out(args.out);
  fs::create_directories(out);
  echo_config(args.out, config);

  const auto class_names = class_names_for(ck, p.data.manifest);
  const auto cls = classification_report(s.predicted, s.truth, s.scores, mc.classes);
  write_json(out / "classification.json", classification_json(cls, class_names));
  write_text(out / "roc.csv", roc_csv(cls.micro_roc));
  write_text(out / "slide_predictions.csv", slide_predictions_csv(s));

  nlohmann::json report = {{"split", split_name(config.eval.split)},
                           {"slides", s.slide_ids.size()},
                           {"bags", p.bags.size()},
                           {"classification", classification_json(cls, class_names)}};
  const auto gene_ids = gene_ids_for(ck, args.data, p.data.manifest);
  if (s.slide_ids.size() >= 3) {
    const auto genes = gene_report(s.gene_pred, s.gene_truth, gene_ids, config.eval.alpha, config.workers());
    const auto errors = prediction_errors(s.gene_pred, s.gene_truth);
    write_text(out / "gene_report.csv", gene_report_csv(genes));
    write_text(out / "errors.csv", error_report_csv(errors, gene_ids));
    report["genes"] = gene_report_json(genes);
    report["errors"] = error_report_json(errors);
  } else {
    std::fprintf(stderr, "eval: warning: %zu slides, gene statistics need at least 3\n", s.slide_ids.size());
  }
  if (p.bags.size() >= 2) {
    const auto pca = pca_export(s, p.preds);
    write_text(out / "pca.csv", pca_csv(pca, s));
    report["pca_explained_variance"] = pca.pca.explained_variance;
  }
  write_json(out / "report.json", report);
  std::printf("eval: %zu slides, accuracy %.4f, macro F1 %.4f", s.slide_ids.size(), cls.accuracy, cls.f1_macro);
  if (report.contains("genes")) std::printf(", mean Pearson r %s", report["genes"]["mean_pearson_r"].dump().c_str());
  std::printf("\n");
  return 0;
}

int run_search(const EvalArgs& args, const RunConfig& config) {
  const auto ck = load_checkpoint(args.checkpoint);
  auto p = predict_split(ck, args.data, config);
  const auto subsets = build_search_subsets(p.slides, p.preds, config.eval.subsets);
  const auto rep = search_eval(subsets, config.eval.ks, config.eval.ap);
  if (rep.subsets_skipped) {
    std::fprintf(stderr, "search: warning: %zu subsets skipped (fewer than two patients)\n", rep.subsets_skipped);
  }
  fs::create_directories(args.out);
  echo_config(args.out, config);
  write_json(fs::path(args.out) / "search.json", search_json(rep));
  std::printf("search:");
  for (const auto& [K, v] : rep.map_at) std::printf(" MAP@%zu %.4f", K, v);
  std::printf(" over %zu subsets\n", rep.subsets_used);
  return 0;
}

int run_validate(const ValidateArgs& args, const RunConfig& config) {
  std::size_t bad = 0;
  for (const auto& path : args.paths) {
    std::vector<std::string> problems;
    if (fs::is_directory(path)) {
      problems = validate_dataset(path, config.workers());
    } else {
      try {
        problems = validate_bag(read_bag(path), {args.k, args.d, args.genes, args.classes});
      } catch (const std::exception& e) {
        problems.push_back(e.what());
      }
    }
    if (problems.empty()) {
      std::printf("OK %s\n", path.c_str());
    } else {
      ++bad;
      for (const auto& p : problems) std::printf("FAIL %s: %s\n", path.c_str(), p.c_str());
    }
  }
  return bad ? 1 : 0;
}

}  // namespace tilegene::cli
