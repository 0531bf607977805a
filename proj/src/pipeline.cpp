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

#include "tilegene/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tilegene/parallel.hpp"
#include "tilegene/rng.hpp"
#include "tilegene/wsi.hpp"

namespace fs = std::filesystem;

namespace tilegene {

BagInput read_bag_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open bag input manifest " + path);
  const auto base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };
  BagInput input;
  try {
    const auto j = nlohmann::json::parse(in);
    j.at("class_names").get_to(input.class_names);
    for (const auto& s : j.at("slides")) {
      SlideSource src;
      s.at("slide_id").get_to(src.slide_id);
      src.case_id = s.value("case_id", src.slide_id);
      s.at("label").get_to(src.label);
      src.embeddings = resolve(s.at("embeddings").get<std::string>());
      if (s.contains("thumbnail")) src.thumbnail = resolve(s.at("thumbnail").get<std::string>());
      input.slides.push_back(std::move(src));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  if (input.class_names.size() < 2) throw InputError(path + ": need at least two class names");
  for (const auto& s : input.slides) {
    if (s.label >= input.class_names.size()) throw InputError(path + ": slide " + s.slide_id + " label out of range");
  }
  return input;
}

SlideBagResult bag_slide(const SlideSource& slide, const BagConfig& config, const GeneTable* genes,
                         std::uint64_t seed) {
  const auto embeddings = read_tile_embeddings(slide.embeddings);
  std::vector<TileCoord> tiles;
  if (slide.thumbnail) {
    const auto mask = tissue_mask(read_ppm(*slide.thumbnail));
    for (const auto& t : select_tiles(mask, config.tile, config.min_tissue)) {
      if (!embeddings.contains(t.row, t.col)) {
        throw DataError("tissue tile (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                        ") has no embedding");
      }
      tiles.push_back(t);
    }
  } else {
    tiles = embeddings.tiles();
  }
  if (tiles.empty()) throw DataError("no tissue tiles");

  BagMeta meta{slide.slide_id, slide.case_id, slide.label, {}};
  if (genes) {
    const auto row = genes->case_index(slide.case_id);
    if (!row) throw DataError("case " + slide.case_id + " missing from the gene table");
    const auto values = genes->case_row(*row);
    meta.gene_target.assign(values.begin(), values.end());
  }
  KMeansOptions ko;
  ko.k = config.clusters;
  ko.max_iterations = config.max_iterations;
  ko.origin = config.origin;
  const auto assignment = cluster_tiles(tiles, derive_seed(seed, "kmeans"), ko);
  SlideBagResult out;
  out.tiles = tiles.size();
  out.degenerate = assignment.degenerate;
  out.bags = sample_bags(assignment, tiles, embeddings, config.bags_per_slide, derive_seed(seed, "bags"), meta);
  return out;
}

BagRunResult run_bagging(const BagInput& input, const std::string& out_dir, const RunConfig& config,
                         const GeneTable* genes) {
  const std::size_t n = input.slides.size();
  std::vector<std::optional<SlideBagResult>> results(n);
  std::vector<std::string> errors(n);
  parallel_for(n, config.workers(), [&](std::size_t i) {
    const auto& s = input.slides[i];
    try {
      results[i] = bag_slide(s, config.bag, genes, derive_seed(config.bag.seed, s.slide_id, 0));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  BagRunResult run;
  auto& m = run.manifest;
  m.k = config.bag.clusters;
  m.genes = genes ? genes->num_genes() : 0;
  m.classes = input.class_names.size();
  m.class_names = input.class_names;
  m.fractions = config.split.fractions;
  m.seed = config.split.seed;

  std::vector<CaseLabel> cases;
  std::set<std::string> seen_cases;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = input.slides[i];
    if (!results[i]) {
      run.failures.push_back({s.slide_id, errors[i]});
      continue;
    }
    if (m.d == 0) m.d = results[i]->bags.front().d();
    if (results[i]->bags.front().d() != m.d) {
      run.failures.push_back({s.slide_id, "embedding width differs from other slides"});
      results[i].reset();
      continue;
    }
    if (results[i]->degenerate) {
      run.warnings.push_back(s.slide_id + ": " + std::to_string(results[i]->tiles) + " tiles for " +
                             std::to_string(config.bag.clusters) + " clusters; bags repeat tiles");
    }
    if (seen_cases.insert(s.case_id).second) cases.push_back({s.case_id, s.label});
  }
  if (cases.empty()) return run;

  const auto split = split_cases(cases, config.split.fractions, config.split.seed, m.classes);
  for (std::size_t i = 0; i < n; ++i) {
    if (!results[i]) continue;
    const auto& s = input.slides[i];
    SlideEntry e{s.slide_id, s.case_id, s.label, split.of(s.case_id), {}};
    write_slide_bags(out_dir, e, results[i]->bags);
    m.slides.push_back(std::move(e));
  }
  GeneTable index;
  if (genes) index = *genes;
  write_gene_index((fs::path(out_dir) / m.gene_index).string(), index);
  write_manifest(out_dir, m);
  return run;
}

GeneTable preprocess_genes(const GeneTable& raw) { return log_transform(filter_median_zero(raw)); }

std::vector<CaseLabel> read_case_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::vector<CaseLabel> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError(path + ": expected case_id<TAB>label", lineno);
    const auto id = line.substr(0, tab), label = line.substr(tab + 1);
    if (lineno == 1 && id == "case_id") continue;
    try {
      std::size_t used = 0;
      const auto v = std::stoul(label, &used);
      if (used != label.size()) throw std::invalid_argument(label);
      out.push_back({id, static_cast<std::uint32_t>(v)});
    } catch (const std::logic_error&) {
      throw FormatError(path + ": label must be a class index", lineno);
    }
  }
  return out;
}

}  // namespace tilegene
