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

#include <optional>
#include <string>
#include <vector>

#include "tilegene/config.hpp"
#include "tilegene/dataset.hpp"
#include "tilegene/genes.hpp"

namespace tilegene {

// One entry of a `bag` input manifest. Tile embeddings are keyed by tile
// grid position; with a thumbnail, only tiles whose window passes the
// tissue filter are kept.
struct SlideSource {
  std::string slide_id;
  std::string case_id;
  std::uint32_t label = 0;
  std::string embeddings;
  std::optional<std::string> thumbnail;
};

struct BagInput {
  std::vector<std::string> class_names;
  std::vector<SlideSource> slides;
};

// Relative paths resolve against the manifest's directory.
BagInput read_bag_input(const std::string& path);

struct SlideBagResult {
  std::vector<Bag> bags;
  std::size_t tiles = 0;
  bool degenerate = false;  // fewer tiles than clusters
};

// Gene targets come from `genes` (by case id) when given.
SlideBagResult bag_slide(const SlideSource& slide, const BagConfig& config, const GeneTable* genes,
                         std::uint64_t seed);

struct SlideFailure {
  std::string slide_id;
  std::string error;
};

struct BagRunResult {
  DatasetManifest manifest;
  std::vector<SlideFailure> failures;
  std::vector<std::string> warnings;
};

// Bags every slide into `out_dir` and writes the dataset manifest. Failed
// slides are recorded and left out of the manifest.
BagRunResult run_bagging(const BagInput& input, const std::string& out_dir, const RunConfig& config,
                         const GeneTable* genes);

// Median filter then log transform, in that order.
GeneTable preprocess_genes(const GeneTable& raw);

std::vector<CaseLabel> read_case_labels(const std::string& path);

}  // namespace tilegene
