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
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tilegene/bag.hpp"
#include "tilegene/genes.hpp"

namespace tilegene {

inline constexpr std::string_view kDatasetFormat = "tilegene-dataset/1";

struct SlideEntry {
  std::string slide_id;
  std::string case_id;
  std::uint32_t label = 0;
  Split split = Split::kTrain;
  std::vector<std::string> bags;  // paths relative to the dataset directory
};

// manifest.json of a dataset directory.
struct DatasetManifest {
  std::size_t k = 0;
  std::size_t d = 0;
  std::size_t genes = 0;
  std::size_t classes = 0;
  std::vector<std::string> class_names;
  std::string gene_index = "genes.json";
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;
  std::vector<SlideEntry> slides;

  std::size_t bag_count() const;
  std::size_t slide_count(Split s) const;
  void validate() const;
};

DatasetManifest read_manifest(const std::string& dir);
void write_manifest(const std::string& dir, const DatasetManifest& manifest);

std::string bag_relpath(const std::string& slide_id, std::size_t index);

// Writes every slide's bags under dir/bags/<slide_id>/ and fills in the
// slide's bag paths.
void write_slide_bags(const std::string& dir, SlideEntry& slide, std::span<const Bag> bags);

struct LoadedDataset {
  DatasetManifest manifest;
  std::vector<Bag> bags;
  std::vector<std::size_t> slide_of;  // manifest slide index per bag

  std::vector<const Bag*> in(Split s) const;
  std::vector<std::size_t> indices_in(Split s) const;
};

// Loads and validates bags; when `only` is set, other splits are skipped.
LoadedDataset load_dataset(const std::string& dir, std::optional<Split> only = std::nullopt,
                           std::size_t workers = 1);

// Problems found in a dataset directory (manifest, gene index, every bag).
std::vector<std::string> validate_dataset(const std::string& dir, std::size_t workers = 1);

}  // namespace tilegene
