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

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tilegene/dataset.hpp"
#include "tilegene/genes.hpp"
#include "tilegene/tensor.hpp"

namespace tilegene {

// Gaussian class model: a tile of slide s in class c is
// mu_c + slide offset (sd slide_sigma) + tile noise (sd tile_sigma).
// Class means are orthogonal with |mu_c| = separation. Genes are linear in
// the case mean embedding through M = B U^T, where U holds gene_rank
// orthonormal "program" directions (the class directions first) and B has
// N(0, mixing_scale^2 / gene_rank) entries. gene_rank = 0 draws a dense M
// with N(0, mixing_scale^2 / d) entries.
struct SynthSpec {
  std::size_t classes = 3;
  std::size_t slides_per_class = 10;
  std::size_t slides_per_case = 1;
  std::size_t bags_per_slide = 100;
  std::size_t k = 49;
  std::size_t d = 64;
  std::size_t genes = 50;
  std::size_t tiles_per_slide = 120;
  double separation = 1.0;
  double slide_sigma = 0.3;
  double tile_sigma = 1.0;
  double gene_noise = 0.05;  // sd of the additive noise on the raw gene signal
  double mixing_scale = 5.0;
  std::size_t gene_rank = 3;
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

// d = 1024, G = 1000: the shape of the real inputs.
SynthSpec paper_shape_spec();

struct SlideBags {
  SlideEntry entry;
  std::vector<Bag> bags;
};

struct SynthDataset {
  DatasetManifest manifest;
  std::vector<SlideBags> slides;
  GeneTable genes;              // transformed, per case
  Tensor<double> class_means;   // C x d
  Tensor<double> mixing;        // G x d
  Tensor<double> case_means;    // cases x d, mean of the case's tile embeddings
  Tensor<double> raw_signal;    // cases x G, M * case mean + noise, before shifting
};

SynthDataset generate(const SynthSpec& spec, std::size_t workers = 1);

// Writes manifest.json, genes.json, expression.tsv and the bag files.
void write_dataset(const std::string& dir, SynthDataset& data);

struct BayesEstimate {
  double accuracy = 0;
  double ci_low = 0;
  double ci_high = 0;
  std::size_t draws = 0;
};

// Monte-Carlo accuracy of the optimal slide classifier, which sees the mean
// of all tiles of a slide: nearest class mean under isotropic noise with
// variance slide_sigma^2 + tile_sigma^2 / tiles_per_slide.
BayesEstimate oracle_bayes_accuracy(const SynthSpec& spec, std::size_t draws = 100000);

}  // namespace tilegene
