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

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tilegene/bag.hpp"
#include "tilegene/metrics.hpp"
#include "tilegene/model.hpp"

namespace tilegene {

// Eval-mode outputs for a list of bags, one row per bag.
struct BagPredictions {
  Tensor<double> logits;      // n x C
  Tensor<double> probs;       // n x C softmax
  Tensor<double> genes;       // n x G aggregated S
  Tensor<double> embeddings;  // n x D class token output c
  std::vector<std::size_t> predicted;
};

BagPredictions predict_bags(const Model<float>& model, std::span<const Bag* const> bags,
                            TestAggregation form = TestAggregation::kMean, std::size_t workers = 1);

// Slides in order of first appearance among the bags.
struct SlideSummary {
  std::vector<std::string> slide_ids;
  std::vector<std::string> case_ids;
  std::vector<std::size_t> truth;
  std::vector<std::size_t> predicted;     // majority vote over bags
  Tensor<double> scores;                  // mean bag softmax
  Tensor<double> gene_pred;               // mean bag S
  Tensor<double> gene_truth;
  std::vector<std::vector<std::size_t>> bag_rows;  // prediction rows per slide
};

SlideSummary summarize_slides(std::span<const Bag* const> bags, const BagPredictions& preds);

struct GeneEvalRow {
  std::string gene_id;
  bool defined = true;  // false when either side is constant
  double pearson_r = 0, pearson_p = 1;
  double spearman_rho = 0, spearman_p = 1;
  bool significant_hs = false, significant_bh = false;                    // Pearson p
  bool spearman_significant_hs = false, spearman_significant_bh = false;  // Spearman p
};

struct GeneReport {
  std::vector<GeneEvalRow> rows;
  double alpha = 0.01;
  std::size_t undefined = 0;
  std::size_t pearson_hs = 0, pearson_bh = 0, spearman_hs = 0, spearman_bh = 0;
  double mean_pearson = 0, mean_spearman = 0;  // over defined genes
};

// pred, truth: samples x genes. Undefined correlations get p = 1.
GeneReport gene_report(const Tensor<double>& pred, const Tensor<double>& truth, std::span<const std::string> gene_ids,
                       double alpha = 0.01, std::size_t workers = 1);

// Subset j holds bag (j mod bag count) of every slide.
std::vector<SearchSubset> build_search_subsets(const SlideSummary& slides, const BagPredictions& preds,
                                               std::size_t count);

struct PcaExport {
  PcaResult pca;
  Tensor<double> slide_mean_projection;  // slides x 2, mean over each slide's bags
};

PcaExport pca_export(const SlideSummary& slides, const BagPredictions& preds);

std::string gene_report_csv(const GeneReport& r);
nlohmann::json gene_report_json(const GeneReport& r);
std::string error_report_csv(const ErrorReport& r, std::span<const std::string> gene_ids);
nlohmann::json error_report_json(const ErrorReport& r);
nlohmann::json classification_json(const ClassificationReport& r, std::span<const std::string> class_names);
std::string roc_csv(std::span<const RocPoint> roc);
std::string pca_csv(const PcaExport& p, const SlideSummary& slides);
std::string slide_predictions_csv(const SlideSummary& s);
nlohmann::json search_json(const SearchReport& r);

// Fixed round-trip formatting used by every CSV writer.
std::string format_double(double v);

}  // namespace tilegene
