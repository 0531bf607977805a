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

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tilegene/tensor.hpp"

namespace tilegene {

struct Correlation {
  double r = 0;
  double p = 1;
};

// Sample Pearson correlation with a two-sided Student-t p-value (n - 2
// degrees of freedom). Needs n >= 3 and non-zero variance in both inputs.
Correlation pearson(std::span<const double> x, std::span<const double> y);
// Pearson on average ranks (ties share the mean of their rank positions).
Correlation spearman(std::span<const double> x, std::span<const double> y);

std::vector<double> average_ranks(std::span<const double> x);
double correlation_p_value(double r, std::size_t n);
// P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
double student_t_two_sided(double t, double dof);

enum class Correction { kHolmSidak, kBenjaminiHochberg };
const char* to_string(Correction c);

struct Significance {
  std::vector<bool> rejected;  // in input order
  std::size_t count = 0;
};

// Holm-Sidak step-down (threshold 1 - (1 - alpha)^(1 / (m - i + 1)) at rank
// i) or Benjamini-Hochberg step-up (largest i with p_(i) <= i alpha / m).
Significance adjust_pvalues(std::span<const double> p, Correction method, double alpha = 0.01);

struct GeneError {
  double mae = 0;
  double rmse = 0;
  double rrmse = 0;
  bool rrmse_defined = true;  // false when the truth is constant
};

struct MeanStd {
  double mean = 0;
  double std = 0;  // population standard deviation across genes
};

struct ErrorReport {
  std::vector<GeneError> genes;
  MeanStd mae, rmse, rrmse;  // rrmse summary skips undefined genes
  std::vector<std::size_t> excluded;
};

// pred, truth: samples x genes.
ErrorReport prediction_errors(const Tensor<double>& pred, const Tensor<double>& truth);

MeanStd mean_std(std::span<const double> v);

// Most common label; ties go to the smallest class index.
std::size_t slide_vote(std::span<const std::size_t> bag_labels);

struct RocPoint {
  double fpr = 0;
  double tpr = 0;
};

struct ClassReport {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t support = 0;
};

struct ClassificationReport {
  double accuracy = 0;
  double f1_macro = 0;
  double f1_weighted = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][predicted]
  std::vector<ClassReport> per_class;
  std::vector<RocPoint> micro_roc;
  double micro_auc = 0;
};

// One-vs-rest flattening of an n x C score matrix against integer labels.
std::vector<RocPoint> micro_roc(const Tensor<double>& scores, std::span<const std::size_t> truth);
double auc_trapezoid(std::span<const RocPoint> curve);

ClassificationReport classification_report(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                                           const Tensor<double>& scores, std::size_t num_classes);

struct PcaResult {
  Tensor<double> projection;        // n x dims
  Tensor<double> components;        // dims x D, unit rows
  std::vector<double> mean;         // D
  std::vector<double> explained_variance;
  std::vector<double> explained_ratio;

  Tensor<double> project(const Tensor<double>& x) const;
};

PcaResult pca_project(const Tensor<double>& x, std::size_t dims = 2);

// Mean of the rows sharing a group key, groups in order of first appearance.
std::pair<std::vector<std::string>, Tensor<double>> group_means(const Tensor<double>& rows,
                                                                 std::span<const std::string> groups);

struct SearchSubset {
  Tensor<double> embeddings;  // one row per WSI
  std::vector<std::size_t> labels;
  std::vector<std::string> patients;
};

// kK divides by K (capped at the candidate count); kRelevant divides by
// min(K, number of relevant candidates).
enum class ApNormalization { kK, kRelevant };

double precision_at(std::span<const int> relevance, std::size_t K);
double average_precision_at(std::span<const int> relevance, std::size_t K, ApNormalization norm = ApNormalization::kK);

// Leave-one-patient-out ranking of one query by 1 - Pearson r.
std::vector<std::size_t> rank_candidates(const Tensor<double>& embeddings, std::span<const std::string> patients,
                                         std::size_t query);

struct SearchReport {
  std::map<std::size_t, double> map_at;                       // K -> MAP@K
  std::map<std::size_t, std::vector<double>> subset_map_at;   // K -> per-subset MAP@K
  std::size_t subsets_used = 0;
  std::size_t subsets_skipped = 0;
};

SearchReport search_eval(std::span<const SearchSubset> subsets, std::span<const std::size_t> ks,
                         ApNormalization norm = ApNormalization::kK);

}  // namespace tilegene
