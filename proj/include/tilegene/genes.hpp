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
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tilegene {

// Slide-aligned expression matrix: one row per case, one column per gene.
struct GeneTable {
  std::vector<std::string> gene_ids;
  std::vector<std::string> cases;
  std::vector<double> values;  // cases x genes, row-major
  bool transformed = false;
  std::vector<std::string> dropped_ids;

  std::size_t num_genes() const { return gene_ids.size(); }
  std::size_t num_cases() const { return cases.size(); }
  double at(std::size_t c, std::size_t g) const { return values[c * gene_ids.size() + g]; }
  std::span<const double> case_row(std::size_t c) const {
    return std::span<const double>(values).subspan(c * gene_ids.size(), gene_ids.size());
  }
  std::vector<double> gene_column(std::size_t g) const;
  std::optional<std::size_t> case_index(const std::string& case_id) const;
};

// One "gene_id<TAB>value" file per case. Every case must list the same gene
// set; the first case fixes the column order.
GeneTable ingest_expression_files(const std::vector<std::pair<std::string, std::string>>& case_files);
GeneTable ingest_case_streams(const std::vector<std::pair<std::string, std::istream*>>& cases);

// Combined matrix: header "gene_id<TAB>case1<TAB>case2...", one row per gene.
GeneTable ingest_expression_matrix(const std::string& path);
GeneTable ingest_matrix_stream(std::istream& in, const std::string& source = "matrix");

// Median with the even-count convention (mean of the two central values).
double median(std::vector<double> values);

// Keeps genes whose median over cases is > 0; requires raw values.
GeneTable filter_median_zero(const GeneTable& table);

// a -> log10(1 + a), elementwise. Requires raw values.
GeneTable log_transform(const GeneTable& table);

void write_gene_matrix(const std::string& path, const GeneTable& table);
// JSON index: {"genes": [...], "dropped": [...], "transformed": bool}.
void write_gene_index(const std::string& path, const GeneTable& table);
std::vector<std::string> read_gene_index(const std::string& path);

enum class Split : std::uint8_t { kTrain, kVal, kTest };
const char* split_name(Split s);
Split parse_split(const std::string& s);

struct CaseLabel {
  std::string case_id;
  std::uint32_t label = 0;
};

struct SplitSpec {
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
  std::map<std::string, Split> assignment;

  Split of(const std::string& case_id) const;
  std::vector<std::string> cases_in(Split s) const;
};

// Case-wise split stratified by label; each class is divided with the
// largest-remainder rule so per-class counts are within one case of the
// target fractions.
SplitSpec split_cases(std::span<const CaseLabel> cases, std::array<double, 3> fractions, std::uint64_t seed,
                      std::optional<std::size_t> num_classes = std::nullopt);

}  // namespace tilegene
