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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"
#include "tilegene/genes.hpp"
#include "tilegene/pipeline.hpp"

namespace tilegene {
namespace {

GeneTable matrix(const std::string& text) {
  std::istringstream in(text);
  return ingest_matrix_stream(in, "fixture");
}

TEST(Ingest, CaseStreamsFollowFirstCaseGeneOrder) {
  std::istringstream a("ENSG3\t1.5\nENSG1\t0\nENSG2\t7\n");
  std::istringstream b("ENSG1\t2\nENSG2\t3\nENSG3\t4\n");
  auto t = ingest_case_streams({{"case-a", &a}, {"case-b", &b}});
  EXPECT_EQ(t.gene_ids, (std::vector<std::string>{"ENSG3", "ENSG1", "ENSG2"}));
  EXPECT_EQ(t.cases, (std::vector<std::string>{"case-a", "case-b"}));
  EXPECT_EQ(t.values, (std::vector<double>{1.5, 0, 7, 4, 2, 3}));
  EXPECT_FALSE(t.transformed);
}

TEST(Ingest, NegativeValueRejectedWithRow) {
  std::istringstream a("g1\t1\ng2\t-0.5\n");
  try {
    ingest_case_streams({{"case-a", &a}});
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 2u);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
  EXPECT_THROW(matrix("gene_id\tc1\ng1\t-1\n"), FormatError);
}

TEST(Ingest, MismatchedGeneSetsRejected) {
  std::istringstream a("g1\t1\ng2\t2\n");
  std::istringstream b("g1\t1\ng3\t2\n");
  EXPECT_THROW(ingest_case_streams({{"a", &a}, {"b", &b}}), DataError);
  std::istringstream c("g1\t1\ng2\t2\n");
  std::istringstream d("g1\t1\n");
  EXPECT_THROW(ingest_case_streams({{"c", &c}, {"d", &d}}), DataError);
}

TEST(Ingest, MatrixLayout) {
  auto t = matrix("gene_id\tc1\tc2\ng1\t1\t2\ng2\t3\t4\n");
  EXPECT_EQ(t.num_genes(), 2u);
  EXPECT_EQ(t.num_cases(), 2u);
  EXPECT_EQ(t.at(1, 0), 2.0);
  EXPECT_EQ(t.gene_column(1), (std::vector<double>{3, 4}));
  EXPECT_THROW(matrix("gene_id\tc1\tc2\ng1\t1\n"), FormatError);
  EXPECT_THROW(matrix("gene_id\tc1\ng1\tabc\n"), FormatError);
}

TEST(Ingest, FullGeneCatalogHeader) {
  std::ostringstream text;
  text << "gene_id\tc1\tc2\n";
  for (int g = 0; g < 60483; ++g) text << "ENSG" << g << "\t" << g % 3 << "\t1\n";
  EXPECT_EQ(matrix(text.str()).num_genes(), 60483u);
}

TEST(GeneFilter, MedianExamples) {
  EXPECT_EQ(median({0, 0, 5}), 0.0);
  EXPECT_EQ(median({0, 1, 5}), 1.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_THROW(median({}), InputError);
  auto t = filter_median_zero(matrix("gene_id\tc1\tc2\tc3\ndrop\t0\t0\t5\nkeep\t0\t1\t5\n"));
  EXPECT_EQ(t.gene_ids, (std::vector<std::string>{"keep"}));
  EXPECT_EQ(t.dropped_ids, (std::vector<std::string>{"drop"}));
  EXPECT_EQ(t.gene_column(0), (std::vector<double>{0, 1, 5}));
}

TEST(GeneTransform, Log10OnePlus) {
  auto t = log_transform(matrix("gene_id\tc1\tc2\tc3\ng\t0\t99\t9\n"));
  EXPECT_TRUE(t.transformed);
  EXPECT_EQ(t.gene_column(0), (std::vector<double>{0.0, 2.0, 1.0}));
}

TEST(GeneTransform, OrderEnforced) {
  auto raw = matrix("gene_id\tc1\tc2\tc3\ng1\t0\t0\t5\ng2\t0\t1\t5\n");
  auto logged = log_transform(raw);
  EXPECT_THROW(filter_median_zero(logged), ContractError);
  EXPECT_THROW(log_transform(logged), ContractError);
  auto p = preprocess_genes(raw);
  EXPECT_TRUE(p.transformed);
  EXPECT_EQ(p.gene_ids, (std::vector<std::string>{"g2"}));
  EXPECT_NEAR(p.at(2, 0), std::log10(6.0), 1e-15);
}

TEST(GeneIndex, RoundTrip) {
  testing::TempDir dir;
  auto t = preprocess_genes(matrix("gene_id\tc1\tc2\tc3\ng1\t0\t0\t5\ng2\t0\t1\t5\n"));
  write_gene_index(dir / "genes.json", t);
  EXPECT_EQ(read_gene_index(dir / "genes.json"), t.gene_ids);
  write_gene_matrix(dir / "m.tsv", t);
  auto back = ingest_expression_matrix(dir / "m.tsv");
  EXPECT_EQ(back.gene_ids, t.gene_ids);
  EXPECT_EQ(back.values, t.values);
}

std::vector<CaseLabel> cases_for(std::vector<std::size_t> per_class) {
  std::vector<CaseLabel> out;
  for (std::size_t c = 0; c < per_class.size(); ++c)
    for (std::size_t i = 0; i < per_class[c]; ++i) out.push_back({"case-" + std::to_string(c) + "-" + std::to_string(i), std::uint32_t(c)});
  return out;
}

TEST(Split, TenCasesOneClass) {
  auto s = split_cases(cases_for({10}), {0.8, 0.1, 0.1}, 3);
  EXPECT_EQ(s.cases_in(Split::kTrain).size(), 8u);
  EXPECT_EQ(s.cases_in(Split::kVal).size(), 1u);
  EXPECT_EQ(s.cases_in(Split::kTest).size(), 1u);
}

TEST(Split, DeterministicAndSeedSensitive) {
  auto cases = cases_for({12, 9, 15});
  auto a = split_cases(cases, {0.7, 0.15, 0.15}, 42);
  auto b = split_cases(cases, {0.7, 0.15, 0.15}, 42);
  EXPECT_EQ(a.assignment, b.assignment);
  bool differs = false;
  for (std::uint64_t seed = 0; seed < 5 && !differs; ++seed)
    differs = split_cases(cases, {0.7, 0.15, 0.15}, seed).assignment != a.assignment;
  EXPECT_TRUE(differs);
}

TEST(Split, StratifiedWithinOneCase) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> per_class{1 + uniform_index(rng, 20), 1 + uniform_index(rng, 20), 1 + uniform_index(rng, 20)};
    const std::array<double, 3> f{0.6, 0.2, 0.2};
    auto s = split_cases(cases_for(per_class), f, trial);
    for (std::size_t c = 0; c < 3; ++c)
      for (Split sp : {Split::kTrain, Split::kVal, Split::kTest}) {
        std::size_t n = 0;
        for (const auto& id : s.cases_in(sp)) n += id.rfind("case-" + std::to_string(c) + "-", 0) == 0;
        EXPECT_LE(std::abs(double(n) - f[std::size_t(sp)] * per_class[c]), 1.0);
      }
  }
}

TEST(Split, ConflictingLabelsAndBadFractions) {
  std::vector<CaseLabel> c{{"a", 0}, {"a", 1}};
  EXPECT_THROW(split_cases(c, {0.8, 0.1, 0.1}, 0), DataError);
  EXPECT_THROW(split_cases(cases_for({3}), {0.8, 0.3, 0.1}, 0), ConfigError);
  EXPECT_THROW(parse_split("holdout"), FormatError);
  EXPECT_EQ(parse_split(split_name(Split::kVal)), Split::kVal);
}

}  // namespace
}  // namespace tilegene
