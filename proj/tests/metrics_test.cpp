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
#include <numbers>

#include "oracles.hpp"
#include "support.hpp"
#include "tilegene/metrics.hpp"

namespace tilegene {
namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = normal01(rng);
  return v;
}

TEST(Pearson, SelfAndNegation) {
  const std::vector<double> x{0.3, 1.7, -2.0, 4.4, 0.0};
  std::vector<double> neg;
  for (double v : x) neg.push_back(-v);
  EXPECT_NEAR(pearson(x, x).r, 1.0, 1e-15);
  EXPECT_NEAR(pearson(x, neg).r, -1.0, 1e-15);
  EXPECT_LT(pearson(x, x).p, 1e-12);
}

TEST(Pearson, HandExample) {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 1, 4, 3, 6};
  EXPECT_NEAR(pearson(x, y).r, 10.0 / std::sqrt(148.0), 1e-12);
  EXPECT_NEAR(pearson(x, y).r, 0.8220, 1e-4);
  EXPECT_NEAR(pearson(x, y).r, oracle::pearson(x, y), 1e-12);
}

TEST(Pearson, MatchesDirectFormula) {
  Rng rng(1);
  for (std::size_t n : {3u, 4u, 10u, 57u, 500u}) {
    for (int t = 0; t < 20; ++t) {
      auto x = random_vec(rng, n), y = random_vec(rng, n);
      for (std::size_t i = 0; i < n; ++i) y[i] += 0.5 * x[i] + 100.0;
      EXPECT_NEAR(pearson(x, y).r, oracle::pearson(x, y), 1e-12);
    }
  }
}

TEST(Pearson, AffineInvariance) {
  Rng rng(2);
  auto x = random_vec(rng, 40), y = random_vec(rng, 40);
  std::vector<double> ax;
  for (double v : x) ax.push_back(3.5 * v - 7.0);
  EXPECT_NEAR(pearson(ax, y).r, pearson(x, y).r, 1e-12);
}

TEST(Pearson, PValueFromStudentT) {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 1, 4, 3, 6};
  const double r = oracle::pearson(x, y);
  const double t = r * std::sqrt(3.0 / (1 - r * r));
  // Three degrees of freedom: P(|T| > t) = 1 - (2/pi)(atan(u) + u / (1 + u^2)), u = t / sqrt(3).
  const double u = t / std::sqrt(3.0);
  const double p = 1 - 2 / std::numbers::pi * (std::atan(u) + u / (1 + u * u));
  EXPECT_NEAR(pearson(x, y).p, p, 1e-12);
}

TEST(Pearson, UndefinedCases) {
  const std::vector<double> c{2, 2, 2, 2}, x{1, 2, 3, 4};
  EXPECT_THROW(pearson(c, x), UndefinedStatistic);
  EXPECT_THROW(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 3}), InputError);
  EXPECT_THROW(pearson(x, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST(StudentT, ClosedFormsOneAndTwoDof) {
  for (double t : {0.0, 0.1, 0.5, 1.0, 2.5, 12.706, 100.0}) {
    EXPECT_NEAR(student_t_two_sided(t, 1), 1 - 2 / std::numbers::pi * std::atan(t), 1e-12) << t;
    EXPECT_NEAR(student_t_two_sided(t, 2), 1 - t / std::sqrt(2 + t * t), 1e-12) << t;
    EXPECT_NEAR(student_t_two_sided(-t, 2), student_t_two_sided(t, 2), 1e-15);
  }
}

TEST(StudentT, TabulatedCriticalValues) {
  struct Row {
    double dof, t, p;
  };
  const Row table[] = {{1, 12.706, 0.05}, {5, 2.571, 0.05}, {5, 4.032, 0.01}, {10, 2.228, 0.05},
                       {10, 3.169, 0.01}, {20, 2.086, 0.05}, {30, 2.750, 0.01}, {120, 1.980, 0.05}};
  for (const auto& row : table) EXPECT_NEAR(student_t_two_sided(row.t, row.dof), row.p, 1e-4) << row.dof;
}

TEST(Spearman, MonotoneTransformGivesOne) {
  Rng rng(3);
  auto x = random_vec(rng, 30);
  std::vector<double> y;
  for (double v : x) y.push_back(std::exp(v) + v * v * v);
  EXPECT_NEAR(spearman(x, y).r, 1.0, 1e-15);
}

TEST(Spearman, SmallExamples) {
  EXPECT_NEAR(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{4, 9, 25}).r, 1.0, 1e-15);
  // y = [9, 4, 25] ranks [2, 1, 3]: not monotone in x.
  EXPECT_NEAR(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{9, 4, 25}).r, 0.5, 1e-15);
  const std::vector<double> x{1, 1, 2}, y{1, 2, 3};
  EXPECT_EQ(average_ranks(x), (std::vector<double>{1.5, 1.5, 3}));
  EXPECT_NEAR(spearman(x, y).r, std::sqrt(3.0) / 2, 1e-12);
  EXPECT_NEAR(spearman(x, y).r, 0.8660, 1e-4);
}

TEST(Spearman, MatchesRankThenPearsonOracle) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 3 + uniform_index(rng, 40);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = double(uniform_index(rng, 6));  // many ties
      y[i] = normal01(rng);
    }
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) continue;
    EXPECT_EQ(average_ranks(x), oracle::ranks(x));
    EXPECT_NEAR(spearman(x, y).r, oracle::spearman(x, y), 1e-12);
  }
}

TEST(Adjust, AllZeroRejectsEverything) {
  const std::vector<double> p(7, 0.0);
  for (auto m : {Correction::kHolmSidak, Correction::kBenjaminiHochberg}) {
    auto s = adjust_pvalues(p, m);
    EXPECT_EQ(s.count, 7u);
    for (bool r : s.rejected) EXPECT_TRUE(r);
  }
}

TEST(Adjust, NothingBelowAlpha) {
  const std::vector<double> p{0.02, 0.5, 0.011, 1.0};
  EXPECT_EQ(adjust_pvalues(p, Correction::kHolmSidak).count, 0u);
  EXPECT_EQ(adjust_pvalues(p, Correction::kBenjaminiHochberg).count, 0u);
}

TEST(Adjust, HandTracedFixture) {
  const std::vector<double> p{0.039, 0.001, 0.041, 0.008};
  EXPECT_NEAR(1 - std::pow(0.99, 0.25), 0.002509, 1e-6);
  auto hs = adjust_pvalues(p, Correction::kHolmSidak, 0.01);
  auto bh = adjust_pvalues(p, Correction::kBenjaminiHochberg, 0.01);
  EXPECT_EQ(hs.count, 1u);
  EXPECT_EQ(bh.count, 1u);
  EXPECT_EQ(hs.rejected, (std::vector<bool>{false, true, false, false}));
  EXPECT_EQ(bh.rejected, (std::vector<bool>{false, true, false, false}));
}

TEST(Adjust, StepUpDiffersFromStepDown) {
  // BH rejects all five (0.05 <= 5 * 0.05 / 5); HS stops after 0.01.
  const std::vector<double> p{0.05, 0.04, 0.03, 0.02, 0.01};
  EXPECT_EQ(adjust_pvalues(p, Correction::kBenjaminiHochberg, 0.05).count, 5u);
  EXPECT_EQ(adjust_pvalues(p, Correction::kHolmSidak, 0.05).count, 1u);
  EXPECT_EQ(oracle::holm_sidak_count(p, 0.05), 1u);
}

TEST(Adjust, SidakFirstStepCanBeatBh) {
  // 1 - 0.99^(1/2) = 0.0050126 > 0.01 / 2.
  const std::vector<double> p{0.00501, 0.9};
  EXPECT_EQ(adjust_pvalues(p, Correction::kHolmSidak, 0.01).count, 1u);
  EXPECT_EQ(adjust_pvalues(p, Correction::kBenjaminiHochberg, 0.01).count, 0u);
}

TEST(Adjust, RandomSetsMatchOracles) {
  Rng rng(5);
  for (int t = 0; t < 10000; ++t) {
    const std::size_t m = 1 + uniform_index(rng, 30);
    const double power = 1 + 4 * uniform01(rng);
    std::vector<double> p(m);
    for (auto& v : p) v = std::pow(uniform01(rng), power) * (uniform01(rng) < 0.3 ? 0.01 : 1.0);
    auto hs = adjust_pvalues(p, Correction::kHolmSidak, 0.01);
    auto bh = adjust_pvalues(p, Correction::kBenjaminiHochberg, 0.01);
    ASSERT_EQ(hs.count, oracle::holm_sidak_count(p, 0.01));
    ASSERT_EQ(bh.count, oracle::benjamini_hochberg_count(p, 0.01));
    std::size_t flagged = std::count(bh.rejected.begin(), bh.rejected.end(), true);
    ASSERT_EQ(flagged, bh.count);
  }
}

TEST(Adjust, InvalidInputs) {
  EXPECT_THROW(adjust_pvalues(std::vector<double>{0.5, 1.2}, Correction::kHolmSidak), InputError);
  EXPECT_THROW(adjust_pvalues(std::vector<double>{-0.1}, Correction::kBenjaminiHochberg), InputError);
  EXPECT_THROW(adjust_pvalues(std::vector<double>{0.1}, Correction::kBenjaminiHochberg, 0.0), InputError);
}

Tensor<double> column(std::initializer_list<double> v) { return Tensor<double>({v.size(), 1}, std::vector<double>(v)); }

TEST(Errors, HandExample) {
  auto r = prediction_errors(column({1, 3}), column({2, 5}));
  EXPECT_NEAR(r.genes[0].mae, 1.5, 1e-12);
  EXPECT_NEAR(r.genes[0].rmse, std::sqrt(2.5), 1e-12);
  EXPECT_NEAR(r.genes[0].rrmse, std::sqrt(5 / 4.5), 1e-12);
  EXPECT_NEAR(r.genes[0].rmse, 1.5811, 1e-4);
  EXPECT_NEAR(r.genes[0].rrmse, 1.0541, 1e-4);
}

TEST(Errors, PerfectAndMeanBaseline) {
  auto perfect = prediction_errors(column({1, 2, 4}), column({1, 2, 4}));
  EXPECT_EQ(perfect.genes[0].mae, 0.0);
  EXPECT_EQ(perfect.genes[0].rmse, 0.0);
  EXPECT_EQ(perfect.genes[0].rrmse, 0.0);
  auto base = prediction_errors(column({3, 3, 3, 3}), column({1, 2, 4, 5}));
  EXPECT_NEAR(base.genes[0].rrmse, 1.0, 1e-15);
}

TEST(Errors, MatchDirectEvaluation) {
  Rng rng(6);
  const std::size_t n = 37, g = 12;
  auto pred = testing::random_tensor<double>(n, g, rng);
  auto truth = testing::random_tensor<double>(n, g, rng);
  auto r = prediction_errors(pred, truth);
  std::vector<double> maes;
  for (std::size_t j = 0; j < g; ++j) {
    std::vector<double> p, t;
    for (std::size_t i = 0; i < n; ++i) {
      p.push_back(pred(i, j));
      t.push_back(truth(i, j));
    }
    auto o = oracle::errors(p, t);
    EXPECT_NEAR(r.genes[j].mae, o.mae, 1e-12);
    EXPECT_NEAR(r.genes[j].rmse, o.rmse, 1e-12);
    EXPECT_NEAR(r.genes[j].rrmse, o.rrmse, 1e-12);
    EXPECT_GE(r.genes[j].rmse, r.genes[j].mae);
    maes.push_back(o.mae);
  }
  double mean = 0, var = 0;
  for (double v : maes) mean += v / g;
  for (double v : maes) var += (v - mean) * (v - mean) / g;
  EXPECT_NEAR(r.mae.mean, mean, 1e-12);
  EXPECT_NEAR(r.mae.std, std::sqrt(var), 1e-12);
}

TEST(Errors, ConstantTruthExcluded) {
  Tensor<double> pred = Tensor<double>::matrix(3, 2, {1, 1, 2, 2, 3, 3});
  Tensor<double> truth = Tensor<double>::matrix(3, 2, {5, 1, 5, 2, 5, 4});
  auto r = prediction_errors(pred, truth);
  EXPECT_FALSE(r.genes[0].rrmse_defined);
  EXPECT_TRUE(r.genes[1].rrmse_defined);
  EXPECT_EQ(r.excluded, (std::vector<std::size_t>{0}));
  EXPECT_NEAR(r.rrmse.mean, r.genes[1].rrmse, 1e-15);
}

TEST(SlideVote, Examples) {
  EXPECT_EQ(slide_vote(std::vector<std::size_t>{0, 0, 1}), 0u);
  EXPECT_EQ(slide_vote(std::vector<std::size_t>(100, 2)), 2u);
  std::vector<std::size_t> tie(50, 2);
  tie.insert(tie.end(), 50, 0);
  EXPECT_EQ(slide_vote(tie), 0u);
  EXPECT_THROW(slide_vote(std::vector<std::size_t>{}), ContractError);
}

TEST(SlideVote, MatchesCountingOracle) {
  Rng rng(7);
  for (int t = 0; t < 500; ++t) {
    std::vector<std::size_t> v(1 + uniform_index(rng, 12));
    for (auto& x : v) x = uniform_index(rng, 4);
    std::size_t best = 0, best_count = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      const auto n = std::size_t(std::count(v.begin(), v.end(), c));
      if (n > best_count) {
        best = c;
        best_count = n;
      }
    }
    EXPECT_EQ(slide_vote(v), best);
  }
}

TEST(Classification, PerfectPredictions) {
  std::vector<std::size_t> y{0, 1, 2, 2, 1, 0};
  Tensor<double> scores({6, 3});
  for (std::size_t i = 0; i < 6; ++i) scores(i, y[i]) = 1.0;
  auto r = classification_report(y, y, scores, 3);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.f1_macro, 1.0);
  EXPECT_EQ(r.f1_weighted, 1.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(r.confusion[i][j], i == j ? 2u : 0u);
  EXPECT_NEAR(r.micro_auc, 1.0, 1e-12);
}

TEST(Classification, BinaryConfusionFixture) {
  // TP, FN, FP, TN with class 1 as positive.
  std::vector<std::size_t> truth{1, 1, 0, 0}, pred{1, 0, 1, 0};
  auto r = classification_report(pred, truth, Tensor<double>({4, 2}, 0.5), 2);
  EXPECT_NEAR(r.per_class[1].f1, 0.5, 1e-15);
  EXPECT_NEAR(r.per_class[1].precision, 0.5, 1e-15);
  EXPECT_NEAR(r.per_class[1].recall, 0.5, 1e-15);
  EXPECT_NEAR(r.f1_macro, 0.5, 1e-15);
  EXPECT_EQ(r.accuracy, 0.5);
}

TEST(Classification, ConfusionRowsMatchSupport) {
  Rng rng(8);
  std::vector<std::size_t> truth(60), pred(60);
  for (auto& v : truth) v = uniform_index(rng, 3);
  for (auto& v : pred) v = uniform_index(rng, 3);
  auto r = classification_report(pred, truth, Tensor<double>({60, 3}, 1.0 / 3), 3);
  std::size_t trace = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::size_t row = 0;
    for (auto v : r.confusion[c]) row += v;
    EXPECT_EQ(row, std::size_t(std::count(truth.begin(), truth.end(), c)));
    EXPECT_EQ(r.per_class[c].support, row);
    trace += r.confusion[c][c];
  }
  EXPECT_NEAR(r.accuracy, double(trace) / 60.0, 1e-15);
  EXPECT_THROW(classification_report(std::vector<std::size_t>{3}, std::vector<std::size_t>{0},
                                     Tensor<double>({1, 3}), 3),
               InputError);
}

TEST(Classification, RandomScoresGiveChanceAuc) {
  Rng rng(9);
  const std::size_t n = 3000;
  Tensor<double> scores({n, 3});
  std::vector<std::size_t> truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t c = 0; c < 3; ++c) s += scores(i, c) = uniform01(rng);
    for (std::size_t c = 0; c < 3; ++c) scores(i, c) /= s;
    truth[i] = uniform_index(rng, 3);
  }
  auto roc = micro_roc(scores, truth);
  EXPECT_NEAR(auc_trapezoid(roc), 0.5, 0.05);
  EXPECT_EQ(roc.front().fpr, 0.0);
  EXPECT_EQ(roc.back().tpr, 1.0);
}

TEST(Pca, CollinearDataHasOneComponent) {
  Tensor<double> x({20, 3});
  for (std::size_t i = 0; i < 20; ++i) {
    x(i, 0) = double(i);
    x(i, 1) = 2.0 * i - 1;
    x(i, 2) = -0.5 * i;
  }
  auto p = pca_project(x);
  EXPECT_NEAR(p.explained_variance[1], 0.0, 1e-9);
  EXPECT_NEAR(p.explained_ratio[0], 1.0, 1e-12);
}

TEST(Pca, RecoversPlantedRotation) {
  // Points at (+-3, 0) and (0, +-1) have a diagonal covariance with sample
  // variances 2*9/3 = 6 and 2*1/3 = 2/3.
  const double planted[4][2] = {{3, 0}, {-3, 0}, {0, 1}, {0, -1}};
  Rng rng(10);
  std::vector<std::vector<double>> basis;
  while (basis.size() < 2) {
    auto v = random_vec(rng, 10);
    for (const auto& b : basis) {
      double dot = 0;
      for (std::size_t j = 0; j < 10; ++j) dot += v[j] * b[j];
      for (std::size_t j = 0; j < 10; ++j) v[j] -= dot * b[j];
    }
    double norm = 0;
    for (double e : v) norm += e * e;
    for (double& e : v) e /= std::sqrt(norm);
    basis.push_back(v);
  }
  const auto offset = random_vec(rng, 10);
  Tensor<double> x({4, 10});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 10; ++j) x(i, j) = offset[j] + planted[i][0] * basis[0][j] + planted[i][1] * basis[1][j];
  auto p = pca_project(x);
  EXPECT_NEAR(p.explained_variance[0], 6.0, 1e-6);
  EXPECT_NEAR(p.explained_variance[1], 2.0 / 3.0, 1e-6);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(std::abs(p.projection(i, 0)), std::abs(planted[i][0]), 1e-6);
    EXPECT_NEAR(std::abs(p.projection(i, 1)), std::abs(planted[i][1]), 1e-6);
  }
}

TEST(Pca, ProjectionIsLinear) {
  Rng rng(11);
  auto x = testing::random_tensor<double>(30, 6, rng);
  auto p = pca_project(x);
  auto [keys, means] = group_means(x, std::vector<std::string>(30, "all"));
  auto proj_of_mean = p.project(means);
  for (std::size_t d = 0; d < 2; ++d) {
    double m = 0;
    for (std::size_t i = 0; i < 30; ++i) m += p.projection(i, d) / 30;
    EXPECT_NEAR(proj_of_mean(0, d), m, 1e-12);
  }
}

TEST(GroupMeans, FirstAppearanceOrder) {
  auto x = Tensor<double>::matrix(4, 1, {1, 10, 3, 20});
  const std::vector<std::string> g{"b", "a", "b", "a"};
  auto [keys, means] = group_means(x, g);
  EXPECT_EQ(keys, (std::vector<std::string>{"b", "a"}));
  EXPECT_EQ(means, Tensor<double>::matrix(2, 1, {2, 15}));
}

TEST(AveragePrecision, ExhaustiveSmallLists) {
  for (std::size_t n = 1; n <= 6; ++n)
    for (unsigned bits = 0; bits < (1u << n); ++bits) {
      std::vector<int> rel(n);
      for (std::size_t i = 0; i < n; ++i) rel[i] = (bits >> i) & 1u;
      for (std::size_t K = 1; K <= 7; ++K) {
        EXPECT_NEAR(average_precision_at(rel, K), oracle::average_precision_at(rel, K), 1e-15);
        double hits = 0;
        for (std::size_t i = 0; i < std::min(K, n); ++i) hits += rel[i];
        EXPECT_NEAR(precision_at(rel, K), hits / double(K), 1e-15);
      }
    }
}

TEST(AveragePrecision, RelevantNormalization) {
  const std::vector<int> rel{0, 1, 0, 0, 0};
  EXPECT_NEAR(average_precision_at(rel, 5), 0.5 / 5, 1e-15);
  EXPECT_NEAR(average_precision_at(rel, 5, ApNormalization::kRelevant), 0.5, 1e-15);
  EXPECT_THROW(average_precision_at(rel, 0), InputError);
}

SearchSubset subset_from(const std::vector<std::vector<double>>& emb, std::vector<std::size_t> labels,
                         std::vector<std::string> patients) {
  SearchSubset s;
  s.embeddings = Tensor<double>({emb.size(), emb[0].size()});
  for (std::size_t i = 0; i < emb.size(); ++i)
    for (std::size_t j = 0; j < emb[i].size(); ++j) s.embeddings(i, j) = emb[i][j];
  s.labels = std::move(labels);
  s.patients = std::move(patients);
  return s;
}

TEST(Search, ThreePointFixture) {
  const std::vector<std::vector<double>> emb{{1, 2, 3, 4}, {1, 2, 3, 4.5}, {4, 1, 3, 2}};
  auto s = subset_from(emb, {0, 0, 1}, {"p1", "p2", "p3"});
  auto a1 = rank_candidates(s.embeddings, s.patients, 0);
  EXPECT_EQ(a1.front(), 1u);
  std::vector<int> rel_a1, rel_b;
  for (auto j : a1) rel_a1.push_back(s.labels[j] == 0);
  for (auto j : rank_candidates(s.embeddings, s.patients, 2)) rel_b.push_back(s.labels[j] == 1);
  EXPECT_EQ(precision_at(rel_a1, 1), 1.0);
  EXPECT_EQ(precision_at(rel_b, 1), 0.0);
}

TEST(Search, SingleClassGivesOne) {
  Rng rng(12);
  std::vector<std::vector<double>> emb;
  for (int i = 0; i < 8; ++i) emb.push_back(random_vec(rng, 5));
  auto s = subset_from(emb, std::vector<std::size_t>(8, 1), {"a", "b", "c", "d", "e", "f", "g", "h"});
  const std::vector<std::size_t> ks{5, 10};
  auto r = search_eval(std::vector<SearchSubset>{s}, ks);
  EXPECT_EQ(r.map_at[5], 1.0);
  EXPECT_EQ(r.map_at[10], 1.0);
}

TEST(Search, LeaveOnePatientOut) {
  const std::vector<std::vector<double>> emb{{1, 2, 3}, {1, 2, 3.1}, {3, 1, 2}, {1, 3, 2}};
  auto s = subset_from(emb, {0, 0, 1, 1}, {"p", "p", "q", "r"});
  auto ranked = rank_candidates(s.embeddings, s.patients, 0);
  EXPECT_EQ(ranked.size(), 2u);
  EXPECT_EQ(std::count(ranked.begin(), ranked.end(), 1u), 0);
}

TEST(Search, ExhaustiveLabelingsMatchOracle) {
  Rng rng(13);
  const std::vector<std::size_t> ks{1, 2, 3, 5, 10};
  for (std::size_t n = 2; n <= 6; ++n) {
    std::vector<std::vector<double>> emb;
    for (std::size_t i = 0; i < n; ++i) emb.push_back(random_vec(rng, 6));
    std::size_t combos = 1;
    for (std::size_t i = 0; i < n; ++i) combos *= 3;
    for (int shared = 0; shared < 2; ++shared) {
      std::vector<std::string> patients;
      for (std::size_t i = 0; i < n; ++i) patients.push_back("p" + std::to_string(shared ? i / 2 : i));
      if (shared && n <= 2) continue;
      for (std::size_t code = 0; code < combos; ++code) {
        std::vector<std::size_t> labels;
        for (std::size_t i = 0, c = code; i < n; ++i, c /= 3) labels.push_back(c % 3);
        auto s = subset_from(emb, labels, patients);
        auto r = search_eval(std::vector<SearchSubset>{s}, ks);
        for (auto K : ks)
          ASSERT_NEAR(r.map_at[K], oracle::mean_average_precision(emb, labels, patients, K), 1e-12)
              << "n=" << n << " code=" << code << " K=" << K;
      }
    }
  }
}

TEST(Search, AveragesSubsetsAndSkipsSinglePatient) {
  Rng rng(14);
  std::vector<SearchSubset> subsets;
  std::vector<std::vector<double>> emb;
  for (int i = 0; i < 5; ++i) emb.push_back(random_vec(rng, 4));
  subsets.push_back(subset_from(emb, {0, 1, 0, 1, 2}, {"a", "b", "c", "d", "e"}));
  subsets.push_back(subset_from(emb, {0, 0, 1, 1, 1}, {"a", "b", "c", "d", "e"}));
  subsets.push_back(subset_from(emb, {0, 0, 1, 1, 1}, {"a", "a", "a", "a", "a"}));
  const std::vector<std::size_t> ks{3};
  auto r = search_eval(subsets, ks);
  EXPECT_EQ(r.subsets_used, 2u);
  EXPECT_EQ(r.subsets_skipped, 1u);
  EXPECT_NEAR(r.map_at[3], (r.subset_map_at[3][0] + r.subset_map_at[3][1]) / 2, 1e-15);
}

}  // namespace
}  // namespace tilegene
