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

#include "tilegene/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>

namespace tilegene {

// ---------------------------------------------------------------- correlation

double student_t_two_sided(double t, double dof) {
  if (!(dof > 0)) throw InputError("student_t_two_sided: dof must be positive");
  if (std::isinf(t)) return 0.0;
  // P(|T| >= t) = I_{dof / (dof + t^2)}(dof / 2, 1 / 2)
  return boost::math::ibeta(dof / 2.0, 0.5, dof / (dof + t * t));
}

double correlation_p_value(double r, std::size_t n) {
  if (n < 3) throw InputError("correlation p-value needs at least 3 samples");
  const double dof = double(n - 2);
  const double one_minus = 1.0 - r * r;
  if (one_minus <= 0) return 0.0;
  return std::clamp(student_t_two_sided(r * std::sqrt(dof / one_minus), dof), 0.0, 1.0);
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("pearson: inputs differ in length");
  const std::size_t n = x.size();
  if (n < 3) throw InputError("pearson: needs at least 3 samples");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / double(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / double(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw UndefinedStatistic("pearson: zero variance input");
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  return {r, correlation_p_value(r, n)};
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * double(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("spearman: inputs differ in length");
  auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  return pearson(rx, ry);
}

// ---------------------------------------------------------------- multiple testing

const char* to_string(Correction c) { return c == Correction::kHolmSidak ? "holm-sidak" : "benjamini-hochberg"; }

Significance adjust_pvalues(std::span<const double> p, Correction method, double alpha) {
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw InputError("adjust_pvalues: p-value outside [0, 1]");
  if (!(alpha > 0 && alpha < 1)) throw InputError("adjust_pvalues: alpha must lie in (0, 1)");
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  Significance out;
  out.rejected.assign(m, false);
  std::size_t reject = 0;
  if (method == Correction::kHolmSidak) {
    for (std::size_t i = 0; i < m; ++i) {
      const double thr = 1.0 - std::pow(1.0 - alpha, 1.0 / double(m - i));
      if (p[order[i]] > thr) break;
      reject = i + 1;
    }
  } else {
    for (std::size_t i = m; i-- > 0;) {
      if (p[order[i]] <= double(i + 1) * alpha / double(m)) {
        reject = i + 1;
        break;
      }
    }
  }
  for (std::size_t i = 0; i < reject; ++i) out.rejected[order[i]] = true;
  out.count = reject;
  return out;
}

// ---------------------------------------------------------------- errors

MeanStd mean_std(std::span<const double> v) {
  if (v.empty()) return {};
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / double(v.size()))};
}

ErrorReport prediction_errors(const Tensor<double>& pred, const Tensor<double>& truth) {
  if (pred.shape() != truth.shape()) throw DimensionError("prediction_errors: shape mismatch");
  const std::size_t n = truth.rows(), genes = truth.cols();
  if (n < 2) throw InputError("prediction_errors: needs at least 2 samples");
  ErrorReport rep;
  rep.genes.resize(genes);
  std::vector<double> maes, rmses, rrmses;
  for (std::size_t g = 0; g < genes; ++g) {
    double ybar = 0;
    for (std::size_t i = 0; i < n; ++i) ybar += truth(i, g);
    ybar /= double(n);
    double abs_sum = 0, sq_sum = 0, base_sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = pred(i, g) - truth(i, g);
      abs_sum += std::abs(e);
      sq_sum += e * e;
      base_sum += (ybar - truth(i, g)) * (ybar - truth(i, g));
    }
    auto& ge = rep.genes[g];
    ge.mae = abs_sum / double(n);
    ge.rmse = std::sqrt(sq_sum / double(n));
    if (base_sum > 0) {
      ge.rrmse = std::sqrt(sq_sum / base_sum);
      rrmses.push_back(ge.rrmse);
    } else {
      ge.rrmse_defined = false;
      ge.rrmse = 0;
      rep.excluded.push_back(g);
    }
    maes.push_back(ge.mae);
    rmses.push_back(ge.rmse);
  }
  if (!rep.excluded.empty()) {
    std::cerr << "warning: " << rep.excluded.size() << " gene(s) with constant truth excluded from RRMSE\n";
  }
  rep.mae = mean_std(maes);
  rep.rmse = mean_std(rmses);
  rep.rrmse = mean_std(rrmses);
  return rep;
}

// ---------------------------------------------------------------- classification

std::size_t slide_vote(std::span<const std::size_t> bag_labels) {
  if (bag_labels.empty()) throw ContractError("slide_vote: no bag predictions");
  const std::size_t mx = *std::max_element(bag_labels.begin(), bag_labels.end());
  std::vector<std::size_t> counts(mx + 1, 0);
  for (auto l : bag_labels) ++counts[l];
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

std::vector<RocPoint> micro_roc(const Tensor<double>& scores, std::span<const std::size_t> truth) {
  const std::size_t n = scores.rows(), c = scores.cols();
  if (truth.size() != n) throw DimensionError("micro_roc: one label per score row required");
  std::vector<std::pair<double, int>> flat;
  flat.reserve(n * c);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const int y = truth[i] == j ? 1 : 0;
      pos += y;
      flat.emplace_back(scores(i, j), y);
    }
  }
  const std::size_t neg = flat.size() - pos;
  std::stable_sort(flat.begin(), flat.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<RocPoint> curve{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    tp += flat[i].second;
    fp += 1 - flat[i].second;
    if (i + 1 == flat.size() || flat[i + 1].first != flat[i].first) {
      curve.push_back({neg ? double(fp) / double(neg) : 0.0, pos ? double(tp) / double(pos) : 0.0});
    }
  }
  return curve;
}

double auc_trapezoid(std::span<const RocPoint> curve) {
  double a = 0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    a += (curve[i].fpr - curve[i - 1].fpr) * 0.5 * (curve[i].tpr + curve[i - 1].tpr);
  return a;
}

ClassificationReport classification_report(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                                           const Tensor<double>& scores, std::size_t num_classes) {
  if (predicted.size() != truth.size()) throw DimensionError("classification_report: label vectors differ in length");
  if (truth.empty()) throw InputError("classification_report: no slides");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) {
      throw InputError("classification_report: label outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  ClassificationReport rep;
  rep.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++rep.confusion[truth[i]][predicted[i]];
    correct += truth[i] == predicted[i];
  }
  const double n = double(truth.size());
  rep.accuracy = double(correct) / n;
  rep.per_class.resize(num_classes);
  std::size_t averaged = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::size_t tp = rep.confusion[c][c], col = 0, row = 0;
    for (std::size_t j = 0; j < num_classes; ++j) {
      row += rep.confusion[c][j];
      col += rep.confusion[j][c];
    }
    auto& cr = rep.per_class[c];
    cr.support = row;
    cr.precision = col ? double(tp) / double(col) : 0.0;
    cr.recall = row ? double(tp) / double(row) : 0.0;
    cr.f1 = cr.precision + cr.recall > 0 ? 2 * cr.precision * cr.recall / (cr.precision + cr.recall) : 0.0;
    // Classes that never occur in truth or predictions do not enter the
    // macro average.
    if (row || col) {
      rep.f1_macro += cr.f1;
      ++averaged;
    }
    rep.f1_weighted += cr.f1 * double(row) / n;
  }
  rep.f1_macro = averaged ? rep.f1_macro / double(averaged) : 0.0;
  if (scores.rank() == 2 && scores.rows() == truth.size() && scores.cols() == num_classes) {
    rep.micro_roc = micro_roc(scores, truth);
    rep.micro_auc = auc_trapezoid(rep.micro_roc);
  } else if (!scores.empty()) {
    throw DimensionError("classification_report: scores must be n x C");
  }
  return rep;
}

// ---------------------------------------------------------------- PCA

Tensor<double> PcaResult::project(const Tensor<double>& x) const {
  const std::size_t dims = components.rows(), width = components.cols();
  if (x.cols() != width) throw DimensionError("PcaResult::project: width mismatch");
  Tensor<double> out({x.rows(), dims});
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t k = 0; k < dims; ++k) {
      double s = 0;
      for (std::size_t j = 0; j < width; ++j) s += (x(i, j) - mean[j]) * components(k, j);
      out(i, k) = s;
    }
  return out;
}

PcaResult pca_project(const Tensor<double>& x, std::size_t dims) {
  const std::size_t n = x.rows(), width = x.cols();
  if (n < 2) throw InputError("pca_project: needs at least 2 rows");
  if (dims < 1 || dims > width) throw InputError("pca_project: dims must lie in [1, width]");
  Eigen::MatrixXd m(n, width);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < width; ++j) m(i, j) = x(i, j);
  Eigen::RowVectorXd mu = m.colwise().mean();
  m.rowwise() -= mu;
  Eigen::MatrixXd cov = (m.transpose() * m) / double(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  PcaResult out;
  out.mean.assign(mu.data(), mu.data() + width);
  out.components = Tensor<double>({dims, width});
  const double total = std::max(cov.trace(), 0.0);
  for (std::size_t k = 0; k < dims; ++k) {
    const auto col = static_cast<Eigen::Index>(width - 1 - k);  // eigenvalues ascend
    Eigen::VectorXd v = es.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    for (std::size_t j = 0; j < width; ++j) out.components(k, j) = v(static_cast<Eigen::Index>(j));
    const double ev = std::max(es.eigenvalues()(col), 0.0);
    out.explained_variance.push_back(ev);
    out.explained_ratio.push_back(total > 0 ? ev / total : 0.0);
  }
  out.projection = out.project(x);
  return out;
}

std::pair<std::vector<std::string>, Tensor<double>> group_means(const Tensor<double>& rows,
                                                                 std::span<const std::string> groups) {
  if (groups.size() != rows.rows()) throw DimensionError("group_means: one group key per row required");
  std::vector<std::string> keys;
  std::map<std::string, std::size_t> index;
  for (const auto& g : groups)
    if (index.emplace(g, keys.size()).second) keys.push_back(g);
  Tensor<double> sums({keys.size(), rows.cols()});
  std::vector<std::size_t> counts(keys.size(), 0);
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const std::size_t k = index[groups[i]];
    ++counts[k];
    for (std::size_t j = 0; j < rows.cols(); ++j) sums(k, j) += rows(i, j);
  }
  for (std::size_t k = 0; k < keys.size(); ++k)
    for (std::size_t j = 0; j < rows.cols(); ++j) sums(k, j) /= double(counts[k]);
  return {keys, sums};
}

// ---------------------------------------------------------------- search

double precision_at(std::span<const int> relevance, std::size_t K) {
  if (K == 0) throw InputError("precision_at: K must be positive");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(K, relevance.size()); ++i) hits += relevance[i] != 0;
  return double(hits) / double(K);
}

double average_precision_at(std::span<const int> relevance, std::size_t K, ApNormalization norm) {
  if (K == 0) throw InputError("average_precision_at: K must be positive");
  const std::size_t depth = std::min(K, relevance.size());
  if (depth == 0) return 0.0;
  double s = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < depth; ++i) {
    if (relevance[i]) {
      ++hits;
      s += double(hits) / double(i + 1);
    }
  }
  if (norm == ApNormalization::kK) return s / double(depth);
  const auto relevant = static_cast<std::size_t>(std::count_if(relevance.begin(), relevance.end(), [](int r) { return r != 0; }));
  const std::size_t denom = std::min(depth, relevant);
  return denom ? s / double(denom) : 0.0;
}

std::vector<std::size_t> rank_candidates(const Tensor<double>& embeddings, std::span<const std::string> patients,
                                         std::size_t query) {
  const std::size_t n = embeddings.rows();
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t j = 0; j < n; ++j) {
    if (patients[j] == patients[query]) continue;
    const double r = pearson(embeddings.row_span(query), embeddings.row_span(j)).r;
    cand.emplace_back(1.0 - r, j);
  }
  std::sort(cand.begin(), cand.end());
  std::vector<std::size_t> out;
  out.reserve(cand.size());
  for (const auto& c : cand) out.push_back(c.second);
  return out;
}

SearchReport search_eval(std::span<const SearchSubset> subsets, std::span<const std::size_t> ks, ApNormalization norm) {
  SearchReport rep;
  for (const auto& sub : subsets) {
    const std::size_t n = sub.embeddings.rows();
    if (sub.labels.size() != n || sub.patients.size() != n) throw DimensionError("search_eval: subset fields differ in length");
    std::vector<std::string> uniq(sub.patients.begin(), sub.patients.end());
    std::sort(uniq.begin(), uniq.end());
    if (std::unique(uniq.begin(), uniq.end()) - uniq.begin() < 2) {
      std::cerr << "warning: search subset with fewer than two patients skipped\n";
      ++rep.subsets_skipped;
      continue;
    }
    std::map<std::size_t, double> sums;
    std::size_t queries = 0;
    for (std::size_t q = 0; q < n; ++q) {
      auto ranked = rank_candidates(sub.embeddings, sub.patients, q);
      if (ranked.empty()) continue;
      std::vector<int> rel(ranked.size());
      for (std::size_t i = 0; i < ranked.size(); ++i) rel[i] = sub.labels[ranked[i]] == sub.labels[q] ? 1 : 0;
      for (auto K : ks) sums[K] += average_precision_at(rel, K, norm);
      ++queries;
    }
    for (auto K : ks) rep.subset_map_at[K].push_back(sums[K] / double(queries));
    ++rep.subsets_used;
  }
  for (auto K : ks) {
    const auto& v = rep.subset_map_at[K];
    rep.map_at[K] = v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  }
  return rep;
}

}  // namespace tilegene
