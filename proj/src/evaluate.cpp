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

#include "tilegene/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include "tilegene/autodiff.hpp"
#include "tilegene/parallel.hpp"

namespace tilegene {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

BagPredictions predict_bags(const Model<float>& model, std::span<const Bag* const> bags, TestAggregation form,
                            std::size_t workers) {
  const auto& mc = model.config();
  const std::size_t n = bags.size();
  BagPredictions out;
  out.logits = Tensor<double>({n, mc.classes});
  out.probs = Tensor<double>({n, mc.classes});
  out.genes = Tensor<double>({n, mc.genes});
  out.embeddings = Tensor<double>({n, mc.width});
  out.predicted.resize(n);
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  const std::size_t chunk = (n + workers - 1) / workers;
  parallel_for(workers, workers, [&](std::size_t w) {
    Model<float> local = model;
    for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) {
      if (bags[i]->k() != mc.instances || bags[i]->d() != mc.input_dim) {
        throw DataError("bag of slide " + bags[i]->slide_id + " has shape " + shape_string(bags[i]->instances.shape()) +
                        ", model expects " + std::to_string(mc.instances) + "x" + std::to_string(mc.input_dim));
      }
      const auto fo = local.infer(bags[i]->instances, form);
      const auto probs = softmax_rows_value(fo.logits);
      std::size_t best = 0;
      for (std::size_t c = 0; c < mc.classes; ++c) {
        out.logits(i, c) = fo.logits(0, c);
        out.probs(i, c) = probs(0, c);
        if (fo.logits(0, c) > fo.logits(0, best)) best = c;
      }
      out.predicted[i] = best;
      for (std::size_t g = 0; g < mc.genes; ++g) out.genes(i, g) = fo.S(0, g);
      for (std::size_t j = 0; j < mc.width; ++j) out.embeddings(i, j) = fo.c(0, j);
    }
  });
  return out;
}

SlideSummary summarize_slides(std::span<const Bag* const> bags, const BagPredictions& preds) {
  SlideSummary s;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    auto [it, fresh] = index.emplace(bags[i]->slide_id, s.slide_ids.size());
    if (fresh) {
      s.slide_ids.push_back(bags[i]->slide_id);
      s.case_ids.push_back(bags[i]->case_id);
      s.truth.push_back(bags[i]->label);
      s.bag_rows.emplace_back();
    } else if (s.truth[it->second] != bags[i]->label) {
      throw DataError("slide " + bags[i]->slide_id + " has bags with different labels");
    }
    s.bag_rows[it->second].push_back(i);
  }
  const std::size_t n = s.slide_ids.size(), C = preds.probs.cols(), G = preds.genes.cols();
  s.scores = Tensor<double>({n, C});
  s.gene_pred = Tensor<double>({n, G});
  s.gene_truth = Tensor<double>({n, G});
  for (std::size_t k = 0; k < n; ++k) {
    const auto& rows = s.bag_rows[k];
    std::vector<std::size_t> votes;
    for (auto r : rows) {
      votes.push_back(preds.predicted[r]);
      for (std::size_t c = 0; c < C; ++c) s.scores(k, c) += preds.probs(r, c) / double(rows.size());
      for (std::size_t g = 0; g < G; ++g) s.gene_pred(k, g) += preds.genes(r, g) / double(rows.size());
    }
    s.predicted.push_back(slide_vote(votes));
    const auto& target = bags[rows.front()]->gene_target;
    if (target.size() != G) throw DataError("slide " + s.slide_ids[k] + " gene target width mismatch");
    for (std::size_t g = 0; g < G; ++g) s.gene_truth(k, g) = target[g];
  }
  return s;
}

GeneReport gene_report(const Tensor<double>& pred, const Tensor<double>& truth, std::span<const std::string> gene_ids,
                       double alpha, std::size_t workers) {
  if (pred.shape() != truth.shape()) throw DimensionError("gene_report: prediction and truth shapes differ");
  const std::size_t n = pred.rows(), G = pred.cols();
  if (gene_ids.size() != G) throw DimensionError("gene_report: gene id count does not match columns");
  GeneReport rep;
  rep.alpha = alpha;
  rep.rows.resize(G);
  parallel_for(G, workers, [&](std::size_t g) {
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = pred(i, g);
      y[i] = truth(i, g);
    }
    auto& row = rep.rows[g];
    row.gene_id = gene_ids[g];
    try {
      const auto p = pearson(x, y);
      const auto s = spearman(x, y);
      row.pearson_r = p.r;
      row.pearson_p = p.p;
      row.spearman_rho = s.r;
      row.spearman_p = s.p;
    } catch (const UndefinedStatistic&) {
      row.defined = false;
      row.pearson_r = row.spearman_rho = std::nan("");
      row.pearson_p = row.spearman_p = 1.0;
    }
  });
  std::vector<double> pp(G), sp(G);
  double sum_r = 0, sum_rho = 0;
  for (std::size_t g = 0; g < G; ++g) {
    pp[g] = rep.rows[g].pearson_p;
    sp[g] = rep.rows[g].spearman_p;
    if (rep.rows[g].defined) {
      sum_r += rep.rows[g].pearson_r;
      sum_rho += rep.rows[g].spearman_rho;
    } else {
      ++rep.undefined;
    }
  }
  const std::size_t defined = G - rep.undefined;
  rep.mean_pearson = defined ? sum_r / double(defined) : std::nan("");
  rep.mean_spearman = defined ? sum_rho / double(defined) : std::nan("");
  if (G == 0) return rep;
  const auto phs = adjust_pvalues(pp, Correction::kHolmSidak, alpha);
  const auto pbh = adjust_pvalues(pp, Correction::kBenjaminiHochberg, alpha);
  const auto shs = adjust_pvalues(sp, Correction::kHolmSidak, alpha);
  const auto sbh = adjust_pvalues(sp, Correction::kBenjaminiHochberg, alpha);
  for (std::size_t g = 0; g < G; ++g) {
    rep.rows[g].significant_hs = phs.rejected[g];
    rep.rows[g].significant_bh = pbh.rejected[g];
    rep.rows[g].spearman_significant_hs = shs.rejected[g];
    rep.rows[g].spearman_significant_bh = sbh.rejected[g];
  }
  rep.pearson_hs = phs.count;
  rep.pearson_bh = pbh.count;
  rep.spearman_hs = shs.count;
  rep.spearman_bh = sbh.count;
  return rep;
}

std::vector<SearchSubset> build_search_subsets(const SlideSummary& slides, const BagPredictions& preds,
                                               std::size_t count) {
  std::vector<SearchSubset> out(count);
  const std::size_t n = slides.slide_ids.size(), D = preds.embeddings.cols();
  for (std::size_t j = 0; j < count; ++j) {
    auto& sub = out[j];
    sub.embeddings = Tensor<double>({n, D});
    for (std::size_t k = 0; k < n; ++k) {
      const auto& rows = slides.bag_rows[k];
      const std::size_t r = rows[j % rows.size()];
      for (std::size_t c = 0; c < D; ++c) sub.embeddings(k, c) = preds.embeddings(r, c);
    }
    sub.labels = slides.truth;
    sub.patients = slides.case_ids;
  }
  return out;
}

PcaExport pca_export(const SlideSummary& slides, const BagPredictions& preds) {
  PcaExport out;
  out.pca = pca_project(preds.embeddings, 2);
  const std::size_t dims = out.pca.projection.cols();
  out.slide_mean_projection = Tensor<double>({slides.slide_ids.size(), dims});
  for (std::size_t k = 0; k < slides.slide_ids.size(); ++k) {
    const auto& rows = slides.bag_rows[k];
    for (auto r : rows)
      for (std::size_t c = 0; c < dims; ++c)
        out.slide_mean_projection(k, c) += out.pca.projection(r, c) / double(rows.size());
  }
  return out;
}

namespace {

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json mean_std_json(const MeanStd& m) { return {{"mean", number(m.mean)}, {"std", number(m.std)}}; }

}  // namespace

std::string gene_report_csv(const GeneReport& r) {
  std::string out =
      "gene_id,pearson_r,pearson_p,spearman_rho,spearman_p,significant_hs,significant_bh,"
      "spearman_significant_hs,spearman_significant_bh\n";
  for (const auto& g : r.rows) {
    out += g.gene_id + "," + format_double(g.pearson_r) + "," + format_double(g.pearson_p) + "," +
           format_double(g.spearman_rho) + "," + format_double(g.spearman_p) + "," + (g.significant_hs ? "1" : "0") +
           "," + (g.significant_bh ? "1" : "0") + "," + (g.spearman_significant_hs ? "1" : "0") + "," +
           (g.spearman_significant_bh ? "1" : "0") + "\n";
  }
  return out;
}

nlohmann::json gene_report_json(const GeneReport& r) {
  return {{"genes", r.rows.size()},
          {"alpha", r.alpha},
          {"undefined", r.undefined},
          {"mean_pearson_r", number(r.mean_pearson)},
          {"mean_spearman_rho", number(r.mean_spearman)},
          {"significant",
           {{"pearson", {{"holm_sidak", r.pearson_hs}, {"benjamini_hochberg", r.pearson_bh}}},
            {"spearman", {{"holm_sidak", r.spearman_hs}, {"benjamini_hochberg", r.spearman_bh}}}}}};
}

std::string error_report_csv(const ErrorReport& r, std::span<const std::string> gene_ids) {
  std::string out = "gene_id,mae,rmse,rrmse\n";
  for (std::size_t g = 0; g < r.genes.size(); ++g) {
    const auto& e = r.genes[g];
    out += gene_ids[g] + "," + format_double(e.mae) + "," + format_double(e.rmse) + "," +
           (e.rrmse_defined ? format_double(e.rrmse) : std::string("nan")) + "\n";
  }
  return out;
}

nlohmann::json error_report_json(const ErrorReport& r) {
  return {{"mae", mean_std_json(r.mae)},
          {"rmse", mean_std_json(r.rmse)},
          {"rrmse", mean_std_json(r.rrmse)},
          {"excluded_from_rrmse", r.excluded.size()}};
}

nlohmann::json classification_json(const ClassificationReport& r, std::span<const std::string> class_names) {
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& pc = r.per_class[c];
    per_class.push_back({{"class", c < class_names.size() ? class_names[c] : std::to_string(c)},
                         {"precision", pc.precision},
                         {"recall", pc.recall},
                         {"f1", pc.f1},
                         {"support", pc.support}});
  }
  return {{"accuracy", r.accuracy},
          {"f1_macro", r.f1_macro},
          {"f1_weighted", r.f1_weighted},
          {"confusion", r.confusion},
          {"per_class", per_class},
          {"micro_auc", r.micro_auc}};
}

std::string roc_csv(std::span<const RocPoint> roc) {
  std::string out = "fpr,tpr\n";
  for (const auto& p : roc) out += format_double(p.fpr) + "," + format_double(p.tpr) + "\n";
  return out;
}

std::string pca_csv(const PcaExport& p, const SlideSummary& slides) {
  std::string out = "kind,slide_id,label,pc1,pc2\n";
  const auto& proj = p.pca.projection;
  auto pc = [](const Tensor<double>& t, std::size_t r, std::size_t c) {
    return c < t.cols() ? format_double(t(r, c)) : std::string("0");
  };
  for (std::size_t k = 0; k < slides.slide_ids.size(); ++k) {
    for (auto r : slides.bag_rows[k]) {
      out += "bag," + slides.slide_ids[k] + "," + std::to_string(slides.truth[k]) + "," + pc(proj, r, 0) + "," +
             pc(proj, r, 1) + "\n";
    }
  }
  for (std::size_t k = 0; k < slides.slide_ids.size(); ++k) {
    out += "slide," + slides.slide_ids[k] + "," + std::to_string(slides.truth[k]) + "," +
           pc(p.slide_mean_projection, k, 0) + "," + pc(p.slide_mean_projection, k, 1) + "\n";
  }
  return out;
}

std::string slide_predictions_csv(const SlideSummary& s) {
  std::string out = "slide_id,case_id,truth,predicted";
  for (std::size_t c = 0; c < s.scores.cols(); ++c) out += ",score_" + std::to_string(c);
  out += "\n";
  for (std::size_t k = 0; k < s.slide_ids.size(); ++k) {
    out += s.slide_ids[k] + "," + s.case_ids[k] + "," + std::to_string(s.truth[k]) + "," +
           std::to_string(s.predicted[k]);
    for (std::size_t c = 0; c < s.scores.cols(); ++c) out += "," + format_double(s.scores(k, c));
    out += "\n";
  }
  return out;
}

nlohmann::json search_json(const SearchReport& r) {
  nlohmann::json map_at = nlohmann::json::object(), per_subset = nlohmann::json::object();
  for (const auto& [K, v] : r.map_at) map_at["MAP@" + std::to_string(K)] = v;
  for (const auto& [K, v] : r.subset_map_at) per_subset["MAP@" + std::to_string(K)] = v;
  return {{"map", map_at},
          {"per_subset", per_subset},
          {"subsets_used", r.subsets_used},
          {"subsets_skipped", r.subsets_skipped}};
}

}  // namespace tilegene
