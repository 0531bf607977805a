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

#include "tilegene/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tilegene/parallel.hpp"
#include "tilegene/rng.hpp"
#include "tilegene/wsi.hpp"

namespace fs = std::filesystem;

namespace tilegene {

void SynthSpec::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("synth spec: " + m); };
  if (classes < 2) fail("classes must be >= 2");
  if (slides_per_class < 1 || slides_per_case < 1 || bags_per_slide < 1) fail("counts must be positive");
  if (k < 1 || d < 1 || genes < 1 || tiles_per_slide < 1) fail("k, d, genes and tiles_per_slide must be positive");
  if (classes > d) fail("orthogonal class means need classes <= d");
  if (gene_rank > d) fail("gene_rank must be <= d");
  for (double v : {separation, slide_sigma, tile_sigma, gene_noise, mixing_scale}) {
    if (!(v >= 0) || std::isnan(v)) fail("separation, noise levels and mixing scale must be non-negative");
  }
  if (!std::isfinite(mixing_scale)) fail("mixing matrix must be finite");
  double sum = 0;
  for (double f : fractions) {
    if (!(f >= 0)) fail("split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail("split fractions must sum to 1");
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = nlohmann::json{{"classes", s.classes},
                     {"slides_per_class", s.slides_per_class},
                     {"slides_per_case", s.slides_per_case},
                     {"bags_per_slide", s.bags_per_slide},
                     {"k", s.k},
                     {"d", s.d},
                     {"genes", s.genes},
                     {"tiles_per_slide", s.tiles_per_slide},
                     {"separation", s.separation},
                     {"slide_sigma", s.slide_sigma},
                     {"tile_sigma", s.tile_sigma},
                     {"gene_noise", s.gene_noise},
                     {"mixing_scale", s.mixing_scale},
                     {"gene_rank", s.gene_rank},
                     {"fractions", s.fractions},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
  j.at("classes").get_to(s.classes);
  j.at("slides_per_class").get_to(s.slides_per_class);
  j.at("slides_per_case").get_to(s.slides_per_case);
  j.at("bags_per_slide").get_to(s.bags_per_slide);
  j.at("k").get_to(s.k);
  j.at("d").get_to(s.d);
  j.at("genes").get_to(s.genes);
  j.at("tiles_per_slide").get_to(s.tiles_per_slide);
  j.at("separation").get_to(s.separation);
  j.at("slide_sigma").get_to(s.slide_sigma);
  j.at("tile_sigma").get_to(s.tile_sigma);
  j.at("gene_noise").get_to(s.gene_noise);
  j.at("mixing_scale").get_to(s.mixing_scale);
  j.at("gene_rank").get_to(s.gene_rank);
  j.at("fractions").get_to(s.fractions);
  j.at("seed").get_to(s.seed);
}

SynthSpec paper_shape_spec() {
  SynthSpec s;
  s.d = 1024;
  s.genes = 1000;
  return s;
}

namespace {

// Rows first..rows-1 of m are made orthonormal to all earlier rows.
void orthonormal_rows(Tensor<double>& m, std::size_t first, Rng& rng) {
  const std::size_t d = m.cols();
  for (std::size_t c = first; c < m.rows(); ++c) {
    for (;;) {
      for (std::size_t j = 0; j < d; ++j) m(c, j) = normal01(rng);
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t p = 0; p < c; ++p) {
          double dot = 0;
          for (std::size_t j = 0; j < d; ++j) dot += m(c, j) * m(p, j);
          for (std::size_t j = 0; j < d; ++j) m(c, j) -= dot * m(p, j);
        }
      }
      double norm = 0;
      for (std::size_t j = 0; j < d; ++j) norm += m(c, j) * m(c, j);
      norm = std::sqrt(norm);
      if (norm < 1e-8) continue;
      for (std::size_t j = 0; j < d; ++j) m(c, j) /= norm;
      break;
    }
  }
}

// Unit class directions followed by further orthonormal directions.
Tensor<double> directions(const SynthSpec& spec, std::size_t count) {
  Tensor<double> u({count, spec.d});
  Rng rng(derive_seed(spec.seed, "class_means"));
  orthonormal_rows(u, 0, rng);
  return u;
}

std::string numbered(const char* prefix, std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s-%04zu", prefix, i);
  return buf;
}

// Distinct positions drawn from a square grid a little larger than needed.
std::vector<TileCoord> synthetic_tiles(std::size_t count, Rng& rng) {
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(1.5 * double(count))));
  std::vector<TileCoord> grid;
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t c = 0; c < side; ++c) grid.push_back({std::int32_t(r), std::int32_t(c), 1.0});
  shuffle(grid.begin(), grid.end(), rng);
  grid.resize(count);
  std::sort(grid.begin(), grid.end(), [](const auto& a, const auto& b) {
    return std::tie(a.row, a.col) < std::tie(b.row, b.col);
  });
  return grid;
}

}  // namespace

SynthDataset generate(const SynthSpec& spec, std::size_t workers) {
  spec.validate();
  SynthDataset out;
  const auto basis = directions(spec, std::max(spec.classes, spec.gene_rank));
  out.class_means = Tensor<double>({spec.classes, spec.d});
  for (std::size_t c = 0; c < spec.classes; ++c)
    for (std::size_t j = 0; j < spec.d; ++j) out.class_means(c, j) = spec.separation * basis(c, j);
  {
    Rng rng(derive_seed(spec.seed, "mixing"));
    out.mixing = Tensor<double>({spec.genes, spec.d});
    if (spec.gene_rank == 0) {
      const double sd = spec.mixing_scale / std::sqrt(double(spec.d));
      for (auto& v : out.mixing.data()) v = sd * normal01(rng);
    } else {
      const double sd = spec.mixing_scale / std::sqrt(double(spec.gene_rank));
      for (std::size_t g = 0; g < spec.genes; ++g) {
        for (std::size_t r = 0; r < spec.gene_rank; ++r) {
          const double b = sd * normal01(rng);
          for (std::size_t j = 0; j < spec.d; ++j) out.mixing(g, j) += b * basis(r, j);
        }
      }
    }
  }

  const std::size_t num_slides = spec.classes * spec.slides_per_class;
  std::vector<std::string> case_ids;
  std::vector<CaseLabel> case_labels;
  std::vector<std::size_t> case_of(num_slides);
  out.slides.resize(num_slides);
  for (std::size_t c = 0, s = 0; c < spec.classes; ++c) {
    for (std::size_t j = 0; j < spec.slides_per_class; ++j, ++s) {
      if (j % spec.slides_per_case == 0) {
        case_ids.push_back(numbered("case", case_ids.size()));
        case_labels.push_back({case_ids.back(), std::uint32_t(c)});
      }
      case_of[s] = case_ids.size() - 1;
      auto& e = out.slides[s].entry;
      e.slide_id = numbered("slide", s);
      e.case_id = case_ids.back();
      e.label = std::uint32_t(c);
    }
  }

  Tensor<double> slide_means({num_slides, spec.d});
  parallel_for(num_slides, workers, [&](std::size_t s) {
    auto& slide = out.slides[s];
    Rng rng(derive_seed(spec.seed, "slide", s));
    std::vector<double> center(spec.d);
    for (std::size_t j = 0; j < spec.d; ++j) {
      center[j] = out.class_means(slide.entry.label, j) + spec.slide_sigma * normal01(rng);
    }
    auto tiles = synthetic_tiles(spec.tiles_per_slide, rng);
    Tensor<float> features({tiles.size(), spec.d});
    for (std::size_t t = 0; t < tiles.size(); ++t) {
      for (std::size_t j = 0; j < spec.d; ++j) {
        const double x = center[j] + spec.tile_sigma * normal01(rng);
        features(t, j) = float(x);
        slide_means(s, j) += double(features(t, j)) / double(tiles.size());
      }
    }
    KMeansOptions ko;
    ko.k = spec.k;
    const auto assignment = cluster_tiles(tiles, derive_seed(spec.seed, "kmeans", s), ko);
    TileEmbeddings emb(tiles, std::move(features));
    BagMeta meta{slide.entry.slide_id, slide.entry.case_id, slide.entry.label, {}};
    slide.bags = sample_bags(assignment, tiles, emb, spec.bags_per_slide, derive_seed(spec.seed, "bags", s), meta);
  });

  const std::size_t num_cases = case_ids.size();
  out.case_means = Tensor<double>({num_cases, spec.d});
  std::vector<std::size_t> per_case(num_cases, 0);
  for (std::size_t s = 0; s < num_slides; ++s) ++per_case[case_of[s]];
  for (std::size_t s = 0; s < num_slides; ++s)
    for (std::size_t j = 0; j < spec.d; ++j) out.case_means(case_of[s], j) += slide_means(s, j) / double(per_case[case_of[s]]);

  out.raw_signal = Tensor<double>({num_cases, spec.genes});
  Rng noise(derive_seed(spec.seed, "gene_noise"));
  for (std::size_t c = 0; c < num_cases; ++c) {
    for (std::size_t g = 0; g < spec.genes; ++g) {
      double y = 0;
      for (std::size_t j = 0; j < spec.d; ++j) y += out.mixing(g, j) * out.case_means(c, j);
      out.raw_signal(c, g) = y + spec.gene_noise * normal01(noise);
    }
  }

  // Shift every gene so its smallest value is 1, then run the gene pipeline.
  GeneTable raw;
  raw.cases = case_ids;
  for (std::size_t g = 0; g < spec.genes; ++g) raw.gene_ids.push_back(numbered("gene", g));
  raw.values.resize(num_cases * spec.genes);
  for (std::size_t g = 0; g < spec.genes; ++g) {
    double lo = out.raw_signal(0, g);
    for (std::size_t c = 1; c < num_cases; ++c) lo = std::min(lo, out.raw_signal(c, g));
    for (std::size_t c = 0; c < num_cases; ++c) raw.values[c * spec.genes + g] = out.raw_signal(c, g) - lo + 1.0;
  }
  out.genes = log_transform(filter_median_zero(raw));

  const auto split = split_cases(case_labels, spec.fractions, derive_seed(spec.seed, "split"), spec.classes);
  for (std::size_t s = 0; s < num_slides; ++s) {
    auto& slide = out.slides[s];
    slide.entry.split = split.of(slide.entry.case_id);
    const auto row = out.genes.case_row(*out.genes.case_index(slide.entry.case_id));
    const std::vector<float> target(row.begin(), row.end());
    for (auto& b : slide.bags) b.gene_target = target;
  }

  auto& m = out.manifest;
  m.k = spec.k;
  m.d = spec.d;
  m.genes = out.genes.num_genes();
  m.classes = spec.classes;
  for (std::size_t c = 0; c < spec.classes; ++c) m.class_names.push_back(numbered("class", c));
  m.fractions = spec.fractions;
  m.seed = spec.seed;
  for (const auto& s : out.slides) m.slides.push_back(s.entry);
  return out;
}

void write_dataset(const std::string& dir, SynthDataset& data) {
  fs::create_directories(dir);
  for (std::size_t s = 0; s < data.slides.size(); ++s) {
    write_slide_bags(dir, data.slides[s].entry, data.slides[s].bags);
    data.manifest.slides[s] = data.slides[s].entry;
  }
  write_gene_index((fs::path(dir) / data.manifest.gene_index).string(), data.genes);
  write_gene_matrix((fs::path(dir) / "expression.tsv").string(), data.genes);
  write_manifest(dir, data.manifest);
}

BayesEstimate oracle_bayes_accuracy(const SynthSpec& spec, std::size_t draws) {
  spec.validate();
  BayesEstimate est;
  est.draws = draws;
  if (!std::isfinite(spec.separation)) {
    est.accuracy = est.ci_low = est.ci_high = 1.0;
    return est;
  }
  // Orthogonal means of equal norm: only the C coordinates spanned by the
  // means affect the decision, so simulate in that basis.
  const std::size_t C = spec.classes;
  const double sd = std::sqrt(spec.slide_sigma * spec.slide_sigma +
                              spec.tile_sigma * spec.tile_sigma / double(spec.tiles_per_slide));
  Rng rng(derive_seed(spec.seed, "bayes"));
  std::vector<double> x(C);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const std::size_t c = uniform_index(rng, C);
    for (std::size_t j = 0; j < C; ++j) x[j] = (j == c ? spec.separation : 0.0) + sd * normal01(rng);
    // ||x - s e_j||^2 = ||x||^2 - 2 s x_j + s^2: nearest mean has the largest x_j.
    std::size_t best = 0;
    for (std::size_t j = 1; j < C; ++j)
      if (spec.separation * x[j] > spec.separation * x[best]) best = j;
    correct += best == c;
  }
  est.accuracy = double(correct) / double(draws);
  const double half = 1.96 * std::sqrt(est.accuracy * (1 - est.accuracy) / double(draws));
  est.ci_low = std::max(0.0, est.accuracy - half);
  est.ci_high = std::min(1.0, est.accuracy + half);
  return est;
}

}  // namespace tilegene
