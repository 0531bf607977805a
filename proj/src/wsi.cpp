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

#include "tilegene/wsi.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "tilegene/binio.hpp"

namespace tilegene {

// ---------------------------------------------------------------- images

RgbImage::RgbImage(std::size_t w, std::size_t h, std::array<std::uint8_t, 3> fill)
    : width(w), height(h), pixels(w * h * 3) {
  for (std::size_t i = 0; i < w * h; ++i) std::copy(fill.begin(), fill.end(), pixels.begin() + 3 * i);
}

std::array<std::uint8_t, 3> RgbImage::at(std::size_t x, std::size_t y) const {
  const std::size_t i = 3 * (y * width + x);
  return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void RgbImage::set(std::size_t x, std::size_t y, std::array<std::uint8_t, 3> rgb) {
  std::copy(rgb.begin(), rgb.end(), pixels.begin() + 3 * (y * width + x));
}

namespace {

std::string next_ppm_token(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
  if (tok.empty()) throw FormatError("ppm: truncated header", pos);
  return tok;
}

}  // namespace

RgbImage read_ppm(const std::string& path) {
  auto bytes = binio::read_file(path);
  std::size_t pos = 0;
  if (next_ppm_token(bytes, pos) != "P6") throw FormatError(path + ": not a binary PPM (expected \"P6\")", 0);
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_ppm_token(bytes, pos));
    h = std::stoul(next_ppm_token(bytes, pos));
    maxval = std::stoul(next_ppm_token(bytes, pos));
  } catch (const std::logic_error&) {
    throw FormatError(path + ": bad PPM header", pos);
  }
  if (maxval != 255) throw FormatError(path + ": only maxval 255 is supported", pos);
  ++pos;  // single whitespace after maxval
  RgbImage img;
  img.width = w;
  img.height = h;
  if (bytes.size() < pos + w * h * 3) throw FormatError(path + ": truncated pixel data", bytes.size());
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + w * h * 3));
  return img;
}

void write_ppm(const std::string& path, const RgbImage& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(image.pixels.begin(), image.pixels.end());
  binio::write_file(path, out);
}

// ---------------------------------------------------------------- masking

std::size_t TissueMask::count() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1)); }

TissueMask tissue_mask(const RgbImage& thumbnail, const TissueThresholds& th) {
  if (thumbnail.width == 0 || thumbnail.height == 0) throw InputError("tissue_mask: empty image");
  if (thumbnail.pixels.size() != thumbnail.width * thumbnail.height * 3)
    throw InputError("tissue_mask: pixel buffer does not match image size");
  TissueMask m{thumbnail.width, thumbnail.height, std::vector<std::uint8_t>(thumbnail.width * thumbnail.height)};
  for (std::size_t i = 0; i < m.mask.size(); ++i) {
    const double r = thumbnail.pixels[3 * i] / 255.0;
    const double g = thumbnail.pixels[3 * i + 1] / 255.0;
    const double b = thumbnail.pixels[3 * i + 2] / 255.0;
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;
    const double sat = mx > 0 ? delta / mx : 0.0;
    double hue = 0.0;
    if (delta > 0) {
      if (mx == r) hue = 60.0 * std::fmod((g - b) / delta + 6.0, 6.0);
      else if (mx == g) hue = 60.0 * ((b - r) / delta + 2.0);
      else hue = 60.0 * ((r - g) / delta + 4.0);
    }
    const bool marker = sat > th.marker_min_saturation && hue >= th.marker_hue_low && hue < th.marker_hue_high;
    const bool tissue = sat > th.min_saturation && mx < th.max_value && mx >= th.min_value && !marker;
    m.mask[i] = tissue ? 1 : 0;
  }
  return m;
}

std::vector<TileCoord> select_tiles(const TissueMask& mask, std::size_t tile, double min_fraction) {
  if (tile == 0) throw InputError("select_tiles: tile size must be positive");
  if (mask.width < tile || mask.height < tile) {
    throw InputError("select_tiles: mask " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                     " is smaller than one " + std::to_string(tile) + "x" + std::to_string(tile) + " tile");
  }
  std::vector<TileCoord> out;
  const double area = static_cast<double>(tile * tile);
  for (std::size_t ty = 0; ty + tile <= mask.height; ty += tile) {
    for (std::size_t tx = 0; tx + tile <= mask.width; tx += tile) {
      std::size_t hits = 0;
      for (std::size_t y = ty; y < ty + tile; ++y)
        for (std::size_t x = tx; x < tx + tile; ++x) hits += mask.at(x, y);
      const double frac = static_cast<double>(hits) / area;
      if (frac >= min_fraction)
        out.push_back({static_cast<std::int32_t>(ty / tile), static_cast<std::int32_t>(tx / tile), frac});
    }
  }
  return out;
}

// ---------------------------------------------------------------- k-means

namespace {

double sq_dist(const Point2& a, const Point2& b) {
  const double dr = a[0] - b[0], dc = a[1] - b[1];
  return dr * dr + dc * dc;
}

std::size_t nearest(const Point2& p, std::span<const Point2> centers) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = sq_dist(p, centers[c]);
    if (d < bd) {
      bd = d;
      best = c;
    }
  }
  return best;
}

std::vector<Point2> seed_plus_plus(std::span<const Point2> pts, std::size_t k, Rng& rng) {
  std::vector<Point2> centers;
  centers.reserve(k);
  centers.push_back(pts[uniform_index(rng, pts.size())]);
  std::vector<double> d2(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = sq_dist(pts[i], centers[0]);
  while (centers.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0) {
      const double u = uniform01(rng) * total;
      double acc = 0;
      pick = pts.size() - 1;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        acc += d2[i];
        if (u < acc && d2[i] > 0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform_index(rng, pts.size());
    }
    centers.push_back(pts[pick]);
    for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = std::min(d2[i], sq_dist(pts[i], centers.back()));
  }
  return centers;
}

// Moves the farthest point of the largest cluster into each empty cluster.
// Returns true if anything was repaired.
bool repair_empty(std::span<const Point2> pts, std::vector<std::size_t>& membership, std::vector<Point2>& centers) {
  bool repaired = false;
  const std::size_t k = centers.size();
  while (true) {
    std::vector<std::size_t> sizes(k, 0);
    for (auto m : membership) ++sizes[m];
    auto empty = std::find(sizes.begin(), sizes.end(), std::size_t{0});
    if (empty == sizes.end()) return repaired;
    const std::size_t e = static_cast<std::size_t>(empty - sizes.begin());
    const std::size_t largest = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    if (sizes[largest] < 2) return repaired;
    std::size_t far = 0;
    double fd = -1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (membership[i] != largest) continue;
      const double d = sq_dist(pts[i], centers[largest]);
      if (d > fd) {
        fd = d;
        far = i;
      }
    }
    membership[far] = e;
    centers[e] = pts[far];
    repaired = true;
  }
}

std::vector<Point2> cluster_means(std::span<const Point2> pts, std::span<const std::size_t> membership,
                                  const std::vector<Point2>& previous) {
  std::vector<Point2> sums(previous.size(), Point2{0, 0});
  std::vector<std::size_t> counts(previous.size(), 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    sums[membership[i]][0] += pts[i][0];
    sums[membership[i]][1] += pts[i][1];
    ++counts[membership[i]];
  }
  std::vector<Point2> out(previous.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = counts[c] ? Point2{sums[c][0] / double(counts[c]), sums[c][1] / double(counts[c])} : previous[c];
  }
  return out;
}

}  // namespace

double kmeans_cost(std::span<const Point2> points, std::span<const std::size_t> membership,
                   std::span<const Point2> centers) {
  double cost = 0;
  for (std::size_t i = 0; i < points.size(); ++i) cost += sq_dist(points[i], centers[membership[i]]);
  return cost;
}

std::vector<std::vector<std::size_t>> ClusterAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(centers.size());
  for (std::size_t i = 0; i < membership.size(); ++i) out[membership[i]].push_back(point_tile[i]);
  return out;
}

ClusterAssignment cluster_tiles(std::span<const TileCoord> coords, std::uint64_t seed, const KMeansOptions& options) {
  if (coords.empty()) throw InputError("cluster_tiles: no tiles to cluster");
  if (options.k == 0) throw ConfigError("cluster_tiles: k must be positive");
  const std::size_t k = options.k;
  Rng rng(seed);
  ClusterAssignment out;

  if (coords.size() <= k) {
    // Every tile is its own cluster; pad with tiles drawn with replacement so
    // the bag keeps k instances.
    out.degenerate = coords.size() < k;
    if (out.degenerate) {
      std::cerr << "warning: " << coords.size() << " tiles for " << k
                << " clusters; duplicating tiles to fill the bag\n";
    }
    out.point_tile.resize(k);
    for (std::size_t i = 0; i < k; ++i) out.point_tile[i] = i < coords.size() ? i : uniform_index(rng, coords.size());
    out.membership.resize(k);
    std::iota(out.membership.begin(), out.membership.end(), std::size_t{0});
    for (auto t : out.point_tile) out.centers.push_back({double(coords[t].row), double(coords[t].col)});
    out.cost_history.push_back(0.0);
    out.converged = true;
  } else {
    std::vector<Point2> pts;
    pts.reserve(coords.size());
    for (const auto& c : coords) pts.push_back({double(c.row), double(c.col)});
    out.point_tile.resize(pts.size());
    std::iota(out.point_tile.begin(), out.point_tile.end(), std::size_t{0});

    auto centers = seed_plus_plus(pts, k, rng);
    std::vector<std::size_t> membership(pts.size(), k);  // k = unassigned
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      std::vector<std::size_t> next(pts.size());
      for (std::size_t i = 0; i < pts.size(); ++i) next[i] = nearest(pts[i], centers);
      const bool repaired = repair_empty(pts, next, centers);
      out.cost_history.push_back(kmeans_cost(pts, next, centers));
      out.iterations = it + 1;
      const bool stable = next == membership && !repaired;
      membership = std::move(next);
      if (stable) {
        out.converged = true;
        break;
      }
      centers = cluster_means(pts, membership, centers);
    }
    if (!out.converged) {
      std::vector<std::size_t> next(pts.size());
      for (std::size_t i = 0; i < pts.size(); ++i) next[i] = nearest(pts[i], centers);
      if (!repair_empty(pts, next, centers)) membership = std::move(next);
      out.cost_history.push_back(kmeans_cost(pts, membership, centers));
    }
    out.centers = std::move(centers);
    out.membership = std::move(membership);
  }

  Point2 origin{0.0, 0.0};
  if (options.origin == CenterOrigin::kTissueCentroid) {
    for (const auto& c : coords) {
      origin[0] += c.row;
      origin[1] += c.col;
    }
    origin[0] /= double(coords.size());
    origin[1] /= double(coords.size());
  }
  out.sorted_order = sort_clusters(out.centers, origin);
  return out;
}

std::vector<std::size_t> sort_clusters(std::span<const Point2> centers, Point2 origin) {
  std::vector<std::size_t> order(centers.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> norm2(centers.size());
  for (std::size_t i = 0; i < centers.size(); ++i) norm2[i] = sq_dist(centers[i], origin);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (norm2[a] != norm2[b]) return norm2[a] < norm2[b];
    return centers[a] < centers[b];
  });
  return order;
}

// ---------------------------------------------------------------- embeddings

TileEmbeddings::TileEmbeddings(std::vector<TileCoord> tiles, Tensor<float> features)
    : tiles_(std::move(tiles)), features_(std::move(features)) {
  if (features_.rows() != tiles_.size()) throw DimensionError("TileEmbeddings: one feature row per tile required");
  for (std::size_t i = 0; i < tiles_.size(); ++i) {
    if (!index_.emplace(key(tiles_[i].row, tiles_[i].col), i).second) {
      throw DataError("TileEmbeddings: duplicate tile (" + std::to_string(tiles_[i].row) + ", " +
                      std::to_string(tiles_[i].col) + ")");
    }
  }
}

std::uint64_t TileEmbeddings::key(std::int32_t row, std::int32_t col) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(row)) << 32) | static_cast<std::uint32_t>(col);
}

bool TileEmbeddings::contains(std::int32_t row, std::int32_t col) const { return index_.count(key(row, col)) > 0; }

std::span<const float> TileEmbeddings::lookup(std::int32_t row, std::int32_t col) const {
  auto it = index_.find(key(row, col));
  if (it == index_.end()) {
    throw DataError("no embedding for tile (" + std::to_string(row) + ", " + std::to_string(col) + ")");
  }
  return features_.row_span(it->second);
}

TileEmbeddings read_tile_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw FormatError(path + ": empty embedding table", 0);
  ++lineno;
  std::vector<TileCoord> tiles;
  std::vector<float> values;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, '\t')) cells.push_back(cell);
    if (cells.size() < 3) throw FormatError(path + ": expected row, col and features", lineno);
    if (width == 0) width = cells.size() - 2;
    if (cells.size() - 2 != width) throw FormatError(path + ": ragged feature row", lineno);
    try {
      tiles.push_back({static_cast<std::int32_t>(std::stol(cells[0])), static_cast<std::int32_t>(std::stol(cells[1])), 1.0});
      for (std::size_t i = 2; i < cells.size(); ++i) values.push_back(std::stof(cells[i]));
    } catch (const std::logic_error&) {
      throw FormatError(path + ": unparsable number", lineno);
    }
  }
  if (tiles.empty()) throw FormatError(path + ": no tiles", lineno);
  const std::size_t n = tiles.size();
  return TileEmbeddings(std::move(tiles), Tensor<float>({n, width}, std::move(values)));
}

void write_tile_embeddings(const std::string& path, const TileEmbeddings& embeddings) {
  std::ostringstream out;
  out.precision(9);
  out << "row\tcol";
  for (std::size_t j = 0; j < embeddings.width(); ++j) out << "\tf" << j;
  out << "\n";
  for (const auto& t : embeddings.tiles()) {
    out << t.row << "\t" << t.col;
    for (float v : embeddings.lookup(t.row, t.col)) out << "\t" << v;
    out << "\n";
  }
  binio::write_file(path, out.str());
}

// ---------------------------------------------------------------- sampling

std::vector<Bag> sample_bags(const ClusterAssignment& assignment, std::span<const TileCoord> coords,
                             const TileEmbeddings& embeddings, std::size_t count, std::uint64_t seed,
                             const BagMeta& meta) {
  const auto members = assignment.members();
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (members[c].empty()) throw ContractError("sample_bags: cluster " + std::to_string(c) + " is empty");
    for (auto t : members[c]) embeddings.lookup(coords[t].row, coords[t].col);
  }
  const std::size_t k = assignment.sorted_order.size();
  const std::size_t d = embeddings.width();
  Rng rng(seed);
  std::vector<Bag> bags;
  bags.reserve(count);
  for (std::size_t b = 0; b < count; ++b) {
    Bag bag;
    bag.instances = Tensor<float>({k, d});
    for (std::size_t slot = 0; slot < k; ++slot) {
      const auto& pool = members[assignment.sorted_order[slot]];
      const std::size_t t = pool[uniform_index(rng, pool.size())];
      auto feat = embeddings.lookup(coords[t].row, coords[t].col);
      std::copy(feat.begin(), feat.end(), bag.instances.row_span(slot).begin());
    }
    bag.slide_id = meta.slide_id;
    bag.case_id = meta.case_id;
    bag.label = meta.label;
    bag.gene_target = meta.gene_target;
    bags.push_back(std::move(bag));
  }
  return bags;
}

}  // namespace tilegene
