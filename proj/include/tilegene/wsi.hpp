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
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tilegene/bag.hpp"
#include "tilegene/rng.hpp"
#include "tilegene/tensor.hpp"

namespace tilegene {

inline constexpr std::size_t kTilePixels = 14;  // thumbnail pixels per tile edge at 1.25x
inline constexpr std::size_t kClusters = 49;

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB triplets

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, std::array<std::uint8_t, 3> fill = {255, 255, 255});
  std::array<std::uint8_t, 3> at(std::size_t x, std::size_t y) const;
  void set(std::size_t x, std::size_t y, std::array<std::uint8_t, 3> rgb);
};

// Binary PPM (P6, maxval 255).
RgbImage read_ppm(const std::string& path);
void write_ppm(const std::string& path, const RgbImage& image);

struct TissueMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> mask;  // 1 = tissue

  bool at(std::size_t x, std::size_t y) const { return mask[y * width + x] != 0; }
  std::size_t count() const;
};

// Saturation/value thresholds for tissue, plus a hue band that marks pen
// strokes (blue/green/cyan markers) as non-tissue. Angles in degrees.
struct TissueThresholds {
  double min_saturation = 0.08;
  double max_value = 0.98;
  double marker_min_saturation = 0.25;
  double marker_hue_low = 40.0;
  double marker_hue_high = 250.0;
  double min_value = 0.15;  // near-black ink
};

TissueMask tissue_mask(const RgbImage& thumbnail, const TissueThresholds& thresholds = {});

struct TileCoord {
  std::int32_t row = 0;
  std::int32_t col = 0;
  double tissue_fraction = 1.0;

  friend bool operator==(const TileCoord&, const TileCoord&) = default;
};

// Non-overlapping tile x tile windows with at least `min_fraction` tissue,
// in row-major order.
std::vector<TileCoord> select_tiles(const TissueMask& mask, std::size_t tile = kTilePixels,
                                    double min_fraction = 0.5);

using Point2 = std::array<double, 2>;  // (row, col)

// Which point the "magnitude" of a cluster center is measured from.
enum class CenterOrigin { kImageOrigin, kTissueCentroid };

struct ClusterAssignment {
  std::vector<Point2> centers;
  // Clustered points refer back to input tiles; in the degenerate case
  // (fewer tiles than clusters) some tiles appear more than once.
  std::vector<std::size_t> point_tile;
  std::vector<std::size_t> membership;  // per clustered point
  std::vector<std::size_t> sorted_order;
  std::vector<double> cost_history;     // objective after each assignment step
  std::size_t iterations = 0;
  bool converged = false;
  bool degenerate = false;

  std::vector<std::vector<std::size_t>> members() const;  // tile indices per cluster
};

struct KMeansOptions {
  std::size_t k = kClusters;
  std::size_t max_iterations = 300;
  CenterOrigin origin = CenterOrigin::kImageOrigin;
};

// Lloyd's algorithm with k-means++ seeding on tile (row, col) positions.
// Empty clusters are repaired by moving the farthest point of the largest
// cluster into them.
ClusterAssignment cluster_tiles(std::span<const TileCoord> coords, std::uint64_t seed,
                                const KMeansOptions& options = {});

double kmeans_cost(std::span<const Point2> points, std::span<const std::size_t> membership,
                   std::span<const Point2> centers);

// Ascending Euclidean norm measured from `origin`; ties broken by (row, col).
std::vector<std::size_t> sort_clusters(std::span<const Point2> centers, Point2 origin = {0.0, 0.0});

// Tile embeddings keyed by tile position.
class TileEmbeddings {
 public:
  TileEmbeddings() = default;
  TileEmbeddings(std::vector<TileCoord> tiles, Tensor<float> features);

  std::size_t size() const { return tiles_.size(); }
  std::size_t width() const { return features_.cols(); }
  const std::vector<TileCoord>& tiles() const { return tiles_; }
  bool contains(std::int32_t row, std::int32_t col) const;
  std::span<const float> lookup(std::int32_t row, std::int32_t col) const;

 private:
  static std::uint64_t key(std::int32_t row, std::int32_t col);
  std::vector<TileCoord> tiles_;
  Tensor<float> features_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

// Reads "row<TAB>col<TAB>f0...f(d-1)" lines with a header row.
TileEmbeddings read_tile_embeddings(const std::string& path);
void write_tile_embeddings(const std::string& path, const TileEmbeddings& embeddings);

struct BagMeta {
  std::string slide_id;
  std::string case_id;
  std::uint32_t label = 0;
  std::vector<float> gene_target;
};

// Each bag takes one uniformly drawn tile from every cluster, in sorted
// cluster order. Bags are drawn independently (bootstrap).
std::vector<Bag> sample_bags(const ClusterAssignment& assignment, std::span<const TileCoord> coords,
                             const TileEmbeddings& embeddings, std::size_t count, std::uint64_t seed,
                             const BagMeta& meta);

}  // namespace tilegene
