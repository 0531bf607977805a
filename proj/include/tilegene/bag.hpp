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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tilegene/tensor.hpp"

namespace tilegene {

inline constexpr std::string_view kBagMagic = "TRNB1";
inline constexpr std::size_t kBagHeaderBytes = 5 + 4 * 4;

// The multiple-instance unit: k tile embeddings (one per spatial cluster,
// in sorted-cluster order) plus slide metadata and an optional slide-level
// gene target.
struct Bag {
  Tensor<float> instances;  // k x d
  std::string slide_id;
  std::string case_id;
  std::uint32_t label = 0;
  std::vector<float> gene_target;

  std::size_t k() const { return instances.rows(); }
  std::size_t d() const { return instances.cols(); }
  friend bool operator==(const Bag&, const Bag&) = default;
};

// TRNB1 layout: magic, u32 k, u32 d, u32 G, u32 label, k*d f32, G f32, then
// a JSON trailer {"slide_id", "case_id"}. All little-endian.
std::string encode_bag(const Bag& bag);
Bag decode_bag(std::span<const std::uint8_t> bytes, std::string_view source = "bag");

void write_bag(const std::string& path, const Bag& bag);
Bag read_bag(const std::string& path);

struct BagExpectation {
  std::optional<std::size_t> k;
  std::optional<std::size_t> d;
  std::optional<std::size_t> genes;
  std::optional<std::size_t> classes;
};

// Returns human-readable problems; empty means the bag is valid.
std::vector<std::string> validate_bag(const Bag& bag, const BagExpectation& expect = {});

}  // namespace tilegene
