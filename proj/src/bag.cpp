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

#include "tilegene/bag.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "tilegene/binio.hpp"

namespace tilegene {

std::string encode_bag(const Bag& bag) {
  std::string out;
  out.reserve(kBagHeaderBytes + 4 * (bag.instances.size() + bag.gene_target.size()) + 64);
  out.append(kBagMagic);
  binio::put(out, static_cast<std::uint32_t>(bag.k()));
  binio::put(out, static_cast<std::uint32_t>(bag.d()));
  binio::put(out, static_cast<std::uint32_t>(bag.gene_target.size()));
  binio::put(out, bag.label);
  for (float v : bag.instances.data()) binio::put(out, v);
  for (float v : bag.gene_target) binio::put(out, v);
  nlohmann::json trailer = {{"slide_id", bag.slide_id}, {"case_id", bag.case_id}};
  out += trailer.dump();
  return out;
}

Bag decode_bag(std::span<const std::uint8_t> bytes, std::string_view source) {
  const std::string what(source);
  binio::Reader r(bytes, what);
  if (bytes.size() < kBagMagic.size() ||
      std::string_view(reinterpret_cast<const char*>(bytes.data()), kBagMagic.size()) != kBagMagic) {
    throw FormatError(what + ": bad magic, expected \"" + std::string(kBagMagic) + "\"", 0);
  }
  r.take(kBagMagic.size());
  const auto k = r.read<std::uint32_t>();
  const auto d = r.read<std::uint32_t>();
  const auto g = r.read<std::uint32_t>();
  Bag bag;
  bag.label = r.read<std::uint32_t>();
  if (k == 0 || d == 0) throw FormatError(what + ": header declares an empty instance matrix", 5);
  const std::size_t n = std::size_t{k} * d;
  r.need(4 * (n + g));
  std::vector<float> inst(n);
  for (auto& v : inst) v = r.read<float>();
  bag.instances = Tensor<float>({k, d}, std::move(inst));
  bag.gene_target.resize(g);
  for (auto& v : bag.gene_target) v = r.read<float>();
  const std::size_t trailer_at = r.pos();
  auto rest = r.take(r.remaining());
  nlohmann::json trailer;
  try {
    trailer = nlohmann::json::parse(rest.begin(), rest.end());
    bag.slide_id = trailer.at("slide_id").get<std::string>();
    bag.case_id = trailer.at("case_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": malformed JSON trailer: " + e.what(), trailer_at);
  }
  return bag;
}

void write_bag(const std::string& path, const Bag& bag) { binio::write_file(path, encode_bag(bag)); }

Bag read_bag(const std::string& path) {
  auto bytes = binio::read_file(path);
  return decode_bag(bytes, path);
}

std::vector<std::string> validate_bag(const Bag& bag, const BagExpectation& expect) {
  std::vector<std::string> problems;
  if (bag.instances.rank() != 2 || bag.instances.empty()) {
    problems.push_back("instance matrix is empty");
    return problems;
  }
  if (expect.k && bag.k() != *expect.k)
    problems.push_back("k is " + std::to_string(bag.k()) + ", expected " + std::to_string(*expect.k));
  if (expect.d && bag.d() != *expect.d)
    problems.push_back("d is " + std::to_string(bag.d()) + ", expected " + std::to_string(*expect.d));
  if (expect.genes && bag.gene_target.size() != *expect.genes)
    problems.push_back("gene target length is " + std::to_string(bag.gene_target.size()) + ", expected " +
                       std::to_string(*expect.genes));
  if (expect.classes && bag.label >= *expect.classes)
    problems.push_back("label " + std::to_string(bag.label) + " out of range for " +
                       std::to_string(*expect.classes) + " classes");
  if (!bag.instances.all_finite()) problems.push_back("instance matrix has non-finite entries");
  for (float v : bag.gene_target) {
    if (!std::isfinite(v)) {
      problems.push_back("gene target has non-finite entries");
      break;
    }
  }
  if (bag.slide_id.empty()) problems.push_back("slide_id is empty");
  if (bag.case_id.empty()) problems.push_back("case_id is empty");
  return problems;
}

}  // namespace tilegene
