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

#include "tilegene/binio.hpp"
#include "tilegene/tensor.hpp"

#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

namespace tilegene {

namespace binio {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed for " + path);
}

}  // namespace binio

template <typename T>
void dump_tensor(const std::filesystem::path& stem, const Tensor<T>& t) {
  std::string bytes;
  bytes.reserve(t.size() * sizeof(T));
  for (T v : t.data()) binio::put(bytes, v);
  auto bin = stem;
  bin += ".bin";
  binio::write_file(bin.string(), bytes);
  nlohmann::json meta = {{"dtype", sizeof(T) == 4 ? "float32" : "float64"},
                         {"shape", t.shape()},
                         {"byte_order", "little"},
                         {"data", bin.filename().string()}};
  auto side = stem;
  side += ".json";
  binio::write_file(side.string(), meta.dump(2) + "\n");
}

template <typename T>
Tensor<T> load_tensor_dump(const std::filesystem::path& stem) {
  auto side = stem;
  side += ".json";
  auto bin = stem;
  bin += ".bin";
  auto meta_bytes = binio::read_file(side.string());
  auto meta = nlohmann::json::parse(meta_bytes.begin(), meta_bytes.end());
  const std::string want = sizeof(T) == 4 ? "float32" : "float64";
  if (meta.at("dtype") != want) throw FormatError("tensor dump dtype is " + meta.at("dtype").get<std::string>(), 0);
  Shape shape = meta.at("shape").get<Shape>();
  auto bytes = binio::read_file(bin.string());
  binio::Reader r(bytes, bin.string());
  std::vector<T> data(shape_size(shape));
  for (auto& v : data) v = r.read<T>();
  return Tensor<T>(std::move(shape), std::move(data));
}

template void dump_tensor<float>(const std::filesystem::path&, const Tensor<float>&);
template void dump_tensor<double>(const std::filesystem::path&, const Tensor<double>&);
template Tensor<float> load_tensor_dump<float>(const std::filesystem::path&);
template Tensor<double> load_tensor_dump<double>(const std::filesystem::path&);

}  // namespace tilegene
