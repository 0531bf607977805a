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

#include <cstring>
#include <nlohmann/json.hpp>

#include "support.hpp"
#include "tilegene/bag.hpp"

namespace tilegene {
namespace {

Bag make_bag(std::size_t k, std::size_t d, std::size_t g, std::uint64_t seed) {
  Rng rng(seed);
  Bag b;
  b.instances = testing::random_tensor<float>(k, d, rng);
  b.slide_id = "slide-7";
  b.case_id = "case-3";
  b.label = 2;
  for (std::size_t i = 0; i < g; ++i) b.gene_target.push_back(float(uniform01(rng)));
  return b;
}

std::span<const std::uint8_t> bytes_of(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

TEST(BagFormat, RoundTripIsBitIdentical) {
  testing::TempDir dir;
  auto b = make_bag(49, 1024, 10, 1);
  write_bag(dir / "a.trnb", b);
  auto back = read_bag(dir / "a.trnb");
  EXPECT_EQ(back, b);
  EXPECT_EQ(encode_bag(back), encode_bag(b));
}

TEST(BagFormat, LayoutIsLittleEndianHeaderThenPayload) {
  auto b = make_bag(2, 3, 1, 2);
  const auto bytes = encode_bag(b);
  EXPECT_EQ(bytes.substr(0, 5), "TRNB1");
  std::uint32_t header[4];
  std::memcpy(header, bytes.data() + 5, sizeof header);
  EXPECT_EQ(header[0], 2u);
  EXPECT_EQ(header[1], 3u);
  EXPECT_EQ(header[2], 1u);
  EXPECT_EQ(header[3], 2u);
  float first;
  std::memcpy(&first, bytes.data() + kBagHeaderBytes, 4);
  EXPECT_EQ(first, b.instances[0]);
  auto trailer = nlohmann::json::parse(bytes.substr(kBagHeaderBytes + 4 * 7));
  EXPECT_EQ(trailer["slide_id"], "slide-7");
  EXPECT_EQ(trailer["case_id"], "case-3");
}

TEST(BagFormat, BadMagicNamesExpected) {
  auto bytes = encode_bag(make_bag(3, 4, 0, 3));
  bytes[0] = 'X';
  try {
    decode_bag(bytes_of(bytes));
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("TRNB1"), std::string::npos);
    EXPECT_EQ(e.offset(), 0u);
  }
}

TEST(BagFormat, TruncatedPayloadRejected) {
  auto full = encode_bag(make_bag(49, 1024, 0, 4));
  const std::size_t payload = 49 * 1024 * 4;
  ASSERT_GE(full.size(), kBagHeaderBytes + payload);
  for (std::size_t keep : {kBagHeaderBytes, kBagHeaderBytes + payload - 1, std::size_t{12}}) {
    EXPECT_THROW(decode_bag(bytes_of(full.substr(0, keep))), FormatError) << keep;
  }
}

TEST(BagFormat, MalformedTrailerRejected) {
  auto bytes = encode_bag(make_bag(2, 2, 0, 5));
  bytes.resize(bytes.size() - 2);
  EXPECT_THROW(decode_bag(bytes_of(bytes)), FormatError);
}

TEST(BagFormat, EmptyHeaderRejected) {
  auto bytes = encode_bag(make_bag(2, 2, 0, 6));
  std::memset(bytes.data() + 5, 0, 4);
  EXPECT_THROW(decode_bag(bytes_of(bytes)), FormatError);
}

TEST(BagValidation, ReportsEveryProblem) {
  auto b = make_bag(49, 8, 3, 7);
  EXPECT_TRUE(validate_bag(b, {49, 8, 3, 3}).empty());
  EXPECT_EQ(validate_bag(b, {48, 9, 2, 2}).size(), 4u);
  b.instances[5] = std::numeric_limits<float>::quiet_NaN();
  b.slide_id.clear();
  EXPECT_EQ(validate_bag(b).size(), 2u);
}

TEST(BagValidation, RepeatedRowsAreValid) {
  Bag b;
  b.instances = Tensor<float>({49, 1024}, 0.125f);
  b.slide_id = "s";
  b.case_id = "c";
  EXPECT_TRUE(validate_bag(b, {49, 1024, 0, 3}).empty());
}

}  // namespace
}  // namespace tilegene
