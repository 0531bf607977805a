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
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "tilegene/model.hpp"
#include "tilegene/trainer.hpp"

namespace tilegene {

inline constexpr std::string_view kCheckpointMagic = "TRNC";
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: magic, u32 version, u64 header length, JSON header, then float32
// little-endian payload (parameters in ModelParams::all() order, followed by
// the Adam first and second moments when present).
struct Checkpoint {
  Model<float> model;
  TrainConfig train;
  TrainState state;
  nlohmann::json meta = nlohmann::json::object();
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, std::string_view source = "checkpoint");

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tilegene
