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

#include "tilegene/checkpoint.hpp"

#include <cmath>
#include <limits>

#include "tilegene/binio.hpp"

namespace tilegene {

namespace {

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double null_as_inf(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

nlohmann::json tensor_entry(const std::string& name, const Tensor<float>& t, std::size_t& offset) {
  nlohmann::json e = {{"name", name}, {"shape", t.shape()}, {"offset", offset}};
  offset += t.size();
  return e;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const auto params = ckpt.model.params().all();
  const auto& adam = ckpt.state.adam;
  if (!adam.m.empty() && (adam.m.size() != params.size() || adam.v.size() != params.size())) {
    throw ContractError("encode_checkpoint: optimizer state does not match parameters");
  }

  std::size_t offset = 0;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto* p : params) tensors.push_back(tensor_entry(p->name, p->value, offset));
  nlohmann::json moments = nlohmann::json::array();
  for (std::size_t i = 0; i < adam.m.size(); ++i) {
    moments.push_back(tensor_entry(params[i]->name + "#m", adam.m[i], offset));
    moments.push_back(tensor_entry(params[i]->name + "#v", adam.v[i], offset));
  }

  const auto& s = ckpt.state;
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : s.log) {
    log.push_back({{"epoch", e.epoch},
                   {"train_loss", e.train_loss},
                   {"val_loss", e.val_loss},
                   {"val_accuracy", e.val_accuracy},
                   {"lr", e.lr}});
  }
  nlohmann::json header = {
      {"model", ckpt.model.config()},
      {"train", ckpt.train},
      {"tensors", tensors},
      {"moments", moments},
      {"state",
       {{"epoch", s.epoch},
        {"step", s.adam.step},
        {"lr", s.scheduler.lr},
        {"patience", s.scheduler.patience},
        {"factor", s.scheduler.factor},
        {"threshold", s.scheduler.threshold},
        {"scheduler_best", finite_or_null(s.scheduler.best)},
        {"bad_epochs", s.scheduler.bad_epochs},
        {"best_val", finite_or_null(s.best_val)},
        {"best_epoch", s.best_epoch},
        {"log", log}}},
      {"meta", ckpt.meta},
  };
  const std::string h = header.dump();

  std::string out;
  out.reserve(16 + h.size() + 4 * offset);
  out.append(kCheckpointMagic);
  binio::put(out, kCheckpointVersion);
  binio::put(out, static_cast<std::uint64_t>(h.size()));
  out += h;
  for (const auto* p : params)
    for (float v : p->value.data()) binio::put(out, v);
  for (std::size_t i = 0; i < adam.m.size(); ++i) {
    for (float v : adam.m[i].data()) binio::put(out, v);
    for (float v : adam.v[i].data()) binio::put(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, std::string_view source) {
  const std::string what(source);
  if (bytes.size() < kCheckpointMagic.size() ||
      std::string_view(reinterpret_cast<const char*>(bytes.data()), kCheckpointMagic.size()) != kCheckpointMagic) {
    throw FormatError(what + ": bad magic, expected \"" + std::string(kCheckpointMagic) + "\"", 0);
  }
  binio::Reader r(bytes, what);
  r.take(kCheckpointMagic.size());
  const auto version = r.read<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError(what + ": unsupported checkpoint version " + std::to_string(version), 4);
  }
  const auto hlen = r.read<std::uint64_t>();
  const std::size_t header_at = r.pos();
  auto hbytes = r.take(hlen);
  const std::size_t payload_at = r.pos();
  auto payload = r.take(r.remaining());

  Checkpoint ck;
  nlohmann::json header;
  std::vector<Tensor<float>> moments;
  try {
    header = nlohmann::json::parse(hbytes.begin(), hbytes.end());
    ck.model = Model<float>(header.at("model").get<ModelConfig>());
    ck.train = header.at("train").get<TrainConfig>();
    ck.meta = header.value("meta", nlohmann::json::object());
    const auto& st = header.at("state");
    auto& s = ck.state;
    st.at("epoch").get_to(s.epoch);
    st.at("step").get_to(s.adam.step);
    st.at("lr").get_to(s.scheduler.lr);
    st.at("patience").get_to(s.scheduler.patience);
    st.at("factor").get_to(s.scheduler.factor);
    st.at("threshold").get_to(s.scheduler.threshold);
    s.scheduler.best = null_as_inf(st.at("scheduler_best"));
    st.at("bad_epochs").get_to(s.scheduler.bad_epochs);
    s.best_val = null_as_inf(st.at("best_val"));
    st.at("best_epoch").get_to(s.best_epoch);
    for (const auto& e : st.at("log")) {
      EpochMetrics m;
      e.at("epoch").get_to(m.epoch);
      e.at("train_loss").get_to(m.train_loss);
      e.at("val_loss").get_to(m.val_loss);
      e.at("val_accuracy").get_to(m.val_accuracy);
      e.at("lr").get_to(m.lr);
      s.log.push_back(m);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": malformed header: " + e.what(), header_at);
  } catch (const ConfigError& e) {
    throw FormatError(what + ": invalid stored config: " + e.what(), header_at);
  }

  auto read_tensor = [&](const nlohmann::json& e, const Shape& expect, const std::string& name) {
    const auto shape = e.at("shape").get<Shape>();
    if (e.at("name").get<std::string>() != name || shape != expect) {
      throw FormatError(what + ": tensor " + e.at("name").get<std::string>() + " " + shape_string(shape) +
                            " does not match model parameter " + name + " " + shape_string(expect),
                        header_at);
    }
    const auto off = e.at("offset").get<std::size_t>();
    const std::size_t n = shape_size(shape);
    if ((off + n) * 4 > payload.size()) {
      throw FormatError(what + ": truncated payload for tensor " + name, payload_at + payload.size());
    }
    std::vector<float> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = binio::get<float>(payload, 4 * (off + i));
    return Tensor<float>(shape, std::move(data));
  };

  auto params = ck.model.parameters();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != params.size()) {
    throw FormatError(what + ": stores " + std::to_string(tensors.size()) + " tensors, model has " +
                          std::to_string(params.size()),
                      header_at);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i]->value = read_tensor(tensors[i], params[i]->value.shape(), params[i]->name);
  }
  const auto& mom = header.at("moments");
  if (!mom.empty()) {
    if (mom.size() != 2 * params.size()) throw FormatError(what + ": optimizer state does not match parameters", header_at);
    for (std::size_t i = 0; i < params.size(); ++i) {
      ck.state.adam.m.push_back(read_tensor(mom[2 * i], params[i]->value.shape(), params[i]->name + "#m"));
      ck.state.adam.v.push_back(read_tensor(mom[2 * i + 1], params[i]->value.shape(), params[i]->name + "#v"));
    }
  }
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  binio::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  auto bytes = binio::read_file(path);
  return decode_checkpoint(bytes, path);
}

}  // namespace tilegene
