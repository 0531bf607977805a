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

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tilegene/rng.hpp"
#include "tilegene/tensor.hpp"

namespace tilegene {

// A learnable tensor and its accumulated gradient.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  Param(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
class Tape;

// Handle to a value recorded on a tape. Cheap to copy; only valid while the
// owning tape is alive and has not been cleared.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode recorder. Ops append nodes in execution order, which is a
// topological order, so backward() is a single reverse sweep.
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor<T>& out_grad)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var<T> constant(Tensor<T> value);
  // Leaf bound to a Param. The value is referenced, not copied; gradients
  // flow straight into `p.grad`.
  Var<T> param(Param<T>& p);

  // Used by op implementations. `backward` is dropped when no input needs a
  // gradient.
  Var<T> record(Tensor<T> value, std::span<const Var<T>> inputs, Backward backward);

  const Tensor<T>& value(std::size_t id) const;
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  void accumulate(std::size_t id, Tensor<T> g);

  void backward(const Var<T>& loss);

  std::size_t size() const { return nodes_.size(); }
  // Node ids whose backward ran during the last backward(), in visit order.
  const std::vector<std::size_t>& last_visits() const { return visits_; }
  void clear();

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Param<T>* param = nullptr;
    Tensor<T> grad;
    bool grad_live = false;
    bool needs_grad = false;
    Backward backward;
  };

  bool grad_enabled_;
  std::deque<Node> nodes_;
  std::vector<std::size_t> visits_;
};

namespace ops {

template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
// a * b^T
template <typename T> Var<T> matmul_nt(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> transpose(const Var<T>& a);

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
// a (r x c) + row (1 x c), broadcast over rows.
template <typename T> Var<T> add_row(const Var<T>& a, const Var<T>& row);
template <typename T> Var<T> scale(const Var<T>& a, T s);
// Sum of same-shape values.
template <typename T> Var<T> add_n(std::span<const Var<T>> xs);

template <typename T> Var<T> gelu(const Var<T>& a);
// Per-row standardization over the last dimension followed by gain/bias
// (both 1 x c).
template <typename T>
Var<T> layernorm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps = T(1e-5));
template <typename T> Var<T> softmax_rows(const Var<T>& a);
// Inverted dropout; identity when training is false or p == 0.
template <typename T> Var<T> dropout(const Var<T>& a, T p, Rng& rng, bool training);

template <typename T> Var<T> slice_rows(const Var<T>& a, std::size_t begin, std::size_t end);
template <typename T> Var<T> slice_cols(const Var<T>& a, std::size_t begin, std::size_t end);
template <typename T> Var<T> concat_rows(std::span<const Var<T>> xs);
template <typename T> Var<T> concat_cols(std::span<const Var<T>> xs);

template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);
// mean((a - b)^2) and mean(|a - b|), scalar results.
template <typename T> Var<T> mse(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mae(const Var<T>& a, const Var<T>& b);
// Softmax cross-entropy of a 1 x C logit row against a class index.
template <typename T> Var<T> cross_entropy(const Var<T>& logits, std::size_t label);

// For each column of `a` (r x c), sorts the entries in descending order and
// returns sum_j weights[j] * sorted[j] as a 1 x c row. Top-n means and the
// test-time aggregations are all instances of this.
template <typename T> Var<T> rank_weighted_sum(const Var<T>& a, std::span<const T> weights);

}  // namespace ops

// Numerical helpers shared with tests.
template <typename T> T gelu_value(T x);
template <typename T> Tensor<T> softmax_rows_value(const Tensor<T>& a);

}  // namespace tilegene
