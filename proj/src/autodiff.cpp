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

#include "tilegene/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace tilegene {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapC = Eigen::Map<const RowMat<T>>;
template <typename T>
using Map = Eigen::Map<RowMat<T>>;

template <typename T>
MapC<T> view(const Tensor<T>& t) {
  return MapC<T>(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
template <typename T>
Map<T> view(Tensor<T>& t) {
  return Map<T>(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

// C = op(A) * op(B) into a fresh tensor.
template <typename T>
Tensor<T> gemm(const Tensor<T>& a, bool ta, const Tensor<T>& b, bool tb) {
  const std::size_t m = ta ? a.cols() : a.rows();
  const std::size_t n = tb ? b.rows() : b.cols();
  Tensor<T> c({m, n});
  auto cv = view(c);
  if (!ta && !tb) cv.noalias() = view(a) * view(b);
  else if (!ta && tb) cv.noalias() = view(a) * view(b).transpose();
  else if (ta && !tb) cv.noalias() = view(a).transpose() * view(b);
  else cv.noalias() = view(a).transpose() * view(b).transpose();
  return c;
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

template <typename T>
Tensor<T> scalar_tensor(T v) {
  return Tensor<T>({1, 1}, std::vector<T>{v});
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// ---------------------------------------------------------------- Tape

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::param(Param<T>& p) {
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.needs_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::span<const Var<T>> inputs, Backward backward) {
  if (!value.all_finite()) throw NonFiniteError("non-finite value produced by a forward op");
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const auto& in : inputs) {
      if (&in.tape() != this) throw ContractError("op inputs recorded on a different tape");
      n.needs_grad = n.needs_grad || nodes_[in.id()].needs_grad;
    }
  }
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
const Tensor<T>& Tape<T>::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

template <typename T>
void Tape<T>::accumulate(std::size_t id, Tensor<T> g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.param) {
    n.param->grad += g;
    return;
  }
  if (!n.grad_live) {
    n.grad = std::move(g);
    n.grad_live = true;
  } else {
    n.grad += g;
  }
}

template <typename T>
void Tape<T>::backward(const Var<T>& loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss was not computed on this tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_string(loss.shape()));
  }
  visits_.clear();
  accumulate(loss.id(), Tensor<T>(loss.shape(), T(1)));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.grad_live || !n.backward) continue;
    visits_.push_back(i);
    n.backward(*this, n.grad);
    // Intermediate grads are not needed once propagated.
    n.grad = Tensor<T>();
    n.grad_live = false;
  }
}

template <typename T>
void Tape<T>::clear() {
  nodes_.clear();
  visits_.clear();
}

// ---------------------------------------------------------------- ops

namespace ops {

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions differ " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()));
  }
  const std::size_t ia = a.id(), ib = b.id();
  Var<T> in[] = {a, b};
  return a.tape().record(gemm(av, false, bv, false), in, [ia, ib](Tape<T>& t, const Tensor<T>& g) {
    if (t.needs_grad(ia)) t.accumulate(ia, gemm(g, false, t.value(ib), true));
    if (t.needs_grad(ib)) t.accumulate(ib, gemm(t.value(ia), true, g, false));
  });
}

template <typename T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw DimensionError("matmul_nt: inner dimensions differ " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()) + "^T");
  }
  const std::size_t ia = a.id(), ib = b.id();
  Var<T> in[] = {a, b};
  return a.tape().record(gemm(av, false, bv, true), in, [ia, ib](Tape<T>& t, const Tensor<T>& g) {
    // C = A B^T: dA = G B, dB = G^T A
    if (t.needs_grad(ia)) t.accumulate(ia, gemm(g, false, t.value(ib), false));
    if (t.needs_grad(ib)) t.accumulate(ib, gemm(g, true, t.value(ia), false));
  });
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  const std::size_t ia = a.id();
  Var<T> in[] = {a};
  return a.tape().record(tilegene::transpose(a.value()), in, [ia](Tape<T>& t, const Tensor<T>& g) {
    t.accumulate(ia, tilegene::transpose(g));
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor<T> out = a.value();
  out += b.value();
  const std::size_t ia = a.id(), ib = b.id();
  Var<T> in[] = {a, b};
  return a.tape().record(std::move(out), in, [ia, ib](Tape<T>& t, const Tensor<T>& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  Var<T> in[] = {a, b};
  return a.tape().record(std::move(out), in, [ia, ib](Tape<T>& t, const Tensor<T>& g) {
    t.accumulate(ia, g);
    if (t.needs_grad(ib)) {
      Tensor<T> ng = g;
      for (auto& v : ng.data()) v = -v;
      t.accumulate(ib, std::move(ng));
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  Var<T> in[] = {a, b};
  return a.tape().record(std::move(out), in, [ia, ib](Tape<T>& t, const Tensor<T>& g) {
    if (t.needs_grad(ia)) {
      Tensor<T> ga = g;
      const auto& bv = t.value(ib);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= bv[i];
      t.accumulate(ia, std::move(ga));
    }
    if (t.needs_grad(ib)) {
      Tensor<T> gb = g;
      const auto& av = t.value(ia);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= av[i];
      t.accumulate(ib, std::move(gb));
    }
  });
}

template <typename T>
Var<T> add_row(const Var<T>& a, const Var<T>& row) {
  const auto& av = a.value();
  const auto& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw DimensionError("add_row: cannot broadcast " + shape_string(rv.shape()) + " over " +
                         shape_string(av.shape()));
  }
  Tensor<T> out = av;
  view(out).rowwise() += view(rv).row(0);
  const std::size_t ia = a.id(), ir = row.id();
  Var<T> in[] = {a, row};
  return a.tape().record(std::move(out), in, [ia, ir](Tape<T>& t, const Tensor<T>& g) {
    t.accumulate(ia, g);
    if (t.needs_grad(ir)) {
      Tensor<T> gr({1, g.cols()});
      view(gr).row(0) = view(g).colwise().sum();
      t.accumulate(ir, std::move(gr));
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v *= s;
  const std::size_t ia = a.id();
  Var<T> in[] = {a};
  return a.tape().record(std::move(out), in, [ia, s](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T> ga = g;
    for (auto& v : ga.data()) v *= s;
    t.accumulate(ia, std::move(ga));
  });
}

template <typename T>
Var<T> add_n(std::span<const Var<T>> xs) {
  if (xs.empty()) throw ContractError("add_n: no inputs");
  Tensor<T> out = xs[0].value();
  for (std::size_t i = 1; i < xs.size(); ++i) {
    require_same_shape(out, xs[i].value(), "add_n");
    out += xs[i].value();
  }
  std::vector<std::size_t> ids;
  for (const auto& x : xs) ids.push_back(x.id());
  return xs[0].tape().record(std::move(out), xs, [ids](Tape<T>& t, const Tensor<T>& g) {
    for (auto id : ids) t.accumulate(id, g);
  });
}

template <typename T>
Var<T> gelu(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v = gelu_value(v);
  const std::size_t ia = a.id();
  Var<T> in[] = {a};
  return a.tape().record(std::move(out), in, [ia](Tape<T>& t, const Tensor<T>& g) {
    const auto& x = t.value(ia);
    Tensor<T> ga = g;
    const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
    const T inv_sqrt2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const T xi = x[i];
      const T cdf = T(0.5) * (T(1) + std::erf(xi * inv_sqrt2));
      const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * xi * xi);
      ga[i] *= cdf + xi * pdf;
    }
    t.accumulate(ia, std::move(ga));
  });
}

template <typename T>
Var<T> layernorm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps) {
  const auto& xv = x.value();
  const std::size_t rows = xv.rows(), n = xv.cols();
  if (n == 0) throw DimensionError("layernorm: zero-length feature dimension");
  if (gain.value().shape() != Shape{1, n} || bias.value().shape() != Shape{1, n}) {
    throw DimensionError("layernorm: gain/bias must be 1 x " + std::to_string(n));
  }
  if (!(eps >= T(0))) throw ConfigError("layernorm: eps must be non-negative");
  Tensor<T> xhat({rows, n});
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = xv.row_span(r);
    T mu = 0;
    for (T v : row) mu += v;
    mu /= T(n);
    T var = 0;
    for (T v : row) var += (v - mu) * (v - mu);
    var /= T(n);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) xhat(r, c) = (row[c] - mu) * inv_std[r];
  }
  Tensor<T> out({rows, n});
  const auto& gv = gain.value();
  const auto& bv = bias.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < n; ++c) out(r, c) = xhat(r, c) * gv[c] + bv[c];

  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  Var<T> in[] = {x, gain, bias};
  return x.tape().record(
      std::move(out), in,
      [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& t, const Tensor<T>& g) {
        const std::size_t rows = xhat.rows(), n = xhat.cols();
        if (t.needs_grad(ig) || t.needs_grad(ib)) {
          Tensor<T> gg({1, n}), gb({1, n});
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < n; ++c) {
              gg[c] += g(r, c) * xhat(r, c);
              gb[c] += g(r, c);
            }
          t.accumulate(ig, std::move(gg));
          t.accumulate(ib, std::move(gb));
        }
        if (t.needs_grad(ix)) {
          const auto& gv = t.value(ig);
          Tensor<T> gx({rows, n});
          std::vector<T> dxhat(n);
          for (std::size_t r = 0; r < rows; ++r) {
            T m1 = 0, m2 = 0;
            for (std::size_t c = 0; c < n; ++c) {
              dxhat[c] = g(r, c) * gv[c];
              m1 += dxhat[c];
              m2 += dxhat[c] * xhat(r, c);
            }
            m1 /= T(n);
            m2 /= T(n);
            for (std::size_t c = 0; c < n; ++c) gx(r, c) = inv_std[r] * (dxhat[c] - m1 - xhat(r, c) * m2);
          }
          t.accumulate(ix, std::move(gx));
        }
      });
}

template <typename T>
Var<T> softmax_rows(const Var<T>& a) {
  Tensor<T> out = softmax_rows_value(a.value());
  const std::size_t ia = a.id();
  Var<T> in[] = {a};
  return a.tape().record(out, in, [ia, y = out](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T> ga({y.rows(), y.cols()});
    for (std::size_t r = 0; r < y.rows(); ++r) {
      T dot = 0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) = y(r, c) * (g(r, c) - dot);
    }
    t.accumulate(ia, std::move(ga));
  });
}

template <typename T>
Var<T> dropout(const Var<T>& a, T p, Rng& rng, bool training) {
  if (!(p >= T(0) && p < T(1))) throw ConfigError("dropout: probability must lie in [0, 1)");
  if (!training || p == T(0)) return a;
  Tensor<T> mask(a.shape());
  const T keep_scale = T(1) / (T(1) - p);
  for (auto& m : mask.data()) m = uniform01(rng) < static_cast<double>(p) ? T(0) : keep_scale;
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  const std::size_t ia = a.id();
  Var<T> in[] = {a};
  return a.tape().record(std::move(out), in, [ia, mask = std::move(mask)](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T> ga = g;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= mask[i];
    t.accumulate(ia, std::move(ga));
  });
}

template <typename T>
Var<T> slice_rows(const Var<T>& a, std::size_t begin, std::size_t end) {
  const auto& av = a.value();
  if (begin > end || end > av.rows()) throw DimensionError("slice_rows: range out of bounds");
  const std::size_t cols = av.cols();
  std::vector<T> data(av.data().begin() + begin * cols, av.data().begin() + end * cols);
  const std::size_t ia = a.id(), rows = av.rows();
  Var<T> in[] = {a};
  return a.tape().record(Tensor<T>({end - begin, cols}, std::move(data)), in,
                         [ia, rows, cols, begin](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T> ga({rows, cols});
                           std::copy(g.data().begin(), g.data().end(), ga.data().begin() + begin * cols);
                           t.accumulate(ia, std::move(ga));
                         });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, std::size_t begin, std::size_t end) {
  const auto& av = a.value();
  if (begin > end || end > av.cols()) throw DimensionError("slice_cols: range out of bounds");
  const std::size_t rows = av.rows(), cols = av.cols(), w = end - begin;
  Tensor<T> out({rows, w});
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(av.data().begin() + r * cols + begin, w, out.data().begin() + r * w);
  const std::size_t ia = a.id();
  Var<T> in[] = {a};
  return a.tape().record(std::move(out), in, [ia, rows, cols, begin, w](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T> ga({rows, cols});
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(g.data().begin() + r * w, w, ga.data().begin() + r * cols + begin);
    t.accumulate(ia, std::move(ga));
  });
}

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> xs) {
  if (xs.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t cols = xs[0].value().cols();
  std::size_t rows = 0;
  std::vector<std::size_t> ids, counts;
  for (const auto& x : xs) {
    if (x.value().cols() != cols) throw DimensionError("concat_rows: column counts differ");
    rows += x.value().rows();
    ids.push_back(x.id());
    counts.push_back(x.value().rows());
  }
  std::vector<T> data;
  data.reserve(rows * cols);
  for (const auto& x : xs) data.insert(data.end(), x.value().data().begin(), x.value().data().end());
  return xs[0].tape().record(Tensor<T>({rows, cols}, std::move(data)), xs,
                             [ids, counts, cols](Tape<T>& t, const Tensor<T>& g) {
                               std::size_t off = 0;
                               for (std::size_t i = 0; i < ids.size(); ++i) {
                                 if (t.needs_grad(ids[i])) {
                                   std::vector<T> part(g.data().begin() + off * cols,
                                                       g.data().begin() + (off + counts[i]) * cols);
                                   t.accumulate(ids[i], Tensor<T>({counts[i], cols}, std::move(part)));
                                 }
                                 off += counts[i];
                               }
                             });
}

template <typename T>
Var<T> concat_cols(std::span<const Var<T>> xs) {
  if (xs.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t rows = xs[0].value().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids, widths;
  for (const auto& x : xs) {
    if (x.value().rows() != rows) throw DimensionError("concat_cols: row counts differ");
    cols += x.value().cols();
    ids.push_back(x.id());
    widths.push_back(x.value().cols());
  }
  Tensor<T> out({rows, cols});
  std::size_t off = 0;
  for (const auto& x : xs) {
    const auto& v = x.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.data().begin() + r * v.cols(), v.cols(), out.data().begin() + r * cols + off);
    off += v.cols();
  }
  return xs[0].tape().record(std::move(out), xs, [ids, widths, rows, cols](Tape<T>& t, const Tensor<T>& g) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (t.needs_grad(ids[i])) {
        Tensor<T> part({rows, widths[i]});
        for (std::size_t r = 0; r < rows; ++r)
          std::copy_n(g.data().begin() + r * cols + off, widths[i], part.data().begin() + r * widths[i]);
        t.accumulate(ids[i], std::move(part));
      }
      off += widths[i];
    }
  });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  const auto& av = a.value();
  T s = 0;
  for (T v : av.data()) s += v;
  const std::size_t ia = a.id();
  const Shape shape = av.shape();
  Var<T> in[] = {a};
  return a.tape().record(scalar_tensor(s), in, [ia, shape](Tape<T>& t, const Tensor<T>& g) {
    t.accumulate(ia, Tensor<T>(shape, g[0]));
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  if (a.value().empty()) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), T(1) / T(a.value().size()));
}

template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  auto d = sub(a, b);
  return mean(mul(d, d));
}

template <typename T>
Var<T> mae(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "mae");
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t n = av.size();
  if (n == 0) throw DimensionError("mae of empty tensors");
  T s = 0;
  Tensor<T> sign(av.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T d = av[i] - bv[i];
    s += std::abs(d);
    sign[i] = d > 0 ? T(1) : (d < 0 ? T(-1) : T(0));
  }
  const std::size_t ia = a.id(), ib = b.id();
  Var<T> in[] = {a, b};
  return a.tape().record(scalar_tensor(s / T(n)), in,
                         [ia, ib, n, sign = std::move(sign)](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T> ga = sign;
                           for (auto& v : ga.data()) v *= g[0] / T(n);
                           if (t.needs_grad(ib)) {
                             Tensor<T> gb = ga;
                             for (auto& v : gb.data()) v = -v;
                             t.accumulate(ib, std::move(gb));
                           }
                           t.accumulate(ia, std::move(ga));
                         });
}

template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::size_t label) {
  const auto& lv = logits.value();
  if (lv.rows() != 1) throw DimensionError("cross_entropy: expected a 1 x C logit row");
  if (label >= lv.cols()) {
    throw ContractError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                        std::to_string(lv.cols()) + " classes");
  }
  Tensor<T> p = softmax_rows_value(lv);
  const T mx = *std::max_element(lv.data().begin(), lv.data().end());
  T se = 0;
  for (T v : lv.data()) se += std::exp(v - mx);
  const T loss = mx + std::log(se) - lv[label];
  const std::size_t il = logits.id();
  Var<T> in[] = {logits};
  return logits.tape().record(scalar_tensor(loss), in, [il, label, p = std::move(p)](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T> gl = p;
    gl[label] -= T(1);
    for (auto& v : gl.data()) v *= g[0];
    t.accumulate(il, std::move(gl));
  });
}

template <typename T>
Var<T> rank_weighted_sum(const Var<T>& a, std::span<const T> weights) {
  const auto& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  if (weights.size() != rows) {
    throw DimensionError("rank_weighted_sum: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(rows) + " rows");
  }
  // order(j, c) = row index of the j-th largest entry of column c; ties keep
  // row order.
  std::vector<std::size_t> order(rows * cols);
  std::vector<std::size_t> idx(rows);
  Tensor<T> out({1, cols});
  for (std::size_t c = 0; c < cols; ++c) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return av(x, c) > av(y, c); });
    T s = 0;
    for (std::size_t j = 0; j < rows; ++j) {
      order[j * cols + c] = idx[j];
      s += weights[j] * av(idx[j], c);
    }
    out[c] = s;
  }
  const std::size_t ia = a.id();
  std::vector<T> w(weights.begin(), weights.end());
  Var<T> in[] = {a};
  return a.tape().record(std::move(out), in,
                         [ia, rows, cols, w = std::move(w), order = std::move(order)](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T> ga({rows, cols});
                           for (std::size_t j = 0; j < rows; ++j)
                             for (std::size_t c = 0; c < cols; ++c) ga(order[j * cols + c], c) += w[j] * g[c];
                           t.accumulate(ia, std::move(ga));
                         });
}

}  // namespace ops

template <typename T>
T gelu_value(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
Tensor<T> softmax_rows_value(const Tensor<T>& a) {
  Tensor<T> out({a.rows(), a.cols()});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = a.row_span(r);
    const T mx = *std::max_element(row.begin(), row.end());
    T s = 0;
    for (std::size_t c = 0; c < a.cols(); ++c) s += (out(r, c) = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) /= s;
  }
  return out;
}

#define TILEGENE_INSTANTIATE(T)                                                              \
  template class Tape<T>;                                                                    \
  template T gelu_value<T>(T);                                                               \
  template Tensor<T> softmax_rows_value<T>(const Tensor<T>&);                                \
  namespace ops {                                                                            \
  template Var<T> matmul<T>(const Var<T>&, const Var<T>&);                                   \
  template Var<T> matmul_nt<T>(const Var<T>&, const Var<T>&);                                \
  template Var<T> transpose<T>(const Var<T>&);                                               \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                      \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                      \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                      \
  template Var<T> add_row<T>(const Var<T>&, const Var<T>&);                                  \
  template Var<T> scale<T>(const Var<T>&, T);                                                \
  template Var<T> add_n<T>(std::span<const Var<T>>);                                         \
  template Var<T> gelu<T>(const Var<T>&);                                                    \
  template Var<T> layernorm<T>(const Var<T>&, const Var<T>&, const Var<T>&, T);              \
  template Var<T> softmax_rows<T>(const Var<T>&);                                            \
  template Var<T> dropout<T>(const Var<T>&, T, Rng&, bool);                                  \
  template Var<T> slice_rows<T>(const Var<T>&, std::size_t, std::size_t);                    \
  template Var<T> slice_cols<T>(const Var<T>&, std::size_t, std::size_t);                    \
  template Var<T> concat_rows<T>(std::span<const Var<T>>);                                   \
  template Var<T> concat_cols<T>(std::span<const Var<T>>);                                   \
  template Var<T> sum<T>(const Var<T>&);                                                     \
  template Var<T> mean<T>(const Var<T>&);                                                    \
  template Var<T> mse<T>(const Var<T>&, const Var<T>&);                                      \
  template Var<T> mae<T>(const Var<T>&, const Var<T>&);                                      \
  template Var<T> cross_entropy<T>(const Var<T>&, std::size_t);                              \
  template Var<T> rank_weighted_sum<T>(const Var<T>&, std::span<const T>);                   \
  }

TILEGENE_INSTANTIATE(float)
TILEGENE_INSTANTIATE(double)

}  // namespace tilegene
