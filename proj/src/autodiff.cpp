// Copyright 2026 The polyseq Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "polyseq/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "polyseq/errors.hpp"

namespace polyseq::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap cmap(std::span<const double> s, int rows, int cols) { return ConstMap(s.data(), rows, cols); }
MutMap mmap(std::span<double> s, int rows, int cols) { return MutMap(s.data(), rows, cols); }

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeMismatch(what);
}

}  // namespace

std::span<const double> Graph::value(Id id) const {
  const Node& n = nodes_[id];
  const std::size_t count = static_cast<std::size_t>(n.rows) * n.cols;
  if (n.external != nullptr) return {n.external, count};
  return n.storage;
}

std::span<double> Graph::grad(Id id) {
  Node& n = nodes_[id];
  if (n.param != nullptr) return n.param->grad;
  return n.grad_storage;
}

bool Graph::any_requires(std::initializer_list<Id> ids) const {
  return std::any_of(ids.begin(), ids.end(), [&](Id i) { return i >= 0 && nodes_[i].requires_grad; });
}

Graph::Id Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<Id>(nodes_.size() - 1);
}

Graph::Id Graph::constant(int rows, int cols, Buffer value) {
  require(value.size() == static_cast<std::size_t>(rows) * cols, "constant size mismatch");
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.storage = std::move(value);
  return push(std::move(n));
}

Graph::Id Graph::param(Parameter& p) {
  Node n;
  n.rows = p.rows;
  n.cols = p.cols;
  n.external = p.value.data();
  n.param = &p;
  n.requires_grad = true;
  return push(std::move(n));
}

Graph::Id Graph::custom(int rows, int cols, Buffer value, std::vector<Id> inputs,
                        std::function<void(Graph&, Id)> backward) {
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.storage = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(), [&](Id i) { return nodes_[i].requires_grad; });
  n.backward = std::move(backward);
  return push(std::move(n));
}

Graph::Id Graph::matmul(Id a, Id b) {
  require(cols(a) == rows(b), "matmul inner dimensions differ");
  const int r = rows(a);
  const int k = cols(a);
  const int c = cols(b);
  Buffer out(static_cast<std::size_t>(r) * c);
  mmap(out, r, c).noalias() = cmap(value(a), r, k) * cmap(value(b), k, c);
  return custom(r, c, std::move(out), {a, b}, [a, b, r, k, c](Graph& g, Id self) {
    const auto dy = cmap(g.grad(self), r, c);
    if (g.requires_grad(a)) mmap(g.grad(a), r, k).noalias() += dy * cmap(g.value(b), k, c).transpose();
    if (g.requires_grad(b)) mmap(g.grad(b), k, c).noalias() += cmap(g.value(a), r, k).transpose() * dy;
  });
}

Graph::Id Graph::linear(Id x, Id w, Id b) {
  require(cols(x) == rows(w), "linear input width != weight rows");
  require(rows(b) == 1 && cols(b) == cols(w), "linear bias shape");
  const int r = rows(x);
  const int k = cols(x);
  const int c = cols(w);
  Buffer out(static_cast<std::size_t>(r) * c);
  auto y = mmap(out, r, c);
  y.noalias() = cmap(value(x), r, k) * cmap(value(w), k, c);
  y.rowwise() += cmap(value(b), 1, c).row(0);
  return custom(r, c, std::move(out), {x, w, b}, [x, w, b, r, k, c](Graph& g, Id self) {
    const auto dy = cmap(g.grad(self), r, c);
    if (g.requires_grad(x)) mmap(g.grad(x), r, k).noalias() += dy * cmap(g.value(w), k, c).transpose();
    if (g.requires_grad(w)) mmap(g.grad(w), k, c).noalias() += cmap(g.value(x), r, k).transpose() * dy;
    if (g.requires_grad(b)) mmap(g.grad(b), 1, c) += dy.colwise().sum();
  });
}

Graph::Id Graph::add(Id a, Id b) {
  require(rows(a) == rows(b) && cols(a) == cols(b), "add shape mismatch");
  const auto va = value(a);
  const auto vb = value(b);
  Buffer out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  return custom(rows(a), cols(a), std::move(out), {a, b}, [a, b](Graph& g, Id self) {
    const auto dy = g.grad(self);
    for (Id in : {a, b}) {
      if (!g.requires_grad(in)) continue;
      auto dx = g.grad(in);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
    }
  });
}

Graph::Id Graph::add_rows(Id x, Id table, std::span<const int> rows_idx) {
  require(static_cast<int>(rows_idx.size()) == rows(x), "add_rows index count != rows");
  require(cols(table) == cols(x), "add_rows width mismatch");
  const int c = cols(x);
  std::vector<int> idx(rows_idx.begin(), rows_idx.end());
  for (int i : idx) require(i >= 0 && i < rows(table), "add_rows index out of range");
  const auto vx = value(x);
  const auto vt = value(table);
  Buffer out(vx.begin(), vx.end());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (int j = 0; j < c; ++j) out[i * c + j] += vt[static_cast<std::size_t>(idx[i]) * c + j];
  }
  return custom(rows(x), c, std::move(out), {x, table}, [x, table, idx, c](Graph& g, Id self) {
    const auto dy = g.grad(self);
    if (g.requires_grad(x)) {
      auto dx = g.grad(x);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
    }
    if (g.requires_grad(table)) {
      auto dt = g.grad(table);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        for (int j = 0; j < c; ++j) dt[static_cast<std::size_t>(idx[i]) * c + j] += dy[i * c + j];
      }
    }
  });
}

Graph::Id Graph::gather_rows(Id table, std::span<const int> rows_idx) {
  const int c = cols(table);
  std::vector<std::vector<std::pair<int, double>>> sets;
  sets.reserve(rows_idx.size());
  for (int i : rows_idx) {
    require(i >= 0 && i < rows(table), "gather index out of range");
    sets.push_back({{i, 1.0}});
  }
  (void)c;
  return weighted_rows(table, std::move(sets));
}

Graph::Id Graph::weighted_rows(Id table, std::vector<std::vector<std::pair<int, double>>> sets) {
  const int c = cols(table);
  const int r = static_cast<int>(sets.size());
  const auto vt = value(table);
  Buffer out(static_cast<std::size_t>(r) * c, 0.0);
  for (int i = 0; i < r; ++i) {
    for (const auto& [row, w] : sets[i]) {
      require(row >= 0 && row < rows(table), "weighted_rows index out of range");
      if (w == 0.0) continue;
      const double* src = vt.data() + static_cast<std::size_t>(row) * c;
      double* dst = out.data() + static_cast<std::size_t>(i) * c;
      for (int j = 0; j < c; ++j) dst[j] += w * src[j];
    }
  }
  return custom(r, c, std::move(out), {table}, [table, sets = std::move(sets), c](Graph& g, Id self) {
    if (!g.requires_grad(table)) return;
    const auto dy = g.grad(self);
    auto dt = g.grad(table);
    for (std::size_t i = 0; i < sets.size(); ++i) {
      for (const auto& [row, w] : sets[i]) {
        if (w == 0.0) continue;
        double* dst = dt.data() + static_cast<std::size_t>(row) * c;
        const double* src = dy.data() + i * c;
        for (int j = 0; j < c; ++j) dst[j] += w * src[j];
      }
    }
  });
}

Graph::Id Graph::concat_rows(Id a, Id b) {
  require(cols(a) == cols(b), "concat width mismatch");
  const auto va = value(a);
  const auto vb = value(b);
  Buffer out;
  out.reserve(va.size() + vb.size());
  out.insert(out.end(), va.begin(), va.end());
  out.insert(out.end(), vb.begin(), vb.end());
  const std::size_t split = va.size();
  return custom(rows(a) + rows(b), cols(a), std::move(out), {a, b}, [a, b, split](Graph& g, Id self) {
    const auto dy = g.grad(self);
    if (g.requires_grad(a)) {
      auto da = g.grad(a);
      for (std::size_t i = 0; i < split; ++i) da[i] += dy[i];
    }
    if (g.requires_grad(b)) {
      auto db = g.grad(b);
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += dy[split + i];
    }
  });
}

Graph::Id Graph::slice_rows(Id x, int begin, int count) {
  require(begin >= 0 && count >= 0 && begin + count <= rows(x), "slice out of range");
  const int c = cols(x);
  const auto vx = value(x);
  const std::size_t off = static_cast<std::size_t>(begin) * c;
  Buffer out(vx.begin() + off, vx.begin() + off + static_cast<std::size_t>(count) * c);
  return custom(count, c, std::move(out), {x}, [x, off](Graph& g, Id self) {
    if (!g.requires_grad(x)) return;
    const auto dy = g.grad(self);
    auto dx = g.grad(x);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[off + i] += dy[i];
  });
}

Graph::Id Graph::gelu(Id x) {
  const auto vx = value(x);
  Buffer out(vx.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * vx[i] * (1.0 + std::erf(vx[i] * std::numbers::sqrt2 / 2.0));
  }
  return custom(rows(x), cols(x), std::move(out), {x}, [x](Graph& g, Id self) {
    if (!g.requires_grad(x)) return;
    const auto vx = g.value(x);
    const auto dy = g.grad(self);
    auto dx = g.grad(x);
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      const double v = vx[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      dx[i] += dy[i] * (cdf + v * pdf);
    }
  });
}

Graph::Id Graph::relu(Id x) {
  const auto vx = value(x);
  Buffer out(vx.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = vx[i] > 0.0 ? vx[i] : 0.0;
  return custom(rows(x), cols(x), std::move(out), {x}, [x](Graph& g, Id self) {
    if (!g.requires_grad(x)) return;
    const auto vx = g.value(x);
    const auto dy = g.grad(self);
    auto dx = g.grad(x);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (vx[i] > 0.0) dx[i] += dy[i];
    }
  });
}

Graph::Id Graph::sigmoid(Id x) {
  const auto vx = value(x);
  Buffer out(vx.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-vx[i]));
  return custom(rows(x), cols(x), std::move(out), {x}, [x](Graph& g, Id self) {
    if (!g.requires_grad(x)) return;
    const auto y = g.value(self);
    const auto dy = g.grad(self);
    auto dx = g.grad(x);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
  });
}

Graph::Id Graph::layer_norm(Id x, Id gamma, Id beta, double eps) {
  const int r = rows(x);
  const int c = cols(x);
  require(rows(gamma) == 1 && cols(gamma) == c && rows(beta) == 1 && cols(beta) == c,
          "layer_norm affine shape");
  const auto vx = value(x);
  const auto vg = value(gamma);
  const auto vb = value(beta);
  Buffer out(vx.size());
  // aux: normalized inputs followed by per-row inverse std.
  Buffer aux(vx.size() + r);
  for (int i = 0; i < r; ++i) {
    const double* row = vx.data() + static_cast<std::size_t>(i) * c;
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += row[j];
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= c;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    aux[vx.size() + i] = inv_std;
    for (int j = 0; j < c; ++j) {
      const double xh = (row[j] - mean) * inv_std;
      aux[static_cast<std::size_t>(i) * c + j] = xh;
      out[static_cast<std::size_t>(i) * c + j] = xh * vg[j] + vb[j];
    }
  }
  const Id id = custom(r, c, std::move(out), {x, gamma, beta}, [x, gamma, beta, r, c](Graph& g, Id self) {
    const auto& aux = g.nodes_[self].aux;
    const auto dy = g.grad(self);
    const auto vg = g.value(gamma);
    const std::size_t n = static_cast<std::size_t>(r) * c;
    if (g.requires_grad(gamma) || g.requires_grad(beta)) {
      auto dg = g.grad(gamma);
      auto db = g.grad(beta);
      for (std::size_t i = 0; i < n; ++i) {
        const int j = static_cast<int>(i % c);
        if (g.requires_grad(gamma)) dg[j] += dy[i] * aux[i];
        if (g.requires_grad(beta)) db[j] += dy[i];
      }
    }
    if (!g.requires_grad(x)) return;
    auto dx = g.grad(x);
    for (int i = 0; i < r; ++i) {
      const std::size_t off = static_cast<std::size_t>(i) * c;
      double sum_dxh = 0.0;
      double sum_dxh_xh = 0.0;
      for (int j = 0; j < c; ++j) {
        const double dxh = dy[off + j] * vg[j];
        sum_dxh += dxh;
        sum_dxh_xh += dxh * aux[off + j];
      }
      const double inv_std = aux[n + i];
      for (int j = 0; j < c; ++j) {
        const double dxh = dy[off + j] * vg[j];
        dx[off + j] += inv_std / c * (c * dxh - sum_dxh - aux[off + j] * sum_dxh_xh);
      }
    }
  });
  nodes_[id].aux = std::move(aux);
  return id;
}

Graph::Id Graph::attention(Id q, Id k, Id v, const AttentionSpec& spec) {
  const int tq = rows(q);
  const int tk = rows(k);
  const int d = cols(q);
  require(cols(k) == d && cols(v) == d && rows(v) == tk, "attention q/k/v shapes");
  require(spec.heads >= 1 && d % spec.heads == 0, "attention heads must divide width");
  require(!spec.causal || tq == tk, "causal attention needs square logits");
  const int heads = spec.heads;
  const int dh = d / heads;
  const int buckets = 2 * spec.max_offset + 1;
  if (spec.rel_bias >= 0) {
    require(rows(spec.rel_bias) == heads && cols(spec.rel_bias) == buckets, "relative bias table shape");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  auto bucket = [&spec](int i, int j) { return std::clamp(j - i, -spec.max_offset, spec.max_offset) + spec.max_offset; };

  const auto Q = cmap(value(q), tq, d);
  const auto K = cmap(value(k), tk, d);
  const auto V = cmap(value(v), tk, d);
  Buffer out(static_cast<std::size_t>(tq) * d);
  Buffer probs(static_cast<std::size_t>(heads) * tq * tk);
  auto O = mmap(out, tq, d);
  for (int h = 0; h < heads; ++h) {
    auto P = mmap(std::span<double>(probs).subspan(static_cast<std::size_t>(h) * tq * tk), tq, tk);
    P.noalias() = Q.middleCols(h * dh, dh) * K.middleCols(h * dh, dh).transpose();
    P *= scale;
    if (spec.rel_bias >= 0) {
      const auto table = value(spec.rel_bias);
      for (int i = 0; i < tq; ++i) {
        for (int j = 0; j < tk; ++j) P(i, j) += table[static_cast<std::size_t>(h) * buckets + bucket(i, j)];
      }
    }
    for (int i = 0; i < tq; ++i) {
      const int last = spec.causal ? i : tk - 1;
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j <= last; ++j) mx = std::max(mx, P(i, j));
      double sum = 0.0;
      for (int j = 0; j <= last; ++j) {
        P(i, j) = std::exp(P(i, j) - mx);
        sum += P(i, j);
      }
      for (int j = 0; j <= last; ++j) P(i, j) /= sum;
      for (int j = last + 1; j < tk; ++j) P(i, j) = 0.0;
    }
    O.middleCols(h * dh, dh).noalias() = P * V.middleCols(h * dh, dh);
  }

  std::vector<Id> inputs{q, k, v};
  if (spec.rel_bias >= 0) inputs.push_back(spec.rel_bias);
  const Id id = custom(tq, d, std::move(out), inputs, [q, k, v, spec, tq, tk, d, heads, dh, buckets, scale](Graph& g, Id self) {
    const auto& probs = g.nodes_[self].aux;
    const auto dO = cmap(g.grad(self), tq, d);
    const auto Q = cmap(g.value(q), tq, d);
    const auto K = cmap(g.value(k), tk, d);
    const auto V = cmap(g.value(v), tk, d);
    RowMat dS(tq, tk);
    for (int h = 0; h < heads; ++h) {
      const auto P = cmap(std::span<const double>(probs).subspan(static_cast<std::size_t>(h) * tq * tk), tq, tk);
      const auto dOh = dO.middleCols(h * dh, dh);
      if (g.requires_grad(v)) mmap(g.grad(v), tk, d).middleCols(h * dh, dh).noalias() += P.transpose() * dOh;
      dS.noalias() = dOh * V.middleCols(h * dh, dh).transpose();
      for (int i = 0; i < tq; ++i) {
        const double dot = dS.row(i).dot(P.row(i));
        for (int j = 0; j < tk; ++j) dS(i, j) = P(i, j) * (dS(i, j) - dot);
      }
      if (spec.rel_bias >= 0 && g.requires_grad(spec.rel_bias)) {
        auto db = g.grad(spec.rel_bias);
        for (int i = 0; i < tq; ++i) {
          for (int j = 0; j < tk; ++j) {
            const int b = std::clamp(j - i, -spec.max_offset, spec.max_offset) + spec.max_offset;
            db[static_cast<std::size_t>(h) * buckets + b] += dS(i, j);
          }
        }
      }
      if (g.requires_grad(q)) {
        mmap(g.grad(q), tq, d).middleCols(h * dh, dh).noalias() += scale * (dS * K.middleCols(h * dh, dh));
      }
      if (g.requires_grad(k)) {
        mmap(g.grad(k), tk, d).middleCols(h * dh, dh).noalias() += scale * (dS.transpose() * Q.middleCols(h * dh, dh));
      }
    }
  });
  nodes_[id].aux = std::move(probs);
  return id;
}

void Graph::backward(Id root, double seed) {
  if (rows(root) != 1 || cols(root) != 1) throw ShapeMismatch("backward root must be 1x1");
  for (std::size_t i = 0; i <= static_cast<std::size_t>(root); ++i) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.param == nullptr) {
      n.grad_storage.assign(static_cast<std::size_t>(n.rows) * n.cols, 0.0);
    }
  }
  if (!nodes_[root].requires_grad) return;
  grad(root)[0] += seed;
  for (Id i = root; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.backward) n.backward(*this, i);
  }
}

}  // namespace polyseq::ad
