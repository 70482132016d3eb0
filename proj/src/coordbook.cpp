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

#include "polyseq/coordbook.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "polyseq/errors.hpp"

namespace polyseq {
namespace {

constexpr double kTolerance = 1e-9;

double clamp_unit(double v, const char* axis) {
  if (!std::isfinite(v) || v < -kTolerance || v > 1.0 + kTolerance) {
    throw OutOfRange(std::string("coordinate ") + axis + "=" + std::to_string(v) + " outside [0,1]");
  }
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace

BilinearStencil bilinear_stencil(double x, double y, int bins_w, int bins_h) {
  x = clamp_unit(x, "x");
  y = clamp_unit(y, "y");
  const double u = x * (bins_w - 1);
  const double v = y * (bins_h - 1);
  const int x0 = std::min(static_cast<int>(std::floor(u)), bins_w - 1);
  const int y0 = std::min(static_cast<int>(std::floor(v)), bins_h - 1);
  const int x1 = std::min(x0 + 1, bins_w - 1);
  const int y1 = std::min(y0 + 1, bins_h - 1);
  const double fx = u - x0;
  const double fy = v - y0;
  const double su = bins_w - 1;
  const double sv = bins_h - 1;

  BilinearStencil s;
  s.ix = {x0, x1, x0, x1};
  s.iy = {y0, y0, y1, y1};
  s.weight = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  // A clamped ceiling collapses onto the floor cell, so moving along that
  // axis no longer changes the embedding.
  const double gx = x1 == x0 ? 0.0 : su;
  const double gy = y1 == y0 ? 0.0 : sv;
  s.dweight_dx = {-(1 - fy) * gx, (1 - fy) * gx, -fy * gx, fy * gx};
  s.dweight_dy = {-(1 - fx) * gy, -fx * gy, (1 - fx) * gy, fx * gy};
  return s;
}

Codebook2D::Codebook2D(int bins_h, int bins_w, int dim)
    : bins_h_(bins_h), bins_w_(bins_w), dim_(dim) {
  if (bins_h < 2 || bins_w < 2) throw ShapeMismatch("codebook needs at least 2 bins per axis");
  if (dim < 1) throw ShapeMismatch("codebook embedding dimension must be positive");
  entries_.assign(static_cast<std::size_t>(bins_h) * bins_w * dim, 0.0);
}

Codebook2D Codebook2D::random(int bins_h, int bins_w, int dim, std::uint64_t seed) {
  Codebook2D cb(bins_h, bins_w, dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> init(-0.02, 0.02);
  for (double& e : cb.entries_) e = init(rng);
  return cb;
}

std::span<double> Codebook2D::entry(int iy, int ix) {
  return std::span<double>(entries_).subspan((static_cast<std::size_t>(iy) * bins_w_ + ix) * dim_, dim_);
}

std::span<const double> Codebook2D::entry(int iy, int ix) const {
  return std::span<const double>(entries_).subspan((static_cast<std::size_t>(iy) * bins_w_ + ix) * dim_,
                                                   dim_);
}

std::vector<double> Codebook2D::embed(double x, double y) const {
  const BilinearStencil s = bilinear_stencil(x, y, bins_w_, bins_h_);
  std::vector<double> out(dim_, 0.0);
  for (int k = 0; k < 4; ++k) {
    if (s.weight[k] == 0.0) continue;
    const auto e = entry(s.iy[k], s.ix[k]);
    for (int c = 0; c < dim_; ++c) out[c] += s.weight[k] * e[c];
  }
  return out;
}

Codebook2D::Backward Codebook2D::embed_backward(double x, double y,
                                                std::span<const double> upstream) const {
  if (static_cast<int>(upstream.size()) != dim_) throw ShapeMismatch("upstream size != codebook dim");
  const BilinearStencil s = bilinear_stencil(x, y, bins_w_, bins_h_);
  Backward out;
  for (int k = 0; k < 4; ++k) {
    const BinIndex cell{s.ix[k], s.iy[k]};
    auto it = std::find_if(out.cells.begin(), out.cells.end(),
                           [&](const CellGradient& g) { return g.cell == cell; });
    if (it == out.cells.end()) {
      out.cells.push_back({cell, std::vector<double>(dim_, 0.0)});
      it = out.cells.end() - 1;
    }
    const auto e = entry(s.iy[k], s.ix[k]);
    for (int c = 0; c < dim_; ++c) {
      it->grad[c] += s.weight[k] * upstream[c];
      out.dx += s.dweight_dx[k] * e[c] * upstream[c];
      out.dy += s.dweight_dy[k] * e[c] * upstream[c];
    }
  }
  return out;
}

int quantize_axis(double v, int bins) {
  v = clamp_unit(v, "axis");
  const int idx = static_cast<int>(std::floor(v * (bins - 1) + 0.5));
  return std::clamp(idx, 0, bins - 1);
}

double dequantize_axis(int index, int bins) {
  if (index < 0 || index >= bins) throw OutOfRange("bin index " + std::to_string(index));
  return static_cast<double>(index) / (bins - 1);
}

BinIndex quantize(double x, double y, int bins_w, int bins_h) {
  return BinIndex{quantize_axis(x, bins_w), quantize_axis(y, bins_h)};
}

std::array<double, 2> dequantize(const BinIndex& bin, int bins_w, int bins_h) {
  return {dequantize_axis(bin.ix, bins_w), dequantize_axis(bin.iy, bins_h)};
}

}  // namespace polyseq
