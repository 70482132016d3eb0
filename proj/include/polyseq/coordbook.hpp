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

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace polyseq {

struct BinIndex {
  int ix = 0;
  int iy = 0;
  friend bool operator==(const BinIndex&, const BinIndex&) = default;
};

// The four codebook cells surrounding a continuous coordinate, with their
// interpolation weights. Order: (x0,y0), (x1,y0), (x0,y1), (x1,y1).
struct BilinearStencil {
  std::array<int, 4> ix{};
  std::array<int, 4> iy{};
  std::array<double, 4> weight{};
  // Partial derivatives of each weight with respect to x and y.
  std::array<double, 4> dweight_dx{};
  std::array<double, 4> dweight_dy{};
};

// Maps x to u = x*(bins_w-1) and y to v = y*(bins_h-1). Throws OutOfRange when
// a coordinate lies outside [0,1] by more than 1e-9.
BilinearStencil bilinear_stencil(double x, double y, int bins_w, int bins_h);

// Learnable bins_h x bins_w grid of c_e-dimensional embeddings.
class Codebook2D {
 public:
  Codebook2D(int bins_h, int bins_w, int dim);
  // Entries drawn i.i.d. uniform in [-0.02, 0.02].
  static Codebook2D random(int bins_h, int bins_w, int dim, std::uint64_t seed);

  int bins_h() const noexcept { return bins_h_; }
  int bins_w() const noexcept { return bins_w_; }
  int dim() const noexcept { return dim_; }

  std::span<double> entry(int iy, int ix);
  std::span<const double> entry(int iy, int ix) const;
  std::span<double> data() noexcept { return entries_; }
  std::span<const double> data() const noexcept { return entries_; }

  std::vector<double> embed(double x, double y) const;

  struct CellGradient {
    BinIndex cell;
    std::vector<double> grad;
  };
  struct Backward {
    std::vector<CellGradient> cells;  // at most 4, distinct cells
    double dx = 0.0;
    double dy = 0.0;
  };
  // Gradients of <embed(x, y), upstream> w.r.t. touched entries and (x, y).
  Backward embed_backward(double x, double y, std::span<const double> upstream) const;

 private:
  int bins_h_;
  int bins_w_;
  int dim_;
  std::vector<double> entries_;  // [iy][ix][c]
};

// Nearest grid point on the (bins-1)-spaced grid, half rounds up.
BinIndex quantize(double x, double y, int bins_w, int bins_h);
int quantize_axis(double v, int bins);
double dequantize_axis(int index, int bins);
std::array<double, 2> dequantize(const BinIndex& bin, int bins_w, int bins_h);

}  // namespace polyseq
