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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "polyseq/coordbook.hpp"
#include "polyseq/errors.hpp"

namespace polyseq {
namespace {

constexpr int kBins = 64;
constexpr int kDim = 8;

// x such that x*(bins-1) == u exactly for the values used here.
double at_u(double u) { return u / (kBins - 1); }

TEST(Bilinear, GridPointIsExactEntry) {
  const Codebook2D cb = Codebook2D::random(kBins, kBins, kDim, 1);
  const auto e = cb.embed(at_u(2), at_u(3));
  const auto ref = cb.entry(3, 2);
  for (int c = 0; c < kDim; ++c) EXPECT_EQ(e[c], ref[c]);
  for (int iy = 0; iy < kBins; iy += 7) {
    for (int ix = 0; ix < kBins; ix += 5) {
      const auto g = cb.embed(static_cast<double>(ix) / (kBins - 1), static_cast<double>(iy) / (kBins - 1));
      for (int c = 0; c < kDim; ++c) EXPECT_EQ(g[c], cb.entry(iy, ix)[c]);
    }
  }
}

TEST(Bilinear, CellCenterIsMeanOfCorners) {
  const Codebook2D cb = Codebook2D::random(kBins, kBins, kDim, 2);
  const auto e = cb.embed(at_u(2.5), at_u(3.5));
  for (int c = 0; c < kDim; ++c) {
    const double mean = (cb.entry(3, 2)[c] + cb.entry(3, 3)[c] + cb.entry(4, 2)[c] + cb.entry(4, 3)[c]) / 4;
    EXPECT_NEAR(e[c], mean, 1e-15);
  }
}

TEST(Bilinear, HandExpandedWeights) {
  const auto s = bilinear_stencil(at_u(2.25), at_u(3.75), kBins, kBins);
  const std::array<int, 4> ix{2, 3, 2, 3};
  const std::array<int, 4> iy{3, 3, 4, 4};
  const std::array<double, 4> w{0.75 * 0.25, 0.25 * 0.25, 0.75 * 0.75, 0.25 * 0.75};
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(s.ix[k], ix[k]);
    EXPECT_EQ(s.iy[k], iy[k]);
    EXPECT_NEAR(s.weight[k], w[k], 1e-12);
  }
}

TEST(Bilinear, UpperEdgeAndRange) {
  const auto s = bilinear_stencil(1.0, 1.0, kBins, kBins);
  EXPECT_EQ(s.ix[0], kBins - 1);
  EXPECT_EQ(s.iy[0], kBins - 1);
  EXPECT_EQ(s.weight[0], 1.0);
  EXPECT_THROW(bilinear_stencil(1.01, 0.5, kBins, kBins), OutOfRange);
  EXPECT_THROW(bilinear_stencil(0.5, -0.01, kBins, kBins), OutOfRange);
}

TEST(Bilinear, WeightsConvexAndContinuous) {
  const Codebook2D cb = Codebook2D::random(kBins, kBins, kDim, 3);
  double lo = 1e9;
  double hi = -1e9;
  for (double v : cb.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double x = u(rng);
    const double y = u(rng);
    const auto s = bilinear_stencil(x, y, kBins, kBins);
    double sum = 0.0;
    for (double w : s.weight) {
      EXPECT_GE(w, 0.0);
      sum += w;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    const double eps = 1e-6;
    if (x + eps > 1.0) continue;
    const auto a = cb.embed(x, y);
    const auto b = cb.embed(x + eps, y);
    for (int c = 0; c < kDim; ++c) EXPECT_LE(std::abs(a[c] - b[c]), eps * (kBins - 1) * (hi - lo) + 1e-15);
  }
}

TEST(Bilinear, BackwardAtGridPointAndSums) {
  const Codebook2D cb = Codebook2D::random(kBins, kBins, kDim, 4);
  std::vector<double> up(kDim, 0.0);
  up[0] = 1.0;
  const auto g = cb.embed_backward(at_u(2), at_u(3), up);
  for (const auto& cell : g.cells) {
    const bool hit = cell.cell == BinIndex{2, 3};
    for (int c = 0; c < kDim; ++c) EXPECT_EQ(cell.grad[c], hit && c == 0 ? 1.0 : 0.0);
  }

  const std::vector<double> up2{0.3, -1.2, 0.5, 2.0, 0.0, 0.1, -0.4, 0.9};
  const auto g2 = cb.embed_backward(0.4137, 0.7219, up2);
  for (int c = 0; c < kDim; ++c) {
    double s = 0.0;
    for (const auto& cell : g2.cells) s += cell.grad[c];
    EXPECT_NEAR(s, up2[c], 1e-12);
  }
}

TEST(Bilinear, BackwardMatchesFiniteDifferences) {
  Codebook2D cb = Codebook2D::random(kBins, kBins, kDim, 5);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::normal_distribution<double> n(0.0, 1.0);
  auto objective = [&](double x, double y, const std::vector<double>& up) {
    const auto e = cb.embed(x, y);
    double s = 0.0;
    for (int c = 0; c < kDim; ++c) s += e[c] * up[c];
    return s;
  };
  const double h = 1e-5;
  for (int i = 0; i < 100; ++i) {
    const double x = u(rng);
    const double y = u(rng);
    std::vector<double> up(kDim);
    for (double& v : up) v = n(rng);
    const auto g = cb.embed_backward(x, y, up);
    const double fdx = (objective(x + h, y, up) - objective(x - h, y, up)) / (2 * h);
    const double fdy = (objective(x, y + h, up) - objective(x, y - h, up)) / (2 * h);
    EXPECT_LE(std::abs(fdx - g.dx), 1e-4 * std::max(1.0, std::abs(fdx)));
    EXPECT_LE(std::abs(fdy - g.dy), 1e-4 * std::max(1.0, std::abs(fdy)));
    for (const auto& cell : g.cells) {
      for (int c = 0; c < kDim; c += 3) {
        double& v = cb.entry(cell.cell.iy, cell.cell.ix)[c];
        const double keep = v;
        v = keep + h;
        const double fp = objective(x, y, up);
        v = keep - h;
        const double fm = objective(x, y, up);
        v = keep;
        EXPECT_NEAR((fp - fm) / (2 * h), cell.grad[c], 1e-6);
      }
    }
  }
}

TEST(Quantize, Examples) {
  EXPECT_EQ(quantize_axis(0.0, kBins), 0);
  EXPECT_EQ(dequantize_axis(0, kBins), 0.0);
  EXPECT_EQ(quantize_axis(1.0, kBins), 63);
  EXPECT_EQ(dequantize_axis(63, kBins), 1.0);
  EXPECT_EQ(quantize_axis(0.5, kBins), 32);
  EXPECT_NEAR(std::abs(0.5 - dequantize_axis(32, kBins)), 1.0 / 126.0, 1e-12);
  EXPECT_EQ(quantize(0.0, 1.0, kBins, kBins), (BinIndex{0, 63}));
}

TEST(Quantize, RoundTripBoundOnSweep) {
  double worst = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const double x = i / 10000.0;
    worst = std::max(worst, std::abs(x - dequantize_axis(quantize_axis(x, kBins), kBins)));
  }
  EXPECT_LE(worst, 1.0 / 126.0 + 1e-15);
}

}  // namespace
}  // namespace polyseq
