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

#include "polyseq/errors.hpp"
#include "polyseq/geometry.hpp"
#include "test_oracles.hpp"

namespace polyseq {
namespace {

Polygon poly(std::initializer_list<Point> pts) { return Polygon{std::vector<Point>(pts)}; }

TEST(Canonicalize, SquareReorderedToTopLeftStart) {
  const Polygon p = poly({{0.5, 0.5}, {0.1, 0.5}, {0.1, 0.1}, {0.5, 0.1}});
  EXPECT_EQ(canonicalize(p), poly({{0.1, 0.1}, {0.5, 0.1}, {0.5, 0.5}, {0.1, 0.5}}));
}

TEST(Canonicalize, CounterClockwiseInputIsReversed) {
  const Polygon ccw = poly({{0.1, 0.1}, {0.1, 0.5}, {0.5, 0.5}, {0.5, 0.1}});
  const Polygon c = canonicalize(ccw);
  EXPECT_GT(signed_area2(c.vertices), 0.0);
  EXPECT_EQ(c, poly({{0.1, 0.1}, {0.5, 0.1}, {0.5, 0.5}, {0.1, 0.5}}));
}

TEST(Canonicalize, CanonicalTriangleUnchanged) {
  const Polygon t = poly({{0.2, 0.1}, {0.8, 0.3}, {0.4, 0.9}});
  EXPECT_EQ(canonicalize(t), t);
}

TEST(Canonicalize, TieBreakPrefersSmallerY) {
  // (0.3,0.4) and (0.4,0.3) are equidistant from the origin.
  const Polygon p = poly({{0.3, 0.4}, {0.4, 0.3}, {0.9, 0.9}});
  EXPECT_EQ(canonicalize(p).vertices.front(), (Point{0.4, 0.3}));
}

TEST(Canonicalize, Errors) {
  EXPECT_THROW(canonicalize(poly({{0, 0}, {0.5, 0.5}, {1, 1}})), DegeneratePolygon);
  EXPECT_THROW(canonicalize(poly({{0, 0}, {0.5, 0.5}})), DegeneratePolygon);
  EXPECT_THROW(canonicalize(poly({{0, 0}, {1.5, 0.5}, {0, 1}})), OutOfRange);
  EXPECT_THROW(canonicalize(poly({{0, 0}, {std::nan(""), 0.5}, {0, 1}})), OutOfRange);
}

TEST(Canonicalize, IdempotentAndPreservesVertices) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Polygon p = testing_oracles::random_polygon(rng, 3 + static_cast<int>(rng() % 10));
    Polygon c;
    try {
      c = canonicalize(p);
    } catch (const DegeneratePolygon&) {
      continue;
    }
    EXPECT_EQ(canonicalize(c), c);
    auto a = p.vertices;
    auto b = c.vertices;
    auto lt = [](const Point& u, const Point& v) { return std::tie(u.x, u.y) < std::tie(v.x, v.y); };
    std::sort(a.begin(), a.end(), lt);
    std::sort(b.begin(), b.end(), lt);
    EXPECT_EQ(a, b);
  }
}

TEST(SortPolygons, OrdersByStartVertexDistance) {
  MultiPolygon mp{{poly({{0.6, 0.6}, {0.9, 0.6}, {0.9, 0.9}}), poly({{0.1, 0.1}, {0.3, 0.1}, {0.3, 0.3}})}};
  sort_polygons(mp);
  EXPECT_EQ(mp.polygons.front().vertices.front(), (Point{0.1, 0.1}));
}

TEST(InterpolateContour, SquareAtDensityTen) {
  const Polygon sq = poly({{0.1, 0.1}, {0.5, 0.1}, {0.5, 0.5}, {0.1, 0.5}});
  EXPECT_NEAR(perimeter(sq), 1.6, 1e-12);
  const Polygon dense = interpolate_contour(sq, 10.0);
  ASSERT_EQ(dense.vertices.size(), 16u);
  // Arc-length oracle: every 0.1 along the perimeter from the start vertex.
  for (int k = 0; k < 16; ++k) {
    const double s = 0.1 * k;
    Point expect;
    if (s < 0.4) {
      expect = {0.1 + s, 0.1};
    } else if (s < 0.8) {
      expect = {0.5, 0.1 + (s - 0.4)};
    } else if (s < 1.2) {
      expect = {0.5 - (s - 0.8), 0.5};
    } else {
      expect = {0.1, 0.5 - (s - 1.2)};
    }
    EXPECT_NEAR(dense.vertices[k].x, expect.x, 1e-12) << k;
    EXPECT_NEAR(dense.vertices[k].y, expect.y, 1e-12) << k;
  }
  for (const Point& c : sq.vertices) {
    EXPECT_NE(std::find(dense.vertices.begin(), dense.vertices.end(), c), dense.vertices.end());
  }
}

TEST(InterpolateContour, LowDensityKeepsOriginalVertices) {
  const Polygon t = poly({{0.2, 0.1}, {0.8, 0.3}, {0.4, 0.9}});
  EXPECT_EQ(interpolate_contour(t, 0.5), t);
}

TEST(InterpolateContour, PointsLieOnEdges) {
  const Polygon t = poly({{0.2, 0.1}, {0.8, 0.3}, {0.4, 0.9}});
  const Polygon dense = interpolate_contour(t, 100.0);
  EXPECT_GT(dense.vertices.size(), 100u);
  for (const Point& q : dense.vertices) {
    double best = 1.0;
    for (std::size_t i = 0; i < 3; ++i) {
      best = std::min(best, testing_oracles::segment_distance(q, t.vertices[i], t.vertices[(i + 1) % 3]));
    }
    EXPECT_LT(best, 1e-9);
  }
}

TEST(Downsample, FixedIntervalCountsAndIdentity) {
  const Polygon sq = poly({{0.1, 0.1}, {0.5, 0.1}, {0.5, 0.5}, {0.1, 0.5}});
  const Polygon dense = interpolate_contour(sq, 15.0);  // 6 steps per edge
  ASSERT_EQ(dense.vertices.size(), 24u);
  EXPECT_EQ(downsample(dense, 6).vertices.size(), 4u);
  EXPECT_EQ(downsample(dense, 6), sq);
  EXPECT_EQ(downsample(dense, 1), dense);
  EXPECT_THROW(downsample(dense, 12), DegeneratePolygon);
}

TEST(Downsample, AugmentIsDeterministicSubsetWithHighIoU) {
  const Polygon t = poly({{0.2, 0.1}, {0.8, 0.3}, {0.4, 0.9}});
  const double density = 96.0 / perimeter(t);
  const Polygon dense = interpolate_contour(t, density);
  const int max_interval = static_cast<int>(density * perimeter(t) / 12.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Polygon a = augment_downsample(dense, {1, max_interval}, seed);
    EXPECT_EQ(a, augment_downsample(dense, {1, max_interval}, seed));
    for (const Point& q : a.vertices) {
      EXPECT_NE(std::find(dense.vertices.begin(), dense.vertices.end(), q), dense.vertices.end());
    }
    const auto m = mask_metrics(rasterize(MultiPolygon{{a}}, 64, 64), rasterize(MultiPolygon{{t}}, 64, 64));
    EXPECT_GE(m.iou, 0.85);
  }
}

TEST(Rasterize, FullFrameAndLeftHalf) {
  const Mask full = rasterize(MultiPolygon{{poly({{0, 0}, {1, 0}, {1, 1}, {0, 1}})}}, 4, 4);
  EXPECT_EQ(full.count(), 16u);
  const Mask left = rasterize(MultiPolygon{{poly({{0, 0}, {0.5, 0}, {0.5, 1}, {0, 1}})}}, 8, 8);
  EXPECT_EQ(left.count(), 32u);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) EXPECT_EQ(left.at(r, c), c < 4 ? 1 : 0);
  }
}

TEST(Rasterize, CenterOnEdgeCountsAsInside) {
  // The right edge passes exactly through the centers of column 2.
  const Mask m = rasterize(MultiPolygon{{poly({{0, 0}, {0.625, 0}, {0.625, 1}, {0, 1}})}}, 4, 4);
  for (int r = 0; r < 4; ++r) {
    EXPECT_EQ(m.at(r, 2), 1);
    EXPECT_EQ(m.at(r, 3), 0);
  }
}

TEST(Rasterize, DisjointUnion) {
  const Polygon a = poly({{0.05, 0.05}, {0.4, 0.05}, {0.2, 0.4}});
  const Polygon b = poly({{0.6, 0.6}, {0.95, 0.7}, {0.7, 0.95}});
  const Mask u = rasterize(MultiPolygon{{a, b}}, 32, 32);
  const Mask ma = rasterize(MultiPolygon{{a}}, 32, 32);
  const Mask mb = rasterize(MultiPolygon{{b}}, 32, 32);
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 32; ++c) EXPECT_EQ(u.at(r, c), ma.at(r, c) | mb.at(r, c));
  }
}

TEST(Rasterize, MatchesBruteForceOracle) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const MultiPolygon mp = testing_oracles::random_multipolygon(rng);
    const int w = 1 + static_cast<int>(rng() % 64);
    const int h = 1 + static_cast<int>(rng() % 64);
    EXPECT_EQ(rasterize(mp, w, h), testing_oracles::brute_force_raster(mp, w, h));
  }
}

TEST(MaskMetrics, HandCounts) {
  Mask pred(8, 8);
  Mask gt(8, 8);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 6; ++c) {
      gt.set(r, c);
      if (c < 4) pred.set(r, c);
    }
  }
  const auto m = mask_metrics(pred, gt);
  EXPECT_NEAR(m.iou, 32.0 / 48.0, 1e-12);
  EXPECT_EQ(m.intersection, 32u);
  EXPECT_EQ(m.union_, 48u);
  EXPECT_DOUBLE_EQ(m.j, m.iou);

  const auto same = mask_metrics(gt, gt);
  EXPECT_EQ(same.iou, 1.0);
  EXPECT_EQ(same.f, 1.0);

  Mask other(8, 8);
  other.set(7, 7);
  Mask first(8, 8);
  first.set(0, 0);
  EXPECT_EQ(mask_metrics(first, other).iou, 0.0);
  EXPECT_EQ(mask_metrics(Mask(8, 8), Mask(8, 8)).iou, 1.0);
  EXPECT_THROW(mask_metrics(Mask(8, 8), Mask(4, 8)), DimensionMismatch);
}

TEST(MaskMetrics, BoundaryAndFMeasureByHand) {
  // 4x4 block inside 8x8: its boundary is the 12-pixel ring.
  Mask block(8, 8);
  for (int r = 2; r < 6; ++r) {
    for (int c = 2; c < 6; ++c) block.set(r, c);
  }
  EXPECT_EQ(boundary(block).count(), 12u);
  // Shifted by 3 columns: ring pixels within one pixel of the other ring.
  Mask shifted(8, 8);
  for (int r = 2; r < 6; ++r) {
    for (int c = 5; c < 8; ++c) shifted.set(r, c);
  }
  const Mask bs = boundary(shifted);
  const Mask bb = boundary(block);
  const double p = testing_oracles::tolerant_fraction(bs, bb);
  const double r = testing_oracles::tolerant_fraction(bb, bs);
  const auto m = mask_metrics(shifted, block);
  EXPECT_NEAR(m.f, 2 * p * r / (p + r), 1e-12);
  EXPECT_LT(m.f, 1.0);
}

TEST(MaskMetrics, Symmetric) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 30; ++i) {
    const Mask a = rasterize(testing_oracles::random_multipolygon(rng), 24, 24);
    const Mask b = rasterize(testing_oracles::random_multipolygon(rng), 24, 24);
    const auto ab = mask_metrics(a, b);
    const auto ba = mask_metrics(b, a);
    EXPECT_DOUBLE_EQ(ab.iou, ba.iou);
    EXPECT_DOUBLE_EQ(ab.f, ba.f);
  }
}

TEST(Aggregate, Arithmetic) {
  std::vector<SampleMetrics> s(2);
  s[0] = {1.0, 10, 10, 1.0, 1.0, 1.0};
  s[1] = {0.0, 0, 10, 0.0, 0.0, 0.0};
  const auto a = aggregate_metrics(s);
  EXPECT_DOUBLE_EQ(a.miou, 0.5);
  EXPECT_DOUBLE_EQ(a.oiou, 0.5);

  std::vector<SampleMetrics> b(3);
  b[0].box_iou = 0.51;
  b[1].box_iou = 0.5;
  b[2].box_iou = 0.49;
  EXPECT_NEAR(aggregate_metrics(b).prec_at_05, 1.0 / 3.0, 1e-15);

  std::vector<SampleMetrics> one{{0.3, 3, 10, 0.2, 0.3, 0.4}};
  EXPECT_DOUBLE_EQ(aggregate_metrics(one).miou, 0.3);
  EXPECT_DOUBLE_EQ(aggregate_metrics(one).oiou, 0.3);
  std::vector<SampleMetrics> copies(5, one[0]);
  EXPECT_NEAR(aggregate_metrics(copies).oiou, 0.3, 1e-15);
  EXPECT_THROW(aggregate_metrics(std::vector<SampleMetrics>{}), EmptyEvaluation);
}

TEST(Aggregate, PermutationInvariant) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SampleMetrics> s(20);
  for (auto& m : s) {
    m.union_ = 1 + std::floor(u(rng) * 100);
    m.intersection = std::floor(u(rng) * m.union_);
    m.iou = m.intersection / m.union_;
    m.box_iou = u(rng);
  }
  const auto a = aggregate_metrics(s);
  std::shuffle(s.begin(), s.end(), rng);
  const auto b = aggregate_metrics(s);
  EXPECT_NEAR(a.miou, b.miou, 1e-15);
  EXPECT_DOUBLE_EQ(a.oiou, b.oiou);
  EXPECT_DOUBLE_EQ(a.prec_at_05, b.prec_at_05);
}

TEST(BoxIou, Cases) {
  const Box a{0, 0, 0.5, 1};
  EXPECT_EQ(box_iou(a, a), 1.0);
  EXPECT_EQ(box_iou(a, Box{0.6, 0, 1, 1}), 0.0);
  EXPECT_NEAR(box_iou(a, Box{0.25, 0, 0.75, 1}), 0.25 / 0.75, 1e-12);
}

}  // namespace
}  // namespace polyseq
