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

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace polyseq {

// Normalized image coordinates: x grows right, y grows down, both in [0,1].
struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Polygon {
  std::vector<Point> vertices;
  friend bool operator==(const Polygon&, const Polygon&) = default;
};

struct MultiPolygon {
  std::vector<Polygon> polygons;
  friend bool operator==(const MultiPolygon&, const MultiPolygon&) = default;
};

struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
  friend bool operator==(const Box&, const Box&) = default;
};

// Row-major binary occupancy grid.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::uint8_t at(int row, int col) const { return bits_[static_cast<std::size_t>(row) * width_ + col]; }
  void set(int row, int col, std::uint8_t v = 1) { bits_[static_cast<std::size_t>(row) * width_ + col] = v ? 1 : 0; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::size_t count() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Twice the signed area, sum of x_i*y_{i+1} - x_{i+1}*y_i. Positive means
// clockwise when y points down.
double signed_area2(std::span<const Point> vertices);
double perimeter(const Polygon& p);
Box bounds(const MultiPolygon& mp);
bool is_valid_box(const Box& b);

// Reorders to clockwise with the start vertex nearest the origin
// (ties: smallest (y, x)). Throws DegeneratePolygon.
Polygon canonicalize(const Polygon& p);

// Canonicalizes every polygon and sorts them by start-vertex distance to the
// origin, ties by (y, x) of the start vertex.
MultiPolygon canonicalize(const MultiPolygon& mp);

// Sorts polygons by the start-vertex rule without touching vertex order.
void sort_polygons(MultiPolygon& mp);

// Subdivides each edge into floor(length * density) equal steps (at least one),
// so original vertices are kept and all new points lie on the edges.
Polygon interpolate_contour(const Polygon& p, double density);

// Keeps every interval-th vertex starting at index 0, then canonicalizes.
Polygon downsample(const Polygon& dense, int interval);

// Draws the interval uniformly from [interval_range.first, interval_range.second]
// using a generator seeded with rng_seed and applies downsample().
Polygon augment_downsample(const Polygon& dense, std::pair<int, int> interval_range,
                           std::uint64_t rng_seed);

// Pixel (row i, col j) is set iff its center ((j+0.5)/width, (i+0.5)/height)
// is inside some polygon under the even-odd rule; centers lying exactly on an
// edge count as inside.
Mask rasterize(const MultiPolygon& mp, int width, int height);

struct MaskMetrics {
  double iou = 0.0;
  double j = 0.0;
  double f = 0.0;
  std::size_t intersection = 0;
  std::size_t union_ = 0;
};

// IoU (0/0 := 1), region Jaccard and boundary F-measure with a one pixel
// tolerance. Throws DimensionMismatch.
MaskMetrics mask_metrics(const Mask& pred, const Mask& gt);

// Mask minus its 4-connected erosion; outside the grid counts as background.
Mask boundary(const Mask& m);

double box_iou(const Box& a, const Box& b);

struct SampleMetrics {
  double iou = 0.0;
  double intersection = 0.0;
  double union_ = 0.0;
  double box_iou = 0.0;
  double j = 0.0;
  double f = 0.0;
};

struct AggregateMetrics {
  double miou = 0.0;
  double oiou = 0.0;
  double prec_at_05 = 0.0;
  double mean_j = 0.0;
  double mean_f = 0.0;
  std::size_t count = 0;
};

// Throws EmptyEvaluation on an empty list.
AggregateMetrics aggregate_metrics(std::span<const SampleMetrics> per_sample);

}  // namespace polyseq
