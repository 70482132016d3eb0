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

#include "polyseq/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "polyseq/errors.hpp"

namespace polyseq {
namespace {

constexpr double kRangeTolerance = 1e-9;
constexpr double kAreaEpsilon = 1e-14;

double dist2_origin(const Point& p) { return p.x * p.x + p.y * p.y; }

// Strict weak order for choosing a start vertex / ordering polygons.
bool start_less(const Point& a, const Point& b) {
  const double da = dist2_origin(a);
  const double db = dist2_origin(b);
  if (da != db) return da < db;
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

void check_coordinates(std::span<const Point> vertices) {
  for (const Point& v : vertices) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y) || v.x < -kRangeTolerance ||
        v.x > 1.0 + kRangeTolerance || v.y < -kRangeTolerance || v.y > 1.0 + kRangeTolerance) {
      throw OutOfRange("polygon vertex (" + std::to_string(v.x) + ", " + std::to_string(v.y) +
                       ") outside [0,1]");
    }
  }
}

std::size_t count_distinct(std::span<const Point> vertices) {
  std::vector<Point> sorted(vertices.begin(), vertices.end());
  std::sort(sorted.begin(), sorted.end(), [](const Point& a, const Point& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });
  return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

bool on_segment(const Point& a, const Point& b, double px, double py) {
  const double cross = (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
  if (cross != 0.0) return false;
  return px >= std::min(a.x, b.x) && px <= std::max(a.x, b.x) && py >= std::min(a.y, b.y) &&
         py <= std::max(a.y, b.y);
}

void fill_row(const Polygon& poly, int row, int width, int height, std::vector<double>& xs,
              std::span<std::uint8_t> out_row) {
  const auto& v = poly.vertices;
  const std::size_t n = v.size();
  if (n == 0) return;
  const double py = (row + 0.5) / height;

  xs.clear();
  for (std::size_t k = 0, prev = n - 1; k < n; prev = k++) {
    const Point& a = v[k];
    const Point& b = v[prev];
    if ((a.y > py) != (b.y > py)) xs.push_back((b.x - a.x) * (py - a.y) / (b.y - a.y) + a.x);
  }
  std::sort(xs.begin(), xs.end());
  // A center px is inside iff the number of crossings strictly right of it is odd.
  std::size_t passed = 0;
  for (int col = 0; col < width; ++col) {
    const double px = (col + 0.5) / width;
    while (passed < xs.size() && xs[passed] <= px) ++passed;
    if ((xs.size() - passed) % 2 == 1) out_row[col] = 1;
  }

  // Centers exactly on an edge.
  for (std::size_t k = 0, prev = n - 1; k < n; prev = k++) {
    const Point& a = v[k];
    const Point& b = v[prev];
    if (py < std::min(a.y, b.y) || py > std::max(a.y, b.y)) continue;
    int lo = 0;
    int hi = width - 1;
    const double dy = b.y - a.y;
    if (std::abs(dy) * height >= 1.0) {
      const double x_at = a.x + (py - a.y) * (b.x - a.x) / dy;
      const int c = static_cast<int>(std::floor(x_at * width - 0.5));
      lo = std::max(lo, c - 2);
      hi = std::min(hi, c + 2);
    } else {
      lo = std::max(lo, static_cast<int>(std::floor(std::min(a.x, b.x) * width - 0.5)) - 1);
      hi = std::min(hi, static_cast<int>(std::ceil(std::max(a.x, b.x) * width - 0.5)) + 1);
    }
    for (int col = lo; col <= hi; ++col) {
      if (out_row[col]) continue;
      if (on_segment(a, b, (col + 0.5) / width, py)) out_row[col] = 1;
    }
  }
}

}  // namespace

Mask::Mask(int width, int height) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw DimensionMismatch("negative mask dimensions");
  bits_.assign(static_cast<std::size_t>(width) * height, 0);
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

double signed_area2(std::span<const Point> v) {
  double s = 0.0;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = v[i];
    const Point& b = v[(i + 1) % n];
    s += a.x * b.y - b.x * a.y;
  }
  return s;
}

double perimeter(const Polygon& p) {
  double len = 0.0;
  const std::size_t n = p.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = p.vertices[i];
    const Point& b = p.vertices[(i + 1) % n];
    len += std::hypot(b.x - a.x, b.y - a.y);
  }
  return len;
}

Box bounds(const MultiPolygon& mp) {
  Box b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
        -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const Polygon& p : mp.polygons) {
    for (const Point& v : p.vertices) {
      b.x1 = std::min(b.x1, v.x);
      b.y1 = std::min(b.y1, v.y);
      b.x2 = std::max(b.x2, v.x);
      b.y2 = std::max(b.y2, v.y);
    }
  }
  return b;
}

bool is_valid_box(const Box& b) {
  auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  return in_unit(b.x1) && in_unit(b.y1) && in_unit(b.x2) && in_unit(b.y2) && b.x1 <= b.x2 &&
         b.y1 <= b.y2;
}

Polygon canonicalize(const Polygon& p) {
  check_coordinates(p.vertices);
  if (count_distinct(p.vertices) < 3) {
    throw DegeneratePolygon("polygon has fewer than 3 distinct vertices");
  }
  const double area2 = signed_area2(p.vertices);
  if (std::abs(area2) <= kAreaEpsilon) throw DegeneratePolygon("polygon has zero area");

  std::vector<Point> v = p.vertices;
  if (area2 < 0.0) std::reverse(v.begin(), v.end());
  const auto start = std::min_element(v.begin(), v.end(), start_less);
  std::rotate(v.begin(), start, v.end());
  return Polygon{std::move(v)};
}

void sort_polygons(MultiPolygon& mp) {
  std::stable_sort(mp.polygons.begin(), mp.polygons.end(), [](const Polygon& a, const Polygon& b) {
    return start_less(a.vertices.front(), b.vertices.front());
  });
}

MultiPolygon canonicalize(const MultiPolygon& mp) {
  if (mp.polygons.empty()) throw DegeneratePolygon("multipolygon has no polygons");
  MultiPolygon out;
  out.polygons.reserve(mp.polygons.size());
  for (const Polygon& p : mp.polygons) out.polygons.push_back(canonicalize(p));
  sort_polygons(out);
  return out;
}

Polygon interpolate_contour(const Polygon& p, double density) {
  if (!(density > 0.0) || !std::isfinite(density)) {
    throw OutOfRange("contour density must be positive");
  }
  const Polygon canon = canonicalize(p);
  const auto& v = canon.vertices;
  const std::size_t n = v.size();
  Polygon dense;
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = v[i];
    const Point& b = v[(i + 1) % n];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const int steps = std::max(1, static_cast<int>(std::floor(len * density + 1e-9)));
    dense.vertices.push_back(a);
    for (int k = 1; k < steps; ++k) {
      const double t = static_cast<double>(k) / steps;
      dense.vertices.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
  }
  return dense;
}

Polygon downsample(const Polygon& dense, int interval) {
  if (interval < 1) throw OutOfRange("downsampling interval must be >= 1");
  Polygon sparse;
  for (std::size_t i = 0; i < dense.vertices.size(); i += static_cast<std::size_t>(interval)) {
    sparse.vertices.push_back(dense.vertices[i]);
  }
  if (sparse.vertices.size() < 3) {
    throw DegeneratePolygon("downsampling left " + std::to_string(sparse.vertices.size()) +
                            " vertices");
  }
  return canonicalize(sparse);
}

Polygon augment_downsample(const Polygon& dense, std::pair<int, int> interval_range,
                           std::uint64_t rng_seed) {
  const auto [lo, hi] = interval_range;
  if (lo < 1 || hi < lo) throw OutOfRange("invalid downsampling interval range");
  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<int> pick(lo, hi);
  return downsample(dense, pick(rng));
}

Mask rasterize(const MultiPolygon& mp, int width, int height) {
  if (width < 1 || height < 1) throw DimensionMismatch("raster dimensions must be >= 1");
  Mask mask(width, height);
  std::vector<double> xs;
  std::vector<std::uint8_t> row_bits(static_cast<std::size_t>(width));
  for (int row = 0; row < height; ++row) {
    std::fill(row_bits.begin(), row_bits.end(), std::uint8_t{0});
    for (const Polygon& poly : mp.polygons) fill_row(poly, row, width, height, xs, row_bits);
    for (int col = 0; col < width; ++col) {
      if (row_bits[col]) mask.set(row, col);
    }
  }
  return mask;
}

Mask boundary(const Mask& m) {
  Mask out(m.width(), m.height());
  auto filled = [&](int r, int c) {
    return r >= 0 && c >= 0 && r < m.height() && c < m.width() && m.at(r, c);
  };
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      if (!m.at(r, c)) continue;
      const bool interior = filled(r - 1, c) && filled(r + 1, c) && filled(r, c - 1) && filled(r, c + 1);
      if (!interior) out.set(r, c);
    }
  }
  return out;
}

namespace {

// Fraction of `from` boundary pixels with a `to` boundary pixel within
// Chebyshev distance one.
double matched_fraction(const Mask& from, const Mask& to, std::size_t& total) {
  std::size_t hit = 0;
  total = 0;
  for (int r = 0; r < from.height(); ++r) {
    for (int c = 0; c < from.width(); ++c) {
      if (!from.at(r, c)) continue;
      ++total;
      bool found = false;
      for (int dr = -1; dr <= 1 && !found; ++dr) {
        for (int dc = -1; dc <= 1 && !found; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr >= 0 && cc >= 0 && rr < to.height() && cc < to.width() && to.at(rr, cc)) found = true;
        }
      }
      if (found) ++hit;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace

MaskMetrics mask_metrics(const Mask& pred, const Mask& gt) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw DimensionMismatch("mask sizes differ: " + std::to_string(pred.width()) + "x" +
                            std::to_string(pred.height()) + " vs " + std::to_string(gt.width()) +
                            "x" + std::to_string(gt.height()));
  }
  MaskMetrics m;
  const auto a = pred.bits();
  const auto b = gt.bits();
  for (std::size_t i = 0; i < a.size(); ++i) {
    m.intersection += (a[i] & b[i]);
    m.union_ += (a[i] | b[i]);
  }
  m.iou = m.union_ == 0 ? 1.0 : static_cast<double>(m.intersection) / static_cast<double>(m.union_);
  m.j = m.iou;

  const Mask bp = boundary(pred);
  const Mask bg = boundary(gt);
  std::size_t np = 0;
  std::size_t ng = 0;
  const double precision = matched_fraction(bp, bg, np);
  const double recall = matched_fraction(bg, bp, ng);
  if (np == 0 && ng == 0) {
    m.f = 1.0;
  } else if (np == 0 || ng == 0 || precision + recall == 0.0) {
    m.f = 0.0;
  } else {
    m.f = 2.0 * precision * recall / (precision + recall);
  }
  return m;
}

double box_iou(const Box& a, const Box& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  if (uni <= 0.0) return a == b ? 1.0 : 0.0;
  return inter / uni;
}

AggregateMetrics aggregate_metrics(std::span<const SampleMetrics> per_sample) {
  if (per_sample.empty()) throw EmptyEvaluation("no samples to aggregate");
  AggregateMetrics agg;
  agg.count = per_sample.size();
  double inter = 0.0;
  double uni = 0.0;
  std::size_t correct = 0;
  for (const SampleMetrics& s : per_sample) {
    agg.miou += s.iou;
    agg.mean_j += s.j;
    agg.mean_f += s.f;
    inter += s.intersection;
    uni += s.union_;
    if (s.box_iou > 0.5) ++correct;
  }
  const double n = static_cast<double>(per_sample.size());
  agg.miou /= n;
  agg.mean_j /= n;
  agg.mean_f /= n;
  agg.oiou = uni == 0.0 ? 1.0 : inter / uni;
  agg.prec_at_05 = static_cast<double>(correct) / n;
  return agg;
}

}  // namespace polyseq
