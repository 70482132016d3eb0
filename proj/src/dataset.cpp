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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>

#include "polyseq/errors.hpp"
#include "polyseq/harness.hpp"

namespace polyseq {
namespace {

struct Rgb {
  std::uint8_t r, g, b;
};

const std::map<std::string, Rgb>& palette() {
  static const std::map<std::string, Rgb> kPalette{
      {"red", {220, 40, 40}},     {"green", {40, 180, 60}},   {"blue", {50, 80, 230}},
      {"yellow", {230, 210, 40}}, {"cyan", {40, 200, 210}},   {"magenta", {210, 50, 200}},
      {"white", {235, 235, 235}}, {"orange", {240, 140, 30}}, {"purple", {130, 60, 190}},
      {"gray", {128, 128, 128}}};
  return kPalette;
}

constexpr Rgb kBackground{20, 20, 20};
constexpr double kMargin = 0.03;
constexpr int kSceneAttempts = 2000;
constexpr int kPlacementAttempts = 200;

struct Shape {
  std::string cls;
  std::string color;
  Box extent;
  Polygon outline;  // canonical
};

bool overlaps(const Box& a, const Box& b, double margin) {
  return a.x1 < b.x2 + margin && b.x1 < a.x2 + margin && a.y1 < b.y2 + margin && b.y1 < a.y2 + margin;
}

Polygon make_outline(const std::string& cls, const Box& e, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double w = e.x2 - e.x1;
  const double h = e.y2 - e.y1;
  Polygon p;
  if (cls == "rectangle") {
    p.vertices = {{e.x1, e.y1}, {e.x2, e.y1}, {e.x2, e.y2}, {e.x1, e.y2}};
  } else if (cls == "triangle") {
    const double apex = e.x1 + w * unit(rng);
    if (unit(rng) < 0.5) {
      p.vertices = {{apex, e.y1}, {e.x2, e.y2}, {e.x1, e.y2}};
    } else {
      p.vertices = {{e.x1, e.y1}, {e.x2, e.y1}, {apex, e.y2}};
    }
  } else if (cls == "ellipse") {
    constexpr int kSides = 16;
    const double cx = 0.5 * (e.x1 + e.x2);
    const double cy = 0.5 * (e.y1 + e.y2);
    for (int k = 0; k < kSides; ++k) {
      const double a = 2.0 * std::numbers::pi * k / kSides;
      p.vertices.push_back({cx + 0.5 * w * std::cos(a), cy + 0.5 * h * std::sin(a)});
    }
  } else if (cls == "lshape") {
    const double tx = w * (0.35 + 0.25 * unit(rng));
    const double ty = h * (0.35 + 0.25 * unit(rng));
    // L occupying the left column and bottom row, then mirrored.
    std::vector<Point> v = {{0, 0}, {tx, 0}, {tx, h - ty}, {w, h - ty}, {w, h}, {0, h}};
    const int orient = static_cast<int>(unit(rng) * 4) % 4;
    for (Point& q : v) {
      if (orient & 1) q.x = w - q.x;
      if (orient & 2) q.y = h - q.y;
      q.x += e.x1;
      q.y += e.y1;
    }
    p.vertices = std::move(v);
  } else {
    throw ConfigError("unknown shape class '" + cls + "'");
  }
  return canonicalize(p);
}

// Keeps the part of a convex polygon on one side of an axis-aligned line.
Polygon clip_half_plane(const Polygon& poly, bool vertical, double at, bool keep_less) {
  auto coord = [&](const Point& p) { return vertical ? p.x : p.y; };
  auto inside = [&](const Point& p) { return keep_less ? coord(p) <= at : coord(p) >= at; };
  Polygon out;
  const auto& v = poly.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point& a = v[i];
    const Point& b = v[(i + 1) % v.size()];
    if (inside(a)) out.vertices.push_back(a);
    if (inside(a) != inside(b)) {
      const double t = (at - coord(a)) / (coord(b) - coord(a));
      Point q{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
      if (vertical) q.x = at; else q.y = at;
      out.vertices.push_back(q);
    }
  }
  return out;
}

void paint(RgbImage& img, const MultiPolygon& mp, const Rgb& c) {
  const Mask m = rasterize(mp, img.width, img.height);
  for (int r = 0; r < img.height; ++r) {
    for (int col = 0; col < img.width; ++col) {
      if (!m.at(r, col)) continue;
      std::uint8_t* px = img.at(r, col);
      px[0] = c.r;
      px[1] = c.g;
      px[2] = c.b;
    }
  }
}

std::optional<std::string> spatial_word(const std::vector<Shape>& shapes, std::size_t target) {
  auto center = [&](std::size_t i) {
    const Box& b = shapes[i].extent;
    return Point{0.5 * (b.x1 + b.x2), 0.5 * (b.y1 + b.y2)};
  };
  std::vector<std::size_t> rivals;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (i != target && shapes[i].cls == shapes[target].cls && shapes[i].color == shapes[target].color) {
      rivals.push_back(i);
    }
  }
  if (rivals.empty()) return std::string();
  constexpr double kGap = 0.1;
  const Point t = center(target);
  auto all = [&](auto pred) { return std::all_of(rivals.begin(), rivals.end(), [&](std::size_t i) { return pred(center(i)); }); };
  if (all([&](Point c) { return t.x + kGap < c.x; })) return std::string("left");
  if (all([&](Point c) { return t.x > c.x + kGap; })) return std::string("right");
  if (all([&](Point c) { return t.y + kGap < c.y; })) return std::string("top");
  if (all([&](Point c) { return t.y > c.y + kGap; })) return std::string("bottom");
  return std::nullopt;
}

void check_config(const DatasetConfig& c) {
  if (c.count < 1) throw ConfigError("dataset count must be >= 1");
  if (c.classes.size() < 2) throw ConfigError("at least two shape classes are required");
  if (c.colors.empty()) throw ConfigError("at least one color is required");
  if (c.min_shapes < 2 || c.max_shapes < c.min_shapes) throw ConfigError("need 2 <= min_shapes <= max_shapes");
  if (c.image_size < 8) throw ConfigError("image_size too small");
  if (!(c.min_size > 0.0) || c.max_size < c.min_size || c.max_size > 0.9) throw ConfigError("bad shape size range");
  for (const auto& cls : c.classes) {
    const auto& known = shape_class_names();
    if (std::find(known.begin(), known.end(), cls) == known.end()) throw ConfigError("unknown shape class '" + cls + "'");
  }
  for (const auto& col : c.colors) {
    if (!palette().contains(col)) throw ConfigError("unknown color '" + col + "'");
  }
}

struct Scene {
  std::vector<Shape> shapes;
  std::size_t target = 0;
  std::optional<std::size_t> bar;  // index of the occluding bar, drawn last
  MultiPolygon gt;
};

std::optional<Box> place(std::mt19937_64& rng, const DatasetConfig& c, const std::vector<Shape>& placed) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
    const double shrink = std::pow(0.97, attempt / 10);
    const double w = shrink * (c.min_size + (c.max_size - c.min_size) * unit(rng));
    const double h = shrink * (c.min_size + (c.max_size - c.min_size) * unit(rng));
    const double x1 = kMargin + (1.0 - 2 * kMargin - w) * unit(rng);
    const double y1 = kMargin + (1.0 - 2 * kMargin - h) * unit(rng);
    const Box b{x1, y1, x1 + w, y1 + h};
    if (std::none_of(placed.begin(), placed.end(), [&](const Shape& s) { return overlaps(b, s.extent, kMargin); })) {
      return b;
    }
  }
  return std::nullopt;
}

std::optional<Scene> try_scene(std::mt19937_64& rng, const DatasetConfig& c) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> count_dist(c.min_shapes, c.max_shapes);
  std::uniform_int_distribution<std::size_t> cls_dist(0, c.classes.size() - 1);
  std::uniform_int_distribution<std::size_t> col_dist(0, c.colors.size() - 1);

  Scene scene;
  const int count = count_dist(rng);
  const bool split = unit(rng) < c.split_prob;
  const int solid = split ? count - 1 : count;
  for (int i = 0; i < solid; ++i) {
    const auto extent = place(rng, c, scene.shapes);
    if (!extent) return std::nullopt;
    Shape s;
    s.cls = c.classes[cls_dist(rng)];
    s.color = c.colors[col_dist(rng)];
    s.extent = *extent;
    s.outline = make_outline(s.cls, s.extent, rng);
    scene.shapes.push_back(std::move(s));
  }
  scene.target = std::uniform_int_distribution<std::size_t>(0, scene.shapes.size() - 1)(rng);
  scene.gt.polygons = {scene.shapes[scene.target].outline};

  if (split) {
    Shape& ref = scene.shapes[scene.target];
    if (ref.cls == "lshape") return std::nullopt;
    const bool vertical = unit(rng) < 0.5;
    const double lo = vertical ? ref.extent.x1 : ref.extent.y1;
    const double span = vertical ? ref.extent.x2 - ref.extent.x1 : ref.extent.y2 - ref.extent.y1;
    const double thickness = 0.05 + 0.03 * unit(rng);
    const double start = lo + span * (0.35 + 0.2 * unit(rng)) - 0.5 * thickness;
    Box bar = vertical ? Box{start, std::max(0.0, ref.extent.y1 - 0.05), start + thickness,
                             std::min(1.0, ref.extent.y2 + 0.05)}
                       : Box{std::max(0.0, ref.extent.x1 - 0.05), start, std::min(1.0, ref.extent.x2 + 0.05),
                             start + thickness};
    for (std::size_t i = 0; i < scene.shapes.size(); ++i) {
      if (i != scene.target && overlaps(bar, scene.shapes[i].extent, 0.01)) return std::nullopt;
    }
    Polygon a = clip_half_plane(ref.outline, vertical, start, true);
    Polygon b = clip_half_plane(ref.outline, vertical, start + thickness, false);
    try {
      MultiPolygon pieces{{canonicalize(a), canonicalize(b)}};
      for (const Polygon& piece : pieces.polygons) {
        if (std::abs(signed_area2(piece.vertices)) < 2.0 * 0.004) return std::nullopt;
      }
      scene.gt = canonicalize(pieces);
    } catch (const DegeneratePolygon&) {
      return std::nullopt;
    }
    Shape s;
    s.cls = "rectangle";
    do {
      s.color = c.colors[col_dist(rng)];
    } while (s.color == ref.color && c.colors.size() > 1);
    if (s.color == ref.color) return std::nullopt;
    s.extent = bar;
    s.outline = make_outline("rectangle", bar, rng);
    scene.bar = scene.shapes.size();
    scene.shapes.push_back(std::move(s));
  } else {
    scene.gt = canonicalize(scene.gt);
  }
  return scene;
}

Sample render(const Scene& scene, const DatasetConfig& c, const std::string& id,
              const std::vector<std::string>& query) {
  Sample s;
  s.id = id;
  s.image = RgbImage(c.image_size, c.image_size);
  for (std::size_t i = 0; i < s.image.pixels.size(); i += 3) {
    s.image.pixels[i] = kBackground.r;
    s.image.pixels[i + 1] = kBackground.g;
    s.image.pixels[i + 2] = kBackground.b;
  }
  for (const Shape& sh : scene.shapes) paint(s.image, MultiPolygon{{sh.outline}}, palette().at(sh.color));
  s.query = query;
  s.gt_polygons = scene.gt;
  s.gt_box = bounds(scene.gt);
  return s;
}

std::optional<std::vector<std::string>> make_query(const Scene& scene) {
  const auto word = spatial_word(scene.shapes, scene.target);
  if (!word) return std::nullopt;
  const Shape& t = scene.shapes[scene.target];
  std::vector<std::string> q{"the", t.color, t.cls};
  if (!word->empty()) {
    q.push_back("on");
    q.push_back("the");
    q.push_back(*word);
  }
  return q;
}

std::string sample_id(const DatasetConfig& c, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return c.id_prefix + buf;
}

}  // namespace

const std::vector<std::string>& shape_class_names() {
  static const std::vector<std::string> kNames{"triangle", "rectangle", "ellipse", "lshape"};
  return kNames;
}

const std::vector<std::string>& color_names() {
  static const std::vector<std::string> kNames{"red", "green", "blue", "yellow", "cyan", "magenta", "white", "orange"};
  return kNames;
}

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> kWords = [] {
    std::vector<std::string> w{"<pad>", "<unk>", "the", "on", "at", "of", "in", "a", "object", "shape",
                               "left", "right", "top", "bottom", "middle", "center"};
    for (const auto& [name, rgb] : palette()) w.push_back(name);
    for (const auto& cls : shape_class_names()) w.push_back(cls);
    for (const char* extra : {"square", "circle", "box", "corner", "big", "small", "large", "thin"}) w.push_back(extra);
    return w;
  }();
  return kWords;
}

int word_id(const std::string& word) {
  const auto& v = vocabulary();
  const auto it = std::find(v.begin(), v.end(), word);
  return it == v.end() ? 1 : static_cast<int>(it - v.begin());
}

std::vector<int> encode_query(std::span<const std::string> words) {
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(word_id(w));
  return ids;
}

Mask ground_truth_mask(const Sample& s) { return rasterize(s.gt_polygons, s.image.width, s.image.height); }

std::vector<Sample> generate_dataset(const DatasetConfig& config) {
  check_config(config);
  std::mt19937_64 rng(config.seed);
  std::vector<Sample> out;
  out.reserve(config.count);
  for (int i = 0; i < config.count; ++i) {
    bool done = false;
    for (int attempt = 0; attempt < kSceneAttempts && !done; ++attempt) {
      const auto scene = try_scene(rng, config);
      if (!scene) continue;
      const auto query = make_query(*scene);
      if (!query) continue;
      out.push_back(render(*scene, config, sample_id(config, i), *query));
      done = true;
    }
    if (!done) throw ConfigError("could not generate a uniquely referable scene for sample " + std::to_string(i));
  }
  return out;
}

std::vector<Sample> generate_translating_clip(const DatasetConfig& config, int frames) {
  check_config(config);
  if (frames < 1) throw ConfigError("clip needs at least one frame");
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> cls_dist(0, config.classes.size() - 1);
  std::uniform_int_distribution<std::size_t> col_dist(0, config.colors.size() - 1);

  // Referent in one horizontal band, a static distractor in the other.
  const bool referent_top = unit(rng) < 0.5;
  const double size = 0.3 + 0.1 * unit(rng);
  const double ref_y1 = referent_top ? 0.05 : 0.95 - size;
  const double other_y1 = referent_top ? 0.95 - size : 0.05;
  const std::string ref_cls = config.classes[cls_dist(rng)];
  const std::string ref_color = config.colors[col_dist(rng)];
  const std::string other_color = config.colors[col_dist(rng)];
  std::string other_cls = config.classes[cls_dist(rng)];
  if (other_color == ref_color && other_cls == ref_cls) {
    const auto at = std::find(config.classes.begin(), config.classes.end(), ref_cls) - config.classes.begin();
    other_cls = config.classes[(static_cast<std::size_t>(at) + 1) % config.classes.size()];
  }
  const double other_x1 = 0.05 + (0.9 - size) * unit(rng);
  std::mt19937_64 outline_rng(config.seed ^ 0x5eedULL);
  const Polygon base = make_outline(ref_cls, Box{0.0, 0.0, size, size}, outline_rng);
  const Polygon other_outline = make_outline(other_cls, Box{other_x1, other_y1, other_x1 + size, other_y1 + size}, outline_rng);

  std::vector<Sample> clip;
  const double x_start = 0.05;
  const double x_end = 0.95 - size;
  for (int f = 0; f < frames; ++f) {
    const double t = frames == 1 ? 0.0 : static_cast<double>(f) / (frames - 1);
    const double dx = x_start + t * (x_end - x_start);
    Polygon moved = base;
    for (Point& v : moved.vertices) {
      v.x += dx;
      v.y += ref_y1;
    }
    Scene scene;
    scene.shapes.push_back({ref_cls, ref_color, bounds(MultiPolygon{{moved}}), canonicalize(moved)});
    scene.shapes.push_back({other_cls, other_color, bounds(MultiPolygon{{other_outline}}), other_outline});
    scene.target = 0;
    scene.gt = canonicalize(MultiPolygon{{moved}});
    std::vector<std::string> query{"the", ref_color, ref_cls};
    clip.push_back(render(scene, config, sample_id(config, f), query));
  }
  return clip;
}

}  // namespace polyseq
