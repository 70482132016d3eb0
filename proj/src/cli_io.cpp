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

#include "polyseq/cli_io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "polyseq/errors.hpp"

namespace polyseq {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad value for " + key + ": '" + text + "'");
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T, typename Access>
Field numeric(const char* key, Access access) {
  return Field{key, [access](const RunConfig& c) {
                 const T v = access(const_cast<RunConfig&>(c));
                 if constexpr (std::is_floating_point_v<T>) {
                   return format_double(v);
                 } else {
                   return std::to_string(v);
                 }
               },
               [key, access](RunConfig& c, const std::string& v) { access(c) = parse_number<T>(key, v); }};
}

#define POLYSEQ_INT(key, expr) numeric<int>(key, [](RunConfig& c) -> int& { return expr; })
#define POLYSEQ_LONG(key, expr) numeric<long>(key, [](RunConfig& c) -> long& { return expr; })
#define POLYSEQ_U64(key, expr) numeric<std::uint64_t>(key, [](RunConfig& c) -> std::uint64_t& { return expr; })
#define POLYSEQ_DBL(key, expr) numeric<double>(key, [](RunConfig& c) -> double& { return expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"image_size", [](const RunConfig& c) { return std::to_string(c.train.model.image_size); },
            [](RunConfig& c, const std::string& v) {
              c.train.model.image_size = parse_number<int>("image_size", v);
              c.data.image_size = c.train.model.image_size;
            }},
      POLYSEQ_INT("patch", c.train.model.patch),
      POLYSEQ_INT("patch_features", c.train.model.patch_features),
      POLYSEQ_INT("text_features", c.train.model.text_features),
      POLYSEQ_INT("vocab_size", c.train.model.vocab_size),
      POLYSEQ_INT("max_query_len", c.train.model.max_query_len),
      POLYSEQ_INT("width", c.train.model.width),
      POLYSEQ_INT("heads", c.train.model.heads),
      POLYSEQ_INT("ffn", c.train.model.ffn),
      POLYSEQ_INT("encoder_layers", c.train.model.encoder_layers),
      POLYSEQ_INT("decoder_layers", c.train.model.decoder_layers),
      POLYSEQ_INT("coord_dim", c.train.model.coord_dim),
      POLYSEQ_INT("bins_h", c.train.model.bins_h),
      POLYSEQ_INT("bins_w", c.train.model.bins_w),
      POLYSEQ_INT("max_positions", c.train.model.max_positions),
      POLYSEQ_INT("rel_max_offset", c.train.model.rel_max_offset),
      Field{"mode", [](const RunConfig& c) { return std::string(mode_name(c.train.model.mode)); },
            [](RunConfig& c, const std::string& v) { c.train.model.mode = parse_mode(v); }},
      POLYSEQ_DBL("lambda_box", c.train.loss.lambda_box),
      POLYSEQ_DBL("lambda_poly", c.train.loss.lambda_poly),
      POLYSEQ_DBL("lambda_cls", c.train.loss.lambda_cls),
      POLYSEQ_DBL("label_smoothing", c.train.loss.smoothing),
      POLYSEQ_DBL("lr", c.train.lr),
      POLYSEQ_DBL("weight_decay", c.train.weight_decay),
      POLYSEQ_INT("epochs", c.train.epochs),
      POLYSEQ_INT("batch", c.train.batch),
      POLYSEQ_LONG("warmup_steps", c.train.warmup_steps),
      POLYSEQ_U64("seed", c.train.seed),
      POLYSEQ_DBL("augment_prob", c.train.augment_prob),
      POLYSEQ_INT("interval_min", c.train.interval_min),
      POLYSEQ_INT("interval_max", c.train.interval_max),
      POLYSEQ_INT("dense_points", c.train.dense_points),
      POLYSEQ_INT("count", c.data.count),
      POLYSEQ_U64("data_seed", c.data.seed),
      POLYSEQ_INT("min_shapes", c.data.min_shapes),
      POLYSEQ_INT("max_shapes", c.data.max_shapes),
      Field{"classes", [](const RunConfig& c) { return join_list(c.data.classes); },
            [](RunConfig& c, const std::string& v) { c.data.classes = split_list(v); }},
      Field{"colors", [](const RunConfig& c) { return join_list(c.data.colors); },
            [](RunConfig& c, const std::string& v) { c.data.colors = split_list(v); }},
      POLYSEQ_DBL("min_size", c.data.min_size),
      POLYSEQ_DBL("max_size", c.data.max_size),
      POLYSEQ_DBL("split_prob", c.data.split_prob),
      POLYSEQ_INT("test_count", c.test_count),
      POLYSEQ_U64("test_seed", c.test_seed),
      POLYSEQ_INT("video_frames", c.video_frames),
      POLYSEQ_INT("threads", c.threads),
      POLYSEQ_INT("ablation_train_count", c.ablation_train_count),
      POLYSEQ_INT("ablation_test_count", c.ablation_test_count),
      POLYSEQ_INT("ablation_epochs", c.ablation_epochs),
      Field{"ablation_seeds",
            [](const RunConfig& c) {
              std::vector<std::string> s;
              for (auto v : c.ablation_seeds) s.push_back(std::to_string(v));
              return join_list(s);
            },
            [](RunConfig& c, const std::string& v) {
              c.ablation_seeds.clear();
              for (const auto& s : split_list(v)) c.ablation_seeds.push_back(parse_number<std::uint64_t>("ablation_seeds", s));
            }},
  };
  return table;
}

#undef POLYSEQ_INT
#undef POLYSEQ_LONG
#undef POLYSEQ_U64
#undef POLYSEQ_DBL

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void RunConfig::validate() const {
  train.model.validate();
  require(data.image_size == train.model.image_size, "data and model image sizes differ");
  require(train.loss.lambda_box >= 0 && train.loss.lambda_poly >= 0 && train.loss.lambda_cls >= 0,
          "loss weights must be >= 0");
  require(train.loss.smoothing >= 0 && train.loss.smoothing < 1, "label_smoothing must be in [0,1)");
  require(train.lr > 0, "lr must be > 0");
  require(train.weight_decay >= 0, "weight_decay must be >= 0");
  require(train.epochs >= 0 && train.batch >= 1, "epochs must be >= 0 and batch >= 1");
  require(train.warmup_steps >= 0, "warmup_steps must be >= 0");
  require(train.augment_prob >= 0 && train.augment_prob <= 1, "augment_prob must be in [0,1]");
  require(train.interval_min >= 1 && train.interval_max >= train.interval_min, "bad interval range");
  require(train.dense_points >= 3, "dense_points must be >= 3");
  require(data.count >= 1 && test_count >= 1, "count and test_count must be >= 1");
  require(data.min_shapes >= 1 && data.max_shapes >= data.min_shapes, "bad shape count range");
  require(data.classes.size() >= 2, "at least two shape classes are required");
  require(!data.colors.empty(), "at least one color is required");
  require(data.min_size > 0 && data.max_size >= data.min_size && data.max_size < 1, "bad size range");
  require(data.split_prob >= 0 && data.split_prob <= 1, "split_prob must be in [0,1]");
  require(video_frames >= 1, "video_frames must be >= 1");
  require(ablation_train_count >= 1 && ablation_test_count >= 1 && ablation_epochs >= 0, "bad ablation sizes");
  require(!ablation_seeds.empty(), "ablation_seeds is empty");
}

AblationConfig RunConfig::ablation() const {
  AblationConfig a;
  a.train = train;
  a.train.epochs = ablation_epochs;
  a.data = data;
  a.train_count = ablation_train_count;
  a.test_count = ablation_test_count;
  a.seeds = ablation_seeds;
  return a;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ParseError(line_no, "duplicate key '" + key + "'");
    try {
      set_config_value(config, key, value);
    } catch (const ConfigError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return config;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path)); }

std::string run_config_text(const RunConfig& config) {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.key) + "=" + f.get(config) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Files

std::string read_file(const std::string& path) {
  if (fs::is_directory(path)) throw IoError(path + " is a directory");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path);
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + target.parent_path().string());
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot rename " + tmp + " to " + path);
}

// ---------------------------------------------------------------------------
// Annotations

AnnotationRecord parse_annotation(const std::string& line, std::size_t line_number) {
  static const std::set<std::string> allowed = {"id", "image", "width", "height", "query", "bbox", "polygons"};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line_number, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line_number, "record is not an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw ParseError(line_number, "unknown field '" + key + "'");
  }
  auto field = [&](const char* name) -> const nlohmann::json& {
    if (!j.contains(name)) throw ParseError(line_number, std::string("missing field '") + name + "'");
    return j.at(name);
  };
  auto string_field = [&](const char* name) {
    const auto& v = field(name);
    if (!v.is_string()) throw ParseError(line_number, std::string("field '") + name + "' must be a string");
    return v.get<std::string>();
  };
  auto size_field = [&](const char* name) {
    const auto& v = field(name);
    if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > 1 << 16) {
      throw ParseError(line_number, std::string("field '") + name + "' must be a positive integer");
    }
    return v.get<int>();
  };
  auto coordinate = [&](const nlohmann::json& v, const std::string& where) {
    if (!v.is_number()) throw ParseError(line_number, "field '" + where + "' must be a number");
    const double d = v.get<double>();
    if (!(d >= 0.0 && d <= 1.0)) throw ParseError(line_number, "field '" + where + "' outside [0,1]");
    return d;
  };

  AnnotationRecord r;
  r.id = string_field("id");
  if (r.id.empty()) throw ParseError(line_number, "field 'id' is empty");
  r.image = string_field("image");
  r.width = size_field("width");
  r.height = size_field("height");
  r.query = string_field("query");

  const auto& bbox = field("bbox");
  if (!bbox.is_array() || bbox.size() != 4) throw ParseError(line_number, "field 'bbox' must hold 4 numbers");
  r.bbox = Box{coordinate(bbox[0], "bbox[0]"), coordinate(bbox[1], "bbox[1]"), coordinate(bbox[2], "bbox[2]"),
               coordinate(bbox[3], "bbox[3]")};
  if (!is_valid_box(r.bbox)) throw ParseError(line_number, "field 'bbox' must satisfy x1<=x2 and y1<=y2");

  const auto& polys = field("polygons");
  if (!polys.is_array()) throw ParseError(line_number, "field 'polygons' must be an array");
  for (std::size_t i = 0; i < polys.size(); ++i) {
    const std::string where = "polygons[" + std::to_string(i) + "]";
    const auto& flat = polys[i];
    if (!flat.is_array()) throw ParseError(line_number, "field '" + where + "' must be an array");
    if (flat.size() % 2 != 0 || flat.size() < 6) {
      throw ParseError(line_number, "field '" + where + "' needs an even number of at least 6 coordinates, got " +
                                        std::to_string(flat.size()));
    }
    Polygon p;
    for (std::size_t k = 0; k < flat.size(); k += 2) {
      p.vertices.push_back({coordinate(flat[k], where + "[" + std::to_string(k) + "]"),
                            coordinate(flat[k + 1], where + "[" + std::to_string(k + 1) + "]")});
    }
    r.polygons.polygons.push_back(std::move(p));
  }
  return r;
}

std::vector<AnnotationRecord> read_annotations(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<AnnotationRecord> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    out.push_back(parse_annotation(line, line_no));
    if (!ids.insert(out.back().id).second) throw ParseError(line_no, "duplicate id '" + out.back().id + "'");
  }
  return out;
}

std::string format_annotation(const AnnotationRecord& r) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  std::string out = "{\"id\":" + nlohmann::json(r.id).dump() + ",\"image\":" + nlohmann::json(r.image).dump() +
                    ",\"width\":" + std::to_string(r.width) + ",\"height\":" + std::to_string(r.height) +
                    ",\"query\":" + nlohmann::json(r.query).dump() + ",\"bbox\":[" + num(r.bbox.x1) + "," +
                    num(r.bbox.y1) + "," + num(r.bbox.x2) + "," + num(r.bbox.y2) + "],\"polygons\":[";
  for (std::size_t i = 0; i < r.polygons.polygons.size(); ++i) {
    out += i ? ",[" : "[";
    const auto& vs = r.polygons.polygons[i].vertices;
    for (std::size_t k = 0; k < vs.size(); ++k) out += (k ? "," : "") + num(vs[k].x) + "," + num(vs[k].y);
    out += "]";
  }
  out += "]}";
  return out;
}

void write_annotations(const std::string& path, const std::vector<AnnotationRecord>& records) {
  std::string out;
  for (const auto& r : records) out += format_annotation(r) + "\n";
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Rasters

namespace {

struct NetpbmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

NetpbmHeader parse_netpbm(const std::string& bytes, const char* magic) {
  if (bytes.size() < 2 || bytes.compare(0, 2, magic) != 0) throw IoError(std::string("expected ") + magic + " header");
  std::size_t pos = 2;
  auto next_int = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw IoError("malformed netpbm header");
    return std::stoi(bytes.substr(start, pos - start));
  };
  NetpbmHeader h;
  h.width = next_int();
  h.height = next_int();
  h.maxval = next_int();
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) throw IoError("malformed netpbm header");
  h.data_offset = pos + 1;
  if (h.width < 1 || h.height < 1 || h.maxval < 1 || h.maxval > 255) throw IoError("unsupported netpbm dimensions");
  return h;
}

}  // namespace

std::string encode_pgm(const Mask& mask) {
  std::string out = "P5\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n255\n";
  for (const std::uint8_t b : mask.bits()) out.push_back(static_cast<char>(b ? 255 : 0));
  return out;
}

Mask decode_pgm(const std::string& bytes) {
  const NetpbmHeader h = parse_netpbm(bytes, "P5");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  if (bytes.size() - h.data_offset != n) throw IoError("PGM payload size mismatch");
  Mask m(h.width, h.height);
  for (int r = 0; r < h.height; ++r) {
    for (int c = 0; c < h.width; ++c) {
      if (bytes[h.data_offset + static_cast<std::size_t>(r) * h.width + c] != 0) m.set(r, c);
    }
  }
  return m;
}

void write_pgm(const std::string& path, const Mask& mask) { write_file_atomic(path, encode_pgm(mask)); }
Mask read_pgm(const std::string& path) { return decode_pgm(read_file(path)); }

std::string encode_ppm(const RgbImage& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

RgbImage decode_ppm(const std::string& bytes) {
  const NetpbmHeader h = parse_netpbm(bytes, "P6");
  RgbImage img(h.width, h.height);
  if (bytes.size() - h.data_offset != img.pixels.size()) throw IoError("PPM payload size mismatch");
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset), bytes.end(), img.pixels.begin());
  return img;
}

void write_ppm(const std::string& path, const RgbImage& image) { write_file_atomic(path, encode_ppm(image)); }
RgbImage read_ppm(const std::string& path) { return decode_ppm(read_file(path)); }

// ---------------------------------------------------------------------------
// Datasets

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) out += (i ? " " : "") + words[i];
  return out;
}

AnnotationRecord to_record(const Sample& s, const std::string& image_path) {
  return AnnotationRecord{s.id, image_path, s.image.width, s.image.height, join_words(s.query), s.gt_box,
                          s.gt_polygons};
}

Prediction to_prediction(const AnnotationRecord& r) { return Prediction{r.bbox, r.polygons}; }

void write_dataset(const std::string& dir, const std::vector<Sample>& samples, const std::string& config_echo) {
  std::vector<AnnotationRecord> records;
  for (const Sample& s : samples) {
    const std::string rel = "images/" + s.id + ".ppm";
    write_ppm((fs::path(dir) / rel).string(), s.image);
    records.push_back(to_record(s, rel));
  }
  write_annotations((fs::path(dir) / "annotations.jsonl").string(), records);
  write_file_atomic((fs::path(dir) / "config.txt").string(), config_echo);
}

std::vector<Sample> read_dataset(const std::string& path) {
  const fs::path annotations = fs::is_directory(path) ? fs::path(path) / "annotations.jsonl" : fs::path(path);
  const fs::path base = annotations.parent_path();
  std::vector<Sample> out;
  for (AnnotationRecord& r : read_annotations(annotations.string())) {
    Sample s;
    s.id = r.id;
    s.image = read_ppm((base / r.image).string());
    if (s.image.width != r.width || s.image.height != r.height) {
      throw IoError("image size of " + r.image + " differs from its annotation");
    }
    s.query = split_words(r.query);
    s.gt_box = r.bbox;
    s.gt_polygons = std::move(r.polygons);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

ojson aggregate_json(const AggregateMetrics& a) {
  ojson j;
  j["miou"] = a.miou;
  j["oiou"] = a.oiou;
  j["prec_at_0.5"] = a.prec_at_05;
  j["mean_j"] = a.mean_j;
  j["mean_f"] = a.mean_f;
  j["count"] = a.count;
  return j;
}

ojson sample_json(const std::string& id, const SampleMetrics& m) {
  ojson j;
  j["id"] = id;
  j["iou"] = m.iou;
  j["box_iou"] = m.box_iou;
  j["intersection"] = m.intersection;
  j["union"] = m.union_;
  j["j"] = m.j;
  j["f"] = m.f;
  return j;
}

}  // namespace

std::string report_json(const EvalReport& report) {
  ojson j;
  j["config"] = report.config_echo;
  j["mode"] = report.mode;
  j["runtime_seconds"] = report.seconds;
  j["aggregate"] = aggregate_json(report.aggregate);
  ojson per = ojson::array();
  for (std::size_t i = 0; i < report.per_sample.size(); ++i) per.push_back(sample_json(report.ids[i], report.per_sample[i]));
  j["per_sample"] = std::move(per);
  return j.dump(2) + "\n";
}

std::string video_report_json(const VideoReport& report, const std::vector<std::string>& ids,
                              const std::string& config_echo) {
  ojson j;
  j["config"] = config_echo;
  j["frames"] = report.per_frame.size();
  j["mean_j"] = report.mean_j;
  j["mean_f"] = report.mean_f;
  ojson per = ojson::array();
  for (std::size_t i = 0; i < report.per_frame.size(); ++i) per.push_back(sample_json(ids[i], report.per_frame[i]));
  j["per_frame"] = std::move(per);
  return j.dump(2) + "\n";
}

std::string ablation_json(const AblationResult& result, const std::string& config_echo) {
  ojson j;
  j["config"] = config_echo;
  ojson rows = ojson::array();
  double sr = 0.0;
  double sc = 0.0;
  for (const AblationRow& r : result.rows) {
    ojson row;
    row["seed"] = r.seed;
    row["regression_miou"] = r.regression_miou;
    row["classification_miou"] = r.classification_miou;
    row["difference"] = r.difference();
    row["regression_oiou"] = r.regression_oiou;
    row["classification_oiou"] = r.classification_oiou;
    rows.push_back(std::move(row));
    sr += r.regression_miou;
    sc += r.classification_miou;
  }
  j["rows"] = std::move(rows);
  const double n = result.rows.empty() ? 1.0 : static_cast<double>(result.rows.size());
  j["mean_regression_miou"] = sr / n;
  j["mean_classification_miou"] = sc / n;
  j["mean_difference"] = (sr - sc) / n;
  j["regression_wins"] = result.regression_wins;
  return j.dump(2) + "\n";
}

std::string epoch_log_json(const EpochLog& log) {
  ojson j;
  j["epoch"] = log.epoch;
  j["total"] = log.total;
  j["coordinate"] = log.coordinate;
  j["classification"] = log.classification;
  j["fixed_batch_loss"] = log.fixed_batch_loss;
  j["lr"] = log.lr;
  j["seconds"] = log.seconds;
  return j.dump();
}

void write_report(const EvalReport& report, const std::string& path) { write_file_atomic(path, report_json(report)); }

AggregateMetrics recompute_report_aggregates(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  std::vector<SampleMetrics> per;
  for (const auto& s : j.at("per_sample")) {
    SampleMetrics m;
    m.iou = s.at("iou").get<double>();
    m.box_iou = s.at("box_iou").get<double>();
    m.intersection = s.at("intersection").get<double>();
    m.union_ = s.at("union").get<double>();
    m.j = s.at("j").get<double>();
    m.f = s.at("f").get<double>();
    per.push_back(m);
  }
  return aggregate_metrics(per);
}

}  // namespace polyseq
