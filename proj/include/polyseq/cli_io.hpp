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

#include <cstdint>
#include <string>
#include <vector>

#include "polyseq/geometry.hpp"
#include "polyseq/harness.hpp"
#include "polyseq/image.hpp"

namespace polyseq {

// Resolved settings for every command. Serialized as flat key=value text.
struct RunConfig {
  TrainConfig train;
  DatasetConfig data;
  int test_count = 200;
  std::uint64_t test_seed = 1000003;
  int video_frames = 10;
  int threads = 0;
  int ablation_train_count = 400;
  int ablation_test_count = 100;
  int ablation_epochs = 30;
  std::vector<std::uint64_t> ablation_seeds{1, 2, 3, 4, 5};

  // Throws ConfigError.
  void validate() const;
  AblationConfig ablation() const;
};

// Parses key=value lines; `#` starts a comment. Unknown keys, duplicate keys
// and bad values throw ParseError with the line number.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
// Every key, one per line, in a fixed order. Parses back to the same config.
std::string run_config_text(const RunConfig& config);
// Throws ConfigError for unknown keys or bad values.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

struct AnnotationRecord {
  std::string id;
  std::string image;  // path relative to the annotation file's directory
  int width = 0;
  int height = 0;
  std::string query;
  Box bbox;
  MultiPolygon polygons;
};

// One JSON object per line. Throws ParseError naming the line and field.
AnnotationRecord parse_annotation(const std::string& line, std::size_t line_number);
std::vector<AnnotationRecord> read_annotations(const std::string& path);
// Coordinates printed with 6 decimals, keys in a fixed order, no spaces.
std::string format_annotation(const AnnotationRecord& record);
void write_annotations(const std::string& path, const std::vector<AnnotationRecord>& records);

// Writes to path + ".tmp" and renames. Throws IoError.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

// Binary PGM (P5, maxval 255); mask pixels are written as 0 or 255 and any
// nonzero value reads back as set.
std::string encode_pgm(const Mask& mask);
Mask decode_pgm(const std::string& bytes);
void write_pgm(const std::string& path, const Mask& mask);
Mask read_pgm(const std::string& path);

// Binary PPM (P6, maxval 255).
std::string encode_ppm(const RgbImage& image);
RgbImage decode_ppm(const std::string& bytes);
void write_ppm(const std::string& path, const RgbImage& image);
RgbImage read_ppm(const std::string& path);

std::vector<std::string> split_words(const std::string& text);
std::string join_words(const std::vector<std::string>& words);

// Writes annotations.jsonl plus images/<id>.ppm under dir.
void write_dataset(const std::string& dir, const std::vector<Sample>& samples, const std::string& config_echo);
// Loads an annotation file (or dir/annotations.jsonl) and the images it
// references.
std::vector<Sample> read_dataset(const std::string& path);

AnnotationRecord to_record(const Sample& sample, const std::string& image_path);
Prediction to_prediction(const AnnotationRecord& record);

std::string report_json(const EvalReport& report);
std::string video_report_json(const VideoReport& report, const std::vector<std::string>& ids,
                              const std::string& config_echo);
std::string ablation_json(const AblationResult& result, const std::string& config_echo);
std::string epoch_log_json(const EpochLog& log);
void write_report(const EvalReport& report, const std::string& path);

// Recomputes the aggregate block of a report file from its per-sample block.
AggregateMetrics recompute_report_aggregates(const std::string& report_json_text);

}  // namespace polyseq
