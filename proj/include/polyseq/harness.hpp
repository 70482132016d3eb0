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
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "polyseq/geometry.hpp"
#include "polyseq/image.hpp"
#include "polyseq/model.hpp"
#include "polyseq/seqcodec.hpp"

namespace polyseq {

// ---------------------------------------------------------------------------
// Synthetic referring-segmentation data
// ---------------------------------------------------------------------------

// Closed query vocabulary. Index 0 is padding, index 1 unknown.
const std::vector<std::string>& vocabulary();
int word_id(const std::string& word);
std::vector<int> encode_query(std::span<const std::string> words);

const std::vector<std::string>& shape_class_names();
const std::vector<std::string>& color_names();

struct Sample {
  std::string id;
  RgbImage image;
  std::vector<std::string> query;
  Box gt_box;
  MultiPolygon gt_polygons;
};

struct DatasetConfig {
  int count = 100;
  int image_size = 64;
  int min_shapes = 2;
  int max_shapes = 4;
  std::vector<std::string> classes = shape_class_names();
  std::vector<std::string> colors = color_names();
  double min_size = 0.28;
  double max_size = 0.48;
  // Probability that the referent is cut in two by an occluding bar.
  double split_prob = 0.1;
  std::uint64_t seed = 1;
  std::string id_prefix = "s";
};

// Deterministic under seed. Throws ConfigError when the configuration cannot
// produce uniquely referable scenes.
std::vector<Sample> generate_dataset(const DatasetConfig& config);

// One scene in which the referent slides horizontally across `frames` frames
// while the other shape stays put; all frames share one query.
std::vector<Sample> generate_translating_clip(const DatasetConfig& config, int frames);

// Ground-truth mask at the sample's image resolution.
Mask ground_truth_mask(const Sample& s);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  ModelConfig model;
  LossWeights loss;
  double lr = 5e-4;
  double weight_decay = 0.01;
  int epochs = 30;
  int batch = 16;
  long warmup_steps = 100;
  std::uint64_t seed = 1;
  double augment_prob = 0.5;
  int interval_min = 4;
  int interval_max = 12;
  // Target dense contour size before downsampling.
  int dense_points = 96;
};

struct EpochLog {
  int epoch = 0;
  double total = 0.0;
  double coordinate = 0.0;
  double classification = 0.0;
  // Loss on the first `batch` samples without augmentation, after the epoch.
  double fixed_batch_loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

// Target sequence for one training step; with probability augment_prob every
// polygon is resampled from its dense contour at a random interval.
TokenSequence training_target(const Sample& s, const TrainConfig& config, std::mt19937_64& rng);

struct TrainResult {
  std::unique_ptr<Model> model;
  std::vector<EpochLog> log;
};

// Teacher-forced training. On NumericalFailure the model is rolled back to
// the last completed epoch, saved to failure_checkpoint (if non-empty), and
// the error is rethrown.
TrainResult train(const TrainConfig& config, const std::vector<Sample>& data,
                  const std::function<void(const EpochLog&, const Model&)>& on_epoch = {},
                  const std::string& failure_checkpoint = "");

// ---------------------------------------------------------------------------
// Inference and evaluation
// ---------------------------------------------------------------------------

inline constexpr int kMaxGeneratedTokens = 128;

struct InferenceResult {
  Box box;
  MultiPolygon polygons;
  Mask mask;
  TokenSequence tokens;
  bool overflow = false;  // token cap reached before EOS
  bool box_reordered = false;
  // attention[step][layer][head][memory position]
  std::vector<std::vector<std::vector<std::vector<double>>>> attention;
};

// Greedy decoding restricted to kinds allowed by validate_prefix.
InferenceResult infer(const Model& model, const RgbImage& image, std::span<const std::string> query,
                      bool keep_attention = false, int max_tokens = kMaxGeneratedTokens);

struct Prediction {
  Box box;
  MultiPolygon polygons;
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual Prediction predict(const Sample& sample) const = 0;
};

class ModelPredictor : public Predictor {
 public:
  explicit ModelPredictor(const Model& model) : model_(model) {}
  Prediction predict(const Sample& sample) const override;

 private:
  const Model& model_;
};

struct EvalReport {
  std::string mode;
  std::vector<std::string> ids;
  std::vector<SampleMetrics> per_sample;
  AggregateMetrics aggregate;
  double seconds = 0.0;
  std::string config_echo;
};

SampleMetrics score_prediction(const Sample& sample, const Prediction& prediction);

// threads <= 0 reads POLYSEQ_THREADS, defaulting to the hardware count.
// Throws EmptyEvaluation.
EvalReport evaluate(std::span<const Sample> data, const Predictor& predictor, int threads = 0);

struct VideoReport {
  std::vector<Mask> masks;
  std::vector<SampleMetrics> per_frame;
  double mean_j = 0.0;
  double mean_f = 0.0;
};

// Stateless per-frame inference. Throws EmptyEvaluation.
VideoReport evaluate_video(std::span<const Sample> frames, const Predictor& predictor);

// ---------------------------------------------------------------------------
// Decoder ablation
// ---------------------------------------------------------------------------

struct AblationConfig {
  TrainConfig train;
  DatasetConfig data;
  int train_count = 400;
  int test_count = 100;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

struct AblationRow {
  std::uint64_t seed = 0;
  double regression_miou = 0.0;
  double classification_miou = 0.0;
  double regression_oiou = 0.0;
  double classification_oiou = 0.0;
  double difference() const { return regression_miou - classification_miou; }
};

struct AblationResult {
  std::vector<AblationRow> rows;
  int regression_wins = 0;  // seeds with regression mIoU >= classification mIoU
};

AblationResult ablate_decoder(const AblationConfig& config,
                              const std::function<void(const std::string&)>& progress = {});

std::string format_ablation_table(const AblationResult& result);

int resolve_threads(int requested);

}  // namespace polyseq
