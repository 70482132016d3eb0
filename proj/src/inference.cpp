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
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "polyseq/errors.hpp"
#include "polyseq/harness.hpp"

namespace polyseq {
namespace {

// Closes an unfinished sequence so whatever complete polygons it holds parse.
TokenSequence close_best_effort(TokenSequence tokens) {
  while (tokens.size() > 3) {
    try {
      const auto allowed = validate_prefix(tokens);
      if (allowed.contains(TokenKind::kEos)) break;
    } catch (const MalformedSequence&) {
    }
    tokens.pop_back();
  }
  tokens.push_back(Token::eos());
  return tokens;
}

}  // namespace

InferenceResult infer(const Model& model, const RgbImage& image, std::span<const std::string> query,
                      bool keep_attention, int max_tokens) {
  const std::vector<int> ids = encode_query(query);
  const Matrix memory = model.encode(image, ids);
  InferenceResult result;
  TokenSequence tokens{Token::bos()};
  const int cap = std::min(max_tokens, model.config().max_positions - 1);
  while (true) {
    if (static_cast<int>(tokens.size()) - 1 >= cap) {
      result.overflow = true;
      break;
    }
    DecodeStepOutput step = model.decode_step(memory, model.embed_prefix(tokens));
    const auto allowed = validate_prefix(tokens);
    int best = -1;
    for (int k = 0; k < kNumTokenClasses; ++k) {
      if (!allowed.contains(kind_from_class(k))) continue;
      if (best < 0 || step.class_logits[k] > step.class_logits[best]) best = k;
    }
    if (keep_attention) result.attention.push_back(std::move(step.cross_attention));
    const TokenKind kind = kind_from_class(best);
    if (kind == TokenKind::kCoo) {
      tokens.push_back(Token::coo(std::clamp(step.coord.x, 0.0, 1.0), std::clamp(step.coord.y, 0.0, 1.0)));
    } else if (kind == TokenKind::kSep) {
      tokens.push_back(Token::sep());
    } else {
      tokens.push_back(Token::eos());
      break;
    }
  }

  const TokenSequence parsed_tokens = result.overflow ? close_best_effort(tokens) : tokens;
  result.tokens = tokens;
  try {
    DecodedTarget decoded = decode_sequence(parsed_tokens);
    result.box = decoded.box;
    result.polygons = std::move(decoded.polygons);
    result.box_reordered = decoded.box_reordered;
  } catch (const MalformedSequence&) {
    // Only reachable after overflow with no complete polygon.
    if (parsed_tokens.size() >= 3) {
      const Point a = parsed_tokens[1].coord();
      const Point b = parsed_tokens[2].coord();
      result.box = Box{std::min(a.x, b.x), std::min(a.y, b.y), std::max(a.x, b.x), std::max(a.y, b.y)};
    }
  }
  result.mask = rasterize(result.polygons, image.width, image.height);
  return result;
}

Prediction ModelPredictor::predict(const Sample& sample) const {
  InferenceResult r = infer(model_, sample.image, sample.query);
  return Prediction{r.box, std::move(r.polygons)};
}

SampleMetrics score_prediction(const Sample& sample, const Prediction& prediction) {
  const Mask gt = ground_truth_mask(sample);
  const Mask pred = rasterize(prediction.polygons, sample.image.width, sample.image.height);
  const MaskMetrics m = mask_metrics(pred, gt);
  SampleMetrics s;
  s.iou = m.iou;
  s.j = m.j;
  s.f = m.f;
  s.intersection = static_cast<double>(m.intersection);
  s.union_ = static_cast<double>(m.union_);
  s.box_iou = box_iou(prediction.box, sample.gt_box);
  return s;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("POLYSEQ_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

EvalReport evaluate(std::span<const Sample> data, const Predictor& predictor, int threads) {
  if (data.empty()) throw EmptyEvaluation("evaluation set is empty");
  const auto t0 = std::chrono::steady_clock::now();
  EvalReport report;
  report.per_sample.resize(data.size());
  report.ids.resize(data.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < data.size(); i = next++) {
      report.ids[i] = data[i].id;
      report.per_sample[i] = score_prediction(data[i], predictor.predict(data[i]));
    }
  };
  const int n = std::min<int>(resolve_threads(threads), static_cast<int>(data.size()));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  report.aggregate = aggregate_metrics(report.per_sample);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

VideoReport evaluate_video(std::span<const Sample> frames, const Predictor& predictor) {
  if (frames.empty()) throw EmptyEvaluation("video has no frames");
  VideoReport report;
  for (const Sample& f : frames) {
    const Prediction p = predictor.predict(f);
    report.masks.push_back(rasterize(p.polygons, f.image.width, f.image.height));
    report.per_frame.push_back(score_prediction(f, p));
  }
  const AggregateMetrics agg = aggregate_metrics(report.per_frame);
  report.mean_j = agg.mean_j;
  report.mean_f = agg.mean_f;
  return report;
}

AblationResult ablate_decoder(const AblationConfig& config, const std::function<void(const std::string&)>& progress) {
  AblationResult result;
  for (const std::uint64_t seed : config.seeds) {
    DatasetConfig train_data = config.data;
    train_data.count = config.train_count;
    train_data.seed = seed;
    train_data.id_prefix = "train";
    DatasetConfig test_data = config.data;
    test_data.count = config.test_count;
    test_data.seed = seed + 1000003ULL;
    test_data.id_prefix = "test";
    const auto train_set = generate_dataset(train_data);
    const auto test_set = generate_dataset(test_data);

    AblationRow row;
    row.seed = seed;
    for (const DecoderMode mode : {DecoderMode::kRegression, DecoderMode::kClassification}) {
      TrainConfig tc = config.train;
      tc.seed = seed;
      tc.model.mode = mode;
      const TrainResult trained = train(tc, train_set);
      const EvalReport rep = evaluate(test_set, ModelPredictor(*trained.model));
      if (mode == DecoderMode::kRegression) {
        row.regression_miou = rep.aggregate.miou;
        row.regression_oiou = rep.aggregate.oiou;
      } else {
        row.classification_miou = rep.aggregate.miou;
        row.classification_oiou = rep.aggregate.oiou;
      }
      if (progress) {
        progress("seed " + std::to_string(seed) + " " + mode_name(mode) + " mIoU " + std::to_string(rep.aggregate.miou));
      }
    }
    if (row.regression_miou >= row.classification_miou) ++result.regression_wins;
    result.rows.push_back(row);
  }
  return result;
}

std::string format_ablation_table(const AblationResult& result) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-8s %12s %16s %10s\n", "seed", "regression", "classification", "diff");
  out += buf;
  double sr = 0.0;
  double sc = 0.0;
  for (const AblationRow& r : result.rows) {
    std::snprintf(buf, sizeof(buf), "%-8llu %12.4f %16.4f %+10.4f\n", static_cast<unsigned long long>(r.seed),
                  r.regression_miou, r.classification_miou, r.difference());
    out += buf;
    sr += r.regression_miou;
    sc += r.classification_miou;
  }
  if (!result.rows.empty()) {
    const double n = static_cast<double>(result.rows.size());
    std::snprintf(buf, sizeof(buf), "%-8s %12.4f %16.4f %+10.4f\n", "mean", sr / n, sc / n, (sr - sc) / n);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "regression >= classification in %d of %zu seeds\n", result.regression_wins,
                result.rows.size());
  out += buf;
  return out;
}

}  // namespace polyseq
