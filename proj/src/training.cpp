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
#include <chrono>
#include <cmath>
#include <numeric>

#include "polyseq/errors.hpp"
#include "polyseq/harness.hpp"

namespace polyseq {

TokenSequence training_target(const Sample& s, const TrainConfig& config, std::mt19937_64& rng) {
  std::bernoulli_distribution augment(config.augment_prob);
  if (!augment(rng)) return encode_target(s.gt_box, s.gt_polygons);
  MultiPolygon mp;
  for (const Polygon& p : s.gt_polygons.polygons) {
    const Polygon dense = interpolate_contour(p, config.dense_points / perimeter(p));
    const int hi = std::max(config.interval_min,
                            std::min(config.interval_max, static_cast<int>(dense.vertices.size()) / 3));
    const std::uint64_t seed = rng();
    try {
      mp.polygons.push_back(augment_downsample(dense, {config.interval_min, hi}, seed));
    } catch (const DegeneratePolygon&) {
      mp.polygons.push_back(p);
    }
  }
  sort_polygons(mp);
  return encode_target(s.gt_box, mp);
}

TrainResult train(const TrainConfig& config, const std::vector<Sample>& data,
                  const std::function<void(const EpochLog&, const Model&)>& on_epoch, const std::string& failure_checkpoint) {
  if (data.empty()) throw ConfigError("training set is empty");
  if (config.epochs < 0 || config.batch < 1) throw ConfigError("epochs must be >= 0 and batch >= 1");
  TrainResult result;
  result.model = std::make_unique<Model>(config.model, config.seed);
  Model& model = *result.model;
  AdamW optimizer(model, AdamW::Options{.weight_decay = config.weight_decay});

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<int>> queries;
  queries.reserve(data.size());
  for (const Sample& s : data) queries.push_back(encode_query(s.query));

  const long steps_per_epoch = static_cast<long>((data.size() + config.batch - 1) / config.batch);
  const long total_steps = steps_per_epoch * config.epochs;
  const std::size_t fixed = std::min<std::size_t>(data.size(), static_cast<std::size_t>(config.batch));
  auto last_good = model.snapshot();

  try {
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();
      std::shuffle(order.begin(), order.end(), rng);
      EpochLog log;
      log.epoch = epoch;
      for (std::size_t start = 0; start < order.size(); start += config.batch) {
        const std::size_t end = std::min(order.size(), start + config.batch);
        model.zero_grad();
        const double scale = 1.0 / static_cast<double>(end - start);
        for (std::size_t i = start; i < end; ++i) {
          const Sample& s = data[order[i]];
          const TokenSequence target = training_target(s, config, rng);
          const LossBreakdown l = model.accumulate_gradients(s.image, queries[order[i]], target, config.loss, scale);
          log.total += l.total;
          log.coordinate += l.coordinate;
          log.classification += l.classification;
        }
        log.lr = polynomial_lr(config.lr, optimizer.steps(), total_steps, config.warmup_steps);
        optimizer.step(model, log.lr);
      }
      const double n = static_cast<double>(data.size());
      log.total /= n;
      log.coordinate /= n;
      log.classification /= n;
      for (std::size_t i = 0; i < fixed; ++i) {
        log.fixed_batch_loss += model.loss(data[i].image, queries[i], encode_target(data[i].gt_box, data[i].gt_polygons),
                                           config.loss).total;
      }
      log.fixed_batch_loss /= static_cast<double>(fixed);
      if (!std::isfinite(log.total) || !std::isfinite(log.fixed_batch_loss)) {
        throw NumericalFailure("non-finite loss in epoch " + std::to_string(epoch));
      }
      log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      result.log.push_back(log);
      last_good = model.snapshot();
      if (on_epoch) on_epoch(log, model);
    }
  } catch (const NumericalFailure&) {
    model.restore(last_good);
    if (!failure_checkpoint.empty()) save_checkpoint(failure_checkpoint, model, config.model.to_text());
    throw;
  }
  return result;
}

}  // namespace polyseq
