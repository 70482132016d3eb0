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

#include "polyseq/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "polyseq/coordbook.hpp"
#include "polyseq/errors.hpp"

namespace polyseq {

const char* mode_name(DecoderMode mode) {
  return mode == DecoderMode::kRegression ? "regression" : "classification";
}

DecoderMode parse_mode(const std::string& name) {
  if (name == "regression") return DecoderMode::kRegression;
  if (name == "classification") return DecoderMode::kClassification;
  throw ConfigError("unknown decoder mode '" + name + "'");
}

double smoothed_cross_entropy(const double* logits, int classes, int target, double smoothing,
                              double* grad, double scale) {
  double mx = logits[0];
  for (int k = 1; k < classes; ++k) mx = std::max(mx, logits[k]);
  double sum = 0.0;
  for (int k = 0; k < classes; ++k) sum += std::exp(logits[k] - mx);
  const double log_z = mx + std::log(sum);
  const double off = smoothing / classes;
  double loss = 0.0;
  for (int k = 0; k < classes; ++k) {
    const double q = off + (k == target ? 1.0 - smoothing : 0.0);
    const double log_p = logits[k] - log_z;
    loss -= q * log_p;
    if (grad != nullptr) grad[k] += scale * (std::exp(log_p) - q);
  }
  return loss;
}

LossBreakdown sequence_loss(const SequencePredictions& pred, const TokenSequence& targets,
                            const LossWeights& w, LossGradients* grads) {
  const int n = pred.positions;
  if (targets.size() < 2 || static_cast<int>(targets.size()) - 1 != n) {
    throw AlignmentError("predictions cover " + std::to_string(n) + " positions but targets have " +
                         std::to_string(targets.size()) + " tokens");
  }
  const bool regression = pred.mode == DecoderMode::kRegression;
  if (pred.class_logits.size() != static_cast<std::size_t>(n) * kNumTokenClasses ||
      (regression && pred.coords.size() != static_cast<std::size_t>(n) * 2) ||
      (!regression && (pred.bin_logits_x.size() != static_cast<std::size_t>(n) * pred.bins_w ||
                       pred.bin_logits_y.size() != static_cast<std::size_t>(n) * pred.bins_h))) {
    throw AlignmentError("prediction arrays do not match the position count");
  }
  if (grads != nullptr) {
    grads->class_logits.assign(pred.class_logits.size(), 0.0);
    grads->coords.assign(pred.coords.size(), 0.0);
    grads->bin_logits_x.assign(pred.bin_logits_x.size(), 0.0);
    grads->bin_logits_y.assign(pred.bin_logits_y.size(), 0.0);
  }

  LossBreakdown out;
  out.position_weights.assign(n, 0.0);
  out.coordinate_per_position.assign(n, 0.0);
  out.classification_per_position.assign(n, 0.0);
  for (int p = 0; p < n; ++p) {
    const Token& target = targets[static_cast<std::size_t>(p) + 1];
    if (target.kind() == TokenKind::kBos) throw AlignmentError("BOS cannot be a prediction target");

    const double cls = smoothed_cross_entropy(
        pred.class_logits.data() + static_cast<std::size_t>(p) * kNumTokenClasses, kNumTokenClasses,
        class_index(target.kind()), w.smoothing,
        grads ? grads->class_logits.data() + static_cast<std::size_t>(p) * kNumTokenClasses : nullptr,
        w.lambda_cls);
    out.classification_per_position[p] = w.lambda_cls * cls;

    if (!target.is_coo()) continue;
    const double lambda = (p + 1 <= 2) ? w.lambda_box : w.lambda_poly;
    out.position_weights[p] = lambda;
    const Point& t = target.coord();
    double coo = 0.0;
    if (regression) {
      const double dx = pred.coords[static_cast<std::size_t>(p) * 2] - t.x;
      const double dy = pred.coords[static_cast<std::size_t>(p) * 2 + 1] - t.y;
      coo = std::abs(dx) + std::abs(dy);
      if (grads != nullptr) {
        auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
        grads->coords[static_cast<std::size_t>(p) * 2] += lambda * sign(dx);
        grads->coords[static_cast<std::size_t>(p) * 2 + 1] += lambda * sign(dy);
      }
    } else {
      const int bx = quantize_axis(t.x, pred.bins_w);
      const int by = quantize_axis(t.y, pred.bins_h);
      coo = smoothed_cross_entropy(
                pred.bin_logits_x.data() + static_cast<std::size_t>(p) * pred.bins_w, pred.bins_w, bx,
                w.smoothing,
                grads ? grads->bin_logits_x.data() + static_cast<std::size_t>(p) * pred.bins_w : nullptr,
                lambda) +
            smoothed_cross_entropy(
                pred.bin_logits_y.data() + static_cast<std::size_t>(p) * pred.bins_h, pred.bins_h, by,
                w.smoothing,
                grads ? grads->bin_logits_y.data() + static_cast<std::size_t>(p) * pred.bins_h : nullptr,
                lambda);
    }
    out.coordinate_per_position[p] = lambda * coo;
  }
  for (int p = 0; p < n; ++p) {
    out.coordinate += out.coordinate_per_position[p];
    out.classification += out.classification_per_position[p];
  }
  out.total = out.coordinate + out.classification;
  return out;
}

}  // namespace polyseq
