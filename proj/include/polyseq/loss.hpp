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

#include <vector>

#include "polyseq/seqcodec.hpp"

namespace polyseq {

enum class DecoderMode { kRegression, kClassification };

const char* mode_name(DecoderMode mode);
DecoderMode parse_mode(const std::string& name);

struct LossWeights {
  double lambda_box = 0.1;
  double lambda_poly = 1.0;
  double lambda_cls = 5e-4;
  double smoothing = 0.1;
};

// Head outputs for every decoder input position. Position p predicts target
// token p+1.
struct SequencePredictions {
  DecoderMode mode = DecoderMode::kRegression;
  int positions = 0;
  std::vector<double> class_logits;  // positions x 3 (COO, SEP, EOS)
  std::vector<double> coords;        // positions x 2, regression only
  int bins_w = 0;
  int bins_h = 0;
  std::vector<double> bin_logits_x;  // positions x bins_w, classification only
  std::vector<double> bin_logits_y;  // positions x bins_h, classification only
};

struct LossBreakdown {
  double total = 0.0;
  double coordinate = 0.0;
  double classification = 0.0;
  // Coordinate weight applied at each position (0 where the target is not COO).
  std::vector<double> position_weights;
  std::vector<double> coordinate_per_position;
  std::vector<double> classification_per_position;
};

struct LossGradients {
  std::vector<double> class_logits;
  std::vector<double> coords;
  std::vector<double> bin_logits_x;
  std::vector<double> bin_logits_y;
};

// Sum over positions of lambda_t * L_coo * [target is COO] + lambda_cls * L_cls.
// L_coo is |dx|+|dy| (regression) or the label-smoothed CE over each axis'
// bins (classification); L_cls is label-smoothed CE over token kinds.
// lambda_t is lambda_box for target tokens 1 and 2, lambda_poly afterwards.
// Throws AlignmentError unless positions == targets.size() - 1.
LossBreakdown sequence_loss(const SequencePredictions& predictions, const TokenSequence& targets,
                            const LossWeights& weights, LossGradients* gradients = nullptr);

// Label-smoothed cross entropy of one logit row; optionally writes
// d(loss)/d(logits) scaled by `scale` into grad.
double smoothed_cross_entropy(const double* logits, int classes, int target, double smoothing,
                              double* grad = nullptr, double scale = 1.0);

}  // namespace polyseq
