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

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "polyseq/autodiff.hpp"
#include "polyseq/coordbook.hpp"
#include "polyseq/image.hpp"
#include "polyseq/loss.hpp"
#include "polyseq/seqcodec.hpp"

namespace polyseq {

struct ModelConfig {
  int image_size = 64;
  int patch = 8;
  int patch_features = 64;  // toy visual feature width C_v
  int text_features = 32;   // toy word feature width C_l
  int vocab_size = 48;
  int max_query_len = 8;
  int width = 64;
  int heads = 4;
  int ffn = 128;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int coord_dim = 64;  // C_e; must equal width
  int bins_h = 64;
  int bins_w = 64;
  int max_positions = 130;
  int rel_max_offset = 16;
  DecoderMode mode = DecoderMode::kRegression;

  int grid() const { return image_size / patch; }
  int memory_length(int query_len) const { return grid() * grid() + query_len; }
  // Throws ConfigError on inconsistent dimensions.
  void validate() const;
  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);
};

// Row-major dense matrix used at the value-level API boundary.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
  std::span<const double> row(int r) const {
    return std::span<const double>(data).subspan(static_cast<std::size_t>(r) * cols, cols);
  }
};

struct DecodeStepOutput {
  std::array<double, kNumTokenClasses> class_logits{};
  Point coord;  // regression: sigmoid output; classification: dequantized bins
  std::vector<double> bin_logits_x;
  std::vector<double> bin_logits_y;
  // cross_attention[layer][head] is a distribution over memory positions.
  std::vector<std::vector<std::vector<double>>> cross_attention;
};

// Toy multi-modal encoder, transformer decoder and prediction heads.
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const noexcept { return config_; }

  std::span<const std::unique_ptr<ad::Parameter>> parameters() const noexcept { return params_; }
  ad::Parameter& param(const std::string& name) const;
  bool has_param(const std::string& name) const;
  void zero_grad();
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

  Codebook2D codebook() const;

  // --- graph builders (the value-level API below is layered on these) ---
  ad::Graph::Id build_memory(ad::Graph& g, const RgbImage& image, std::span<const int> query) const;
  ad::Graph::Id build_prefix_embeddings(ad::Graph& g, const TokenSequence& prefix) const;
  struct DecoderNodes {
    ad::Graph::Id hidden = -1;
    ad::Graph::Id class_logits = -1;
    ad::Graph::Id coords = -1;
    ad::Graph::Id bin_x = -1;
    ad::Graph::Id bin_y = -1;
    std::vector<ad::Graph::Id> cross_attention;
  };
  DecoderNodes build_decoder(ad::Graph& g, ad::Graph::Id memory, ad::Graph::Id inputs) const;
  // Regression: (x, y) via sigmoid of the coordinate FFN. Classification: two
  // bin-logit rows per position.
  void build_heads(ad::Graph& g, DecoderNodes& nodes) const;

  // --- value-level API ---
  // Flattened patch features and query words projected to a common width,
  // concatenated and passed through the encoder stack.
  Matrix encode(const RgbImage& image, std::span<const int> query) const;
  // Decoder inputs for a BOS-started prefix, positional encodings included.
  Matrix embed_prefix(const TokenSequence& prefix) const;
  // Outputs at the last prefix position.
  DecodeStepOutput decode_step(const Matrix& memory, const Matrix& prefix_embeddings) const;
  // Outputs at every prefix position (teacher forcing).
  std::vector<DecodeStepOutput> decode_positions(const Matrix& memory, const Matrix& prefix_embeddings) const;

  // Teacher-forced head outputs for predicting targets[1..] from targets[..n-1].
  SequencePredictions predict_sequence(const RgbImage& image, std::span<const int> query,
                                       const TokenSequence& targets) const;
  // Forward + reverse pass; adds scale * d(loss)/d(theta) into every
  // Parameter::grad. Throws NumericalFailure on non-finite loss.
  LossBreakdown accumulate_gradients(const RgbImage& image, std::span<const int> query,
                                     const TokenSequence& targets, const LossWeights& weights,
                                     double scale = 1.0);
  LossBreakdown loss(const RgbImage& image, std::span<const int> query, const TokenSequence& targets,
                     const LossWeights& weights) const;

 private:
  ad::Parameter& add_param(const std::string& name, int rows, int cols);
  ad::Graph::Id p(ad::Graph& g, const std::string& name) const;
  ad::Graph::Id attention_block(ad::Graph& g, ad::Graph::Id x_norm, ad::Graph::Id kv, const std::string& prefix,
                                const ad::AttentionSpec& spec, ad::Graph::Id* attn_node) const;
  ad::Graph::Id ffn_block(ad::Graph& g, ad::Graph::Id x_norm, const std::string& prefix) const;
  SequencePredictions collect_predictions(const ad::Graph& g, const DecoderNodes& nodes) const;
  void initialize(std::uint64_t seed);

  ModelConfig config_;
  std::vector<std::unique_ptr<ad::Parameter>> params_;
};

// Decoupled-weight-decay Adam.
class AdamW {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };
  AdamW(const Model& model, Options options);
  // Applies one update with the given learning rate; throws NumericalFailure
  // if any gradient is non-finite.
  void step(Model& model, double lr);
  long steps() const noexcept { return t_; }

 private:
  Options opt_;
  long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// Linear warmup then polynomial decay to zero.
double polynomial_lr(double base_lr, long step, long total_steps, long warmup_steps, double power = 1.0);

// Little-endian container: "PSEQCKPT", u32 version, model config text, run
// config echo, then named f64 tensors. See docs/formats.md.
void save_checkpoint(const std::string& path, const Model& model, const std::string& run_config_echo);
struct LoadedCheckpoint {
  std::unique_ptr<Model> model;
  std::string run_config_echo;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace polyseq
