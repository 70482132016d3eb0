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

#include "polyseq/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "polyseq/errors.hpp"

namespace polyseq {
namespace {

using Id = ad::Graph::Id;

std::vector<int> iota_vec(int begin, int count) {
  std::vector<int> v(count);
  std::iota(v.begin(), v.end(), begin);
  return v;
}

void fill_sinusoid(std::span<double> row, double position, int offset, int count) {
  for (int i = 0; i < count / 2; ++i) {
    const double freq = std::pow(100.0, -2.0 * i / count);
    row[offset + 2 * i] = std::sin(position * freq);
    row[offset + 2 * i + 1] = std::cos(position * freq);
  }
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (patch < 1 || image_size < patch || image_size % patch != 0) fail("image_size must be a multiple of patch");
  if (width < 2 || heads < 1 || width % heads != 0) fail("heads must divide width");
  if (ffn < 1 || patch_features < 1 || text_features < 1) fail("feature widths must be positive");
  if (vocab_size < 1 || max_query_len < 1) fail("vocabulary and query length must be positive");
  if (encoder_layers < 0 || decoder_layers < 0) fail("layer counts must be non-negative");
  if (coord_dim != width) fail("coord_dim must equal width");
  if (bins_h < 2 || bins_w < 2) fail("codebook needs at least 2 bins per axis");
  if (max_positions < 4) fail("max_positions too small");
  if (rel_max_offset < 0) fail("rel_max_offset must be non-negative");
}

std::string ModelConfig::to_text() const {
  std::ostringstream o;
  o << "image_size=" << image_size << "\npatch=" << patch << "\npatch_features=" << patch_features
    << "\ntext_features=" << text_features << "\nvocab_size=" << vocab_size
    << "\nmax_query_len=" << max_query_len << "\nwidth=" << width << "\nheads=" << heads
    << "\nffn=" << ffn << "\nencoder_layers=" << encoder_layers << "\ndecoder_layers=" << decoder_layers
    << "\ncoord_dim=" << coord_dim << "\nbins_h=" << bins_h << "\nbins_w=" << bins_w
    << "\nmax_positions=" << max_positions << "\nrel_max_offset=" << rel_max_offset
    << "\nmode=" << mode_name(mode) << "\n";
  return o.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig c;
  std::map<std::string, int*> ints{
      {"image_size", &c.image_size}, {"patch", &c.patch}, {"patch_features", &c.patch_features},
      {"text_features", &c.text_features}, {"vocab_size", &c.vocab_size}, {"max_query_len", &c.max_query_len},
      {"width", &c.width}, {"heads", &c.heads}, {"ffn", &c.ffn}, {"encoder_layers", &c.encoder_layers},
      {"decoder_layers", &c.decoder_layers}, {"coord_dim", &c.coord_dim}, {"bins_h", &c.bins_h},
      {"bins_w", &c.bins_w}, {"max_positions", &c.max_positions}, {"rel_max_offset", &c.rel_max_offset}};
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("bad model config line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "mode") {
      c.mode = parse_mode(val);
    } else if (auto it = ints.find(key); it != ints.end()) {
      *it->second = std::stoi(val);
    } else {
      throw ConfigError("unknown model config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const int d = config_.width;
  const int patch_in = config_.patch * config_.patch * 3;
  const int grid2 = config_.grid() * config_.grid();
  add_param("patch.w", patch_in, config_.patch_features);
  add_param("patch.b", 1, config_.patch_features);
  add_param("proj_v.w", config_.patch_features, d);
  add_param("proj_v.b", 1, d);
  add_param("text.embed", config_.vocab_size, config_.text_features);
  add_param("proj_l.w", config_.text_features, d);
  add_param("proj_l.b", 1, d);
  add_param("enc.pos", grid2 + config_.max_query_len, d);
  add_param("enc.rel_bias", config_.heads, 2 * config_.rel_max_offset + 1);
  auto attn = [&](const std::string& pre) {
    for (const char* m : {"q", "k", "v", "o"}) {
      add_param(pre + ".w" + m, d, d);
      add_param(pre + ".b" + m, 1, d);
    }
  };
  auto ln = [&](const std::string& pre) {
    add_param(pre + ".g", 1, d);
    add_param(pre + ".b", 1, d);
  };
  auto ffn = [&](const std::string& pre) {
    add_param(pre + ".w1", d, config_.ffn);
    add_param(pre + ".b1", 1, config_.ffn);
    add_param(pre + ".w2", config_.ffn, d);
    add_param(pre + ".b2", 1, d);
  };
  for (int l = 0; l < config_.encoder_layers; ++l) {
    const std::string pre = "enc." + std::to_string(l);
    ln(pre + ".ln1");
    attn(pre + ".self");
    ln(pre + ".ln2");
    ffn(pre + ".ffn");
  }
  if (config_.encoder_layers > 0) ln("enc.ln_f");
  add_param("dec.special", 2, config_.coord_dim);
  add_param("dec.pos", config_.max_positions, d);
  for (int l = 0; l < config_.decoder_layers; ++l) {
    const std::string pre = "dec." + std::to_string(l);
    ln(pre + ".ln1");
    attn(pre + ".self");
    ln(pre + ".ln2");
    attn(pre + ".cross");
    ln(pre + ".ln3");
    ffn(pre + ".ffn");
  }
  ln("dec.ln_f");
  add_param("head.cls.w", d, kNumTokenClasses);
  add_param("head.cls.b", 1, kNumTokenClasses);
  if (config_.mode == DecoderMode::kRegression) {
    add_param("head.coo.w1", d, d);
    add_param("head.coo.b1", 1, d);
    add_param("head.coo.w2", d, d);
    add_param("head.coo.b2", 1, d);
    add_param("head.coo.w3", d, 2);
    add_param("head.coo.b3", 1, 2);
  } else {
    add_param("head.bin_x.w", d, config_.bins_w);
    add_param("head.bin_x.b", 1, config_.bins_w);
    add_param("head.bin_y.w", d, config_.bins_h);
    add_param("head.bin_y.b", 1, config_.bins_h);
  }
  add_param("codebook", config_.bins_h * config_.bins_w, config_.coord_dim);
  initialize(seed);
}

ad::Parameter& Model::add_param(const std::string& name, int rows, int cols) {
  params_.push_back(std::make_unique<ad::Parameter>(name, rows, cols));
  return *params_.back();
}

ad::Parameter& Model::param(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name == name) return *p;
  }
  throw ShapeMismatch("no parameter named '" + name + "'");
}

bool Model::has_param(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const auto& p) { return p->name == name; });
}

void Model::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int grid = config_.grid();
  const int d = config_.width;
  for (auto& pp : params_) {
    ad::Parameter& prm = *pp;
    const std::string& n = prm.name;
    auto ends_with = [&](const std::string& s) { return n.size() >= s.size() && n.compare(n.size() - s.size(), s.size(), s) == 0; };
    if (n == "codebook" || n == "dec.special") {
      std::uniform_real_distribution<double> u(-0.02, 0.02);
      for (double& v : prm.value) v = u(rng);
    } else if (n == "text.embed") {
      std::normal_distribution<double> nd(0.0, 1.0);
      for (double& v : prm.value) v = nd(rng);
    } else if (n == "enc.pos") {
      // 2D sinusoids over the patch grid, 1D over query positions.
      for (int r = 0; r < prm.rows; ++r) {
        std::span<double> row(prm.value.data() + static_cast<std::size_t>(r) * d, d);
        if (r < grid * grid) {
          fill_sinusoid(row, r / grid, 0, d / 2);
          fill_sinusoid(row, r % grid, d / 2, d / 2);
        } else {
          fill_sinusoid(row, r - grid * grid, 0, d);
        }
      }
    } else if (n == "dec.pos") {
      for (int r = 0; r < prm.rows; ++r) {
        fill_sinusoid(std::span<double>(prm.value.data() + static_cast<std::size_t>(r) * d, d), r, 0, d);
      }
    } else if (n == "enc.rel_bias") {
      // zeros
    } else if (prm.rows == 1) {
      if (ends_with(".g")) std::fill(prm.value.begin(), prm.value.end(), 1.0);
    } else {
      const double a = std::sqrt(6.0 / (prm.rows + prm.cols));
      std::uniform_real_distribution<double> u(-a, a);
      for (double& v : prm.value) v = u(rng);
    }
  }
}

void Model::zero_grad() {
  for (auto& p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

std::vector<std::vector<double>> Model::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p->value.begin(), p->value.end());
  return out;
}

void Model::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) throw ShapeMismatch("snapshot parameter count differs");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].size() != params_[i]->value.size()) throw ShapeMismatch("snapshot tensor size differs");
    params_[i]->value.assign(values[i].begin(), values[i].end());
  }
}

Codebook2D Model::codebook() const {
  Codebook2D cb(config_.bins_h, config_.bins_w, config_.coord_dim);
  const auto& src = param("codebook").value;
  std::copy(src.begin(), src.end(), cb.data().begin());
  return cb;
}

Id Model::p(ad::Graph& g, const std::string& name) const { return g.param(param(name)); }

Id Model::attention_block(ad::Graph& g, Id x_norm, Id kv, const std::string& pre, const ad::AttentionSpec& spec,
                          Id* attn_node) const {
  const Id q = g.linear(x_norm, p(g, pre + ".wq"), p(g, pre + ".bq"));
  const Id k = g.linear(kv, p(g, pre + ".wk"), p(g, pre + ".bk"));
  const Id v = g.linear(kv, p(g, pre + ".wv"), p(g, pre + ".bv"));
  const Id a = g.attention(q, k, v, spec);
  if (attn_node != nullptr) *attn_node = a;
  return g.linear(a, p(g, pre + ".wo"), p(g, pre + ".bo"));
}

Id Model::ffn_block(ad::Graph& g, Id x_norm, const std::string& pre) const {
  const Id h = g.gelu(g.linear(x_norm, p(g, pre + ".w1"), p(g, pre + ".b1")));
  return g.linear(h, p(g, pre + ".w2"), p(g, pre + ".b2"));
}

Id Model::build_memory(ad::Graph& g, const RgbImage& image, std::span<const int> query) const {
  const int size = config_.image_size;
  if (image.width != size || image.height != size ||
      image.pixels.size() != static_cast<std::size_t>(size) * size * 3) {
    throw ShapeMismatch("image is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                        ", model expects " + std::to_string(size) + "x" + std::to_string(size));
  }
  if (query.empty() || static_cast<int>(query.size()) > config_.max_query_len) {
    throw ShapeMismatch("query length must be in [1, " + std::to_string(config_.max_query_len) + "]");
  }
  for (int id : query) {
    if (id < 0 || id >= config_.vocab_size) throw ShapeMismatch("query token id out of vocabulary");
  }

  const int grid = config_.grid();
  const int ps = config_.patch;
  const int patch_in = ps * ps * 3;
  std::vector<double> patches(static_cast<std::size_t>(grid) * grid * patch_in);
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      double* dst = patches.data() + (static_cast<std::size_t>(gy) * grid + gx) * patch_in;
      for (int py = 0; py < ps; ++py) {
        for (int px = 0; px < ps; ++px) {
          const std::uint8_t* src = image.at(gy * ps + py, gx * ps + px);
          for (int c = 0; c < 3; ++c) *dst++ = src[c] / 255.0 - 0.5;
        }
      }
    }
  }
  const Id x_patch = g.constant(grid * grid, patch_in, std::move(patches));
  const Id visual = g.gelu(g.linear(x_patch, p(g, "patch.w"), p(g, "patch.b")));
  const Id fv = g.linear(visual, p(g, "proj_v.w"), p(g, "proj_v.b"));
  const Id words = g.gather_rows(p(g, "text.embed"), query);
  const Id fl = g.linear(words, p(g, "proj_l.w"), p(g, "proj_l.b"));
  Id x = g.concat_rows(fv, fl);
  if (config_.encoder_layers == 0) return x;

  std::vector<int> pos = iota_vec(0, grid * grid);
  for (int i = 0; i < static_cast<int>(query.size()); ++i) pos.push_back(grid * grid + i);
  x = g.add_rows(x, p(g, "enc.pos"), pos);
  ad::AttentionSpec spec;
  spec.heads = config_.heads;
  spec.rel_bias = p(g, "enc.rel_bias");
  spec.max_offset = config_.rel_max_offset;
  for (int l = 0; l < config_.encoder_layers; ++l) {
    const std::string pre = "enc." + std::to_string(l);
    Id h = g.layer_norm(x, p(g, pre + ".ln1.g"), p(g, pre + ".ln1.b"));
    x = g.add(x, attention_block(g, h, h, pre + ".self", spec, nullptr));
    h = g.layer_norm(x, p(g, pre + ".ln2.g"), p(g, pre + ".ln2.b"));
    x = g.add(x, ffn_block(g, h, pre + ".ffn"));
  }
  return g.layer_norm(x, p(g, "enc.ln_f.g"), p(g, "enc.ln_f.b"));
}

Id Model::build_prefix_embeddings(ad::Graph& g, const TokenSequence& prefix) const {
  if (prefix.empty() || prefix.front().kind() != TokenKind::kBos) {
    throw MalformedSequence(0, "decoder input must start with BOS");
  }
  if (static_cast<int>(prefix.size()) > config_.max_positions) {
    throw ShapeMismatch("decoder input longer than max_positions");
  }
  const int bw = config_.bins_w;
  const int bh = config_.bins_h;
  std::vector<std::vector<std::pair<int, double>>> cells(prefix.size());
  std::vector<std::vector<std::pair<int, double>>> special(prefix.size());
  for (std::size_t t = 0; t < prefix.size(); ++t) {
    const Token& tok = prefix[t];
    switch (tok.kind()) {
      case TokenKind::kBos:
        if (t != 0) throw MalformedSequence(t, "BOS inside the prefix");
        special[t] = {{0, 1.0}};
        break;
      case TokenKind::kSep:
        special[t] = {{1, 1.0}};
        break;
      case TokenKind::kEos:
        throw MalformedSequence(t, "EOS is never a decoder input");
      case TokenKind::kCoo: {
        double x = tok.coord().x;
        double y = tok.coord().y;
        if (config_.mode == DecoderMode::kClassification) {
          x = dequantize_axis(quantize_axis(x, bw), bw);
          y = dequantize_axis(quantize_axis(y, bh), bh);
        }
        const BilinearStencil s = bilinear_stencil(x, y, bw, bh);
        for (int k = 0; k < 4; ++k) cells[t].emplace_back(s.iy[k] * bw + s.ix[k], s.weight[k]);
        break;
      }
    }
  }
  const Id e = g.add(g.weighted_rows(p(g, "codebook"), std::move(cells)),
                     g.weighted_rows(p(g, "dec.special"), std::move(special)));
  const std::vector<int> pos = iota_vec(0, static_cast<int>(prefix.size()));
  return g.add_rows(e, p(g, "dec.pos"), pos);
}

Model::DecoderNodes Model::build_decoder(ad::Graph& g, Id memory, Id inputs) const {
  if (g.cols(memory) != config_.width || g.cols(inputs) != config_.width) {
    throw ShapeMismatch("decoder inputs must have model width");
  }
  if (g.rows(inputs) < 1) throw ShapeMismatch("decoder needs a non-empty prefix");
  DecoderNodes nodes;
  ad::AttentionSpec self_spec;
  self_spec.heads = config_.heads;
  self_spec.causal = true;
  ad::AttentionSpec cross_spec;
  cross_spec.heads = config_.heads;
  Id x = inputs;
  for (int l = 0; l < config_.decoder_layers; ++l) {
    const std::string pre = "dec." + std::to_string(l);
    Id h = g.layer_norm(x, p(g, pre + ".ln1.g"), p(g, pre + ".ln1.b"));
    x = g.add(x, attention_block(g, h, h, pre + ".self", self_spec, nullptr));
    h = g.layer_norm(x, p(g, pre + ".ln2.g"), p(g, pre + ".ln2.b"));
    Id attn = -1;
    x = g.add(x, attention_block(g, h, memory, pre + ".cross", cross_spec, &attn));
    nodes.cross_attention.push_back(attn);
    h = g.layer_norm(x, p(g, pre + ".ln3.g"), p(g, pre + ".ln3.b"));
    x = g.add(x, ffn_block(g, h, pre + ".ffn"));
  }
  nodes.hidden = g.layer_norm(x, p(g, "dec.ln_f.g"), p(g, "dec.ln_f.b"));
  build_heads(g, nodes);
  return nodes;
}

void Model::build_heads(ad::Graph& g, DecoderNodes& nodes) const {
  const Id q = nodes.hidden;
  nodes.class_logits = g.linear(q, p(g, "head.cls.w"), p(g, "head.cls.b"));
  if (config_.mode == DecoderMode::kRegression) {
    Id h = g.relu(g.linear(q, p(g, "head.coo.w1"), p(g, "head.coo.b1")));
    h = g.relu(g.linear(h, p(g, "head.coo.w2"), p(g, "head.coo.b2")));
    nodes.coords = g.sigmoid(g.linear(h, p(g, "head.coo.w3"), p(g, "head.coo.b3")));
  } else {
    nodes.bin_x = g.linear(q, p(g, "head.bin_x.w"), p(g, "head.bin_x.b"));
    nodes.bin_y = g.linear(q, p(g, "head.bin_y.w"), p(g, "head.bin_y.b"));
  }
}

Matrix Model::encode(const RgbImage& image, std::span<const int> query) const {
  ad::Graph g;
  const Id m = build_memory(g, image, query);
  const auto v = g.value(m);
  return Matrix{g.rows(m), g.cols(m), std::vector<double>(v.begin(), v.end())};
}

Matrix Model::embed_prefix(const TokenSequence& prefix) const {
  (void)validate_prefix(prefix);
  ad::Graph g;
  const Id e = build_prefix_embeddings(g, prefix);
  const auto v = g.value(e);
  return Matrix{g.rows(e), g.cols(e), std::vector<double>(v.begin(), v.end())};
}

std::vector<DecodeStepOutput> Model::decode_positions(const Matrix& memory, const Matrix& prefix) const {
  if (memory.cols != config_.width || prefix.cols != config_.width || memory.rows < 1 || prefix.rows < 1 ||
      memory.data.size() != static_cast<std::size_t>(memory.rows) * memory.cols ||
      prefix.data.size() != static_cast<std::size_t>(prefix.rows) * prefix.cols) {
    throw ShapeMismatch("decoder expects memory and prefix of model width");
  }
  ad::Graph g;
  const Id mem = g.constant(memory.rows, memory.cols, memory.data);
  const Id in = g.constant(prefix.rows, prefix.cols, prefix.data);
  const DecoderNodes nodes = build_decoder(g, mem, in);
  const int n = prefix.rows;
  const int heads = config_.heads;
  std::vector<DecodeStepOutput> out(n);
  const auto logits = g.value(nodes.class_logits);
  for (int t = 0; t < n; ++t) {
    DecodeStepOutput& o = out[t];
    for (int k = 0; k < kNumTokenClasses; ++k) o.class_logits[k] = logits[static_cast<std::size_t>(t) * kNumTokenClasses + k];
    if (config_.mode == DecoderMode::kRegression) {
      const auto c = g.value(nodes.coords);
      o.coord = {c[static_cast<std::size_t>(t) * 2], c[static_cast<std::size_t>(t) * 2 + 1]};
    } else {
      const auto bx = g.value(nodes.bin_x).subspan(static_cast<std::size_t>(t) * config_.bins_w, config_.bins_w);
      const auto by = g.value(nodes.bin_y).subspan(static_cast<std::size_t>(t) * config_.bins_h, config_.bins_h);
      o.bin_logits_x.assign(bx.begin(), bx.end());
      o.bin_logits_y.assign(by.begin(), by.end());
      const int ix = static_cast<int>(std::max_element(bx.begin(), bx.end()) - bx.begin());
      const int iy = static_cast<int>(std::max_element(by.begin(), by.end()) - by.begin());
      o.coord = {dequantize_axis(ix, config_.bins_w), dequantize_axis(iy, config_.bins_h)};
    }
    for (const Id a : nodes.cross_attention) {
      const auto probs = g.attention_probs(a);
      std::vector<std::vector<double>> per_head(heads);
      for (int h = 0; h < heads; ++h) {
        const auto row = probs.subspan((static_cast<std::size_t>(h) * n + t) * memory.rows, memory.rows);
        per_head[h].assign(row.begin(), row.end());
      }
      o.cross_attention.push_back(std::move(per_head));
    }
  }
  return out;
}

DecodeStepOutput Model::decode_step(const Matrix& memory, const Matrix& prefix) const {
  auto all = decode_positions(memory, prefix);
  return std::move(all.back());
}

SequencePredictions Model::collect_predictions(const ad::Graph& g, const DecoderNodes& nodes) const {
  SequencePredictions pred;
  pred.mode = config_.mode;
  pred.positions = g.rows(nodes.class_logits);
  const auto cl = g.value(nodes.class_logits);
  pred.class_logits.assign(cl.begin(), cl.end());
  if (config_.mode == DecoderMode::kRegression) {
    const auto c = g.value(nodes.coords);
    pred.coords.assign(c.begin(), c.end());
  } else {
    pred.bins_w = config_.bins_w;
    pred.bins_h = config_.bins_h;
    const auto bx = g.value(nodes.bin_x);
    const auto by = g.value(nodes.bin_y);
    pred.bin_logits_x.assign(bx.begin(), bx.end());
    pred.bin_logits_y.assign(by.begin(), by.end());
  }
  return pred;
}

namespace {

TokenSequence drop_last(const TokenSequence& targets) {
  if (targets.size() < 2) throw AlignmentError("target sequence needs at least two tokens");
  return TokenSequence(targets.begin(), targets.end() - 1);
}

}  // namespace

SequencePredictions Model::predict_sequence(const RgbImage& image, std::span<const int> query,
                                            const TokenSequence& targets) const {
  ad::Graph g;
  const Id mem = build_memory(g, image, query);
  const Id in = build_prefix_embeddings(g, drop_last(targets));
  const DecoderNodes nodes = build_decoder(g, mem, in);
  return collect_predictions(g, nodes);
}

LossBreakdown Model::loss(const RgbImage& image, std::span<const int> query, const TokenSequence& targets,
                          const LossWeights& weights) const {
  return sequence_loss(predict_sequence(image, query, targets), targets, weights);
}

LossBreakdown Model::accumulate_gradients(const RgbImage& image, std::span<const int> query,
                                          const TokenSequence& targets, const LossWeights& weights,
                                          double scale) {
  ad::Graph g;
  const Id mem = build_memory(g, image, query);
  const Id in = build_prefix_embeddings(g, drop_last(targets));
  const DecoderNodes nodes = build_decoder(g, mem, in);
  const SequencePredictions pred = collect_predictions(g, nodes);
  LossGradients lg;
  LossBreakdown breakdown = sequence_loss(pred, targets, weights, &lg);
  if (!std::isfinite(breakdown.total)) throw NumericalFailure("non-finite training loss");

  std::vector<Id> inputs{nodes.class_logits};
  if (config_.mode == DecoderMode::kRegression) {
    inputs.push_back(nodes.coords);
  } else {
    inputs.push_back(nodes.bin_x);
    inputs.push_back(nodes.bin_y);
  }
  const bool regression = config_.mode == DecoderMode::kRegression;
  const Id root = g.custom(1, 1, ad::Buffer{breakdown.total}, inputs,
                           [&nodes, &lg, regression](ad::Graph& gr, Id self) {
                             const double s = gr.grad(self)[0];
                             auto acc = [&](Id id, const std::vector<double>& src) {
                               auto dst = gr.grad(id);
                               for (std::size_t i = 0; i < src.size(); ++i) dst[i] += s * src[i];
                             };
                             acc(nodes.class_logits, lg.class_logits);
                             if (regression) {
                               acc(nodes.coords, lg.coords);
                             } else {
                               acc(nodes.bin_x, lg.bin_logits_x);
                               acc(nodes.bin_y, lg.bin_logits_y);
                             }
                           });
  g.backward(root, scale);
  return breakdown;
}

AdamW::AdamW(const Model& model, Options options) : opt_(options) {
  for (const auto& p : model.parameters()) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void AdamW::step(Model& model, double lr) {
  const auto params = model.parameters();
  if (params.size() != m_.size()) throw ShapeMismatch("optimizer state does not match model");
  for (const auto& p : params) {
    for (double gv : p->grad) {
      if (!std::isfinite(gv)) throw NumericalFailure("non-finite gradient in " + p->name);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Parameter& prm = *params[i];
    // No decay on biases, norms, positional tables or the special tokens.
    const bool decay = prm.rows > 1 && prm.name.find("pos") == std::string::npos &&
                       prm.name != "enc.rel_bias" && prm.name != "dec.special";
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < prm.value.size(); ++j) {
      const double gj = prm.grad[j];
      m[j] = opt_.beta1 * m[j] + (1.0 - opt_.beta1) * gj;
      v[j] = opt_.beta2 * v[j] + (1.0 - opt_.beta2) * gj * gj;
      const double update = (m[j] / bc1) / (std::sqrt(v[j] / bc2) + opt_.eps);
      if (decay) prm.value[j] -= lr * opt_.weight_decay * prm.value[j];
      prm.value[j] -= lr * update;
    }
  }
}

double polynomial_lr(double base_lr, long step, long total_steps, long warmup_steps, double power) {
  if (warmup_steps > 0 && step < warmup_steps) return base_lr * static_cast<double>(step + 1) / warmup_steps;
  if (total_steps <= warmup_steps) return base_lr;
  const double progress = std::clamp(static_cast<double>(step - warmup_steps) / (total_steps - warmup_steps), 0.0, 1.0);
  return base_lr * std::pow(1.0 - progress, power);
}

}  // namespace polyseq
