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

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "polyseq/errors.hpp"
#include "polyseq/model.hpp"

namespace polyseq {
namespace {

constexpr char kMagic[8] = {'P', 'S', 'E', 'Q', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IoError("checkpoint truncated");
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const std::string& run_config_echo) {
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_str(out, model.config().to_text());
  put_str(out, run_config_echo);
  put_u32(out, static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) {
    put_str(out, p->name);
    put_u32(out, static_cast<std::uint32_t>(p->rows));
    put_u32(out, static_cast<std::uint32_t>(p->cols));
    for (double v : p->value) put_f64(out, v);
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path);
  Reader r(std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>()));
  if (r.raw(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) throw IoError("not a polyseq checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const ModelConfig config = ModelConfig::from_text(r.str());
  LoadedCheckpoint out;
  out.run_config_echo = r.str();
  out.model = std::make_unique<Model>(config, 0);
  const std::uint32_t count = r.u32();
  if (count != out.model->parameters().size()) throw IoError("checkpoint tensor count does not match config");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    ad::Parameter& p = out.model->param(name);
    if (static_cast<int>(rows) != p.rows || static_cast<int>(cols) != p.cols) {
      throw IoError("tensor '" + name + "' has unexpected shape");
    }
    for (double& v : p.value) v = r.f64();
  }
  if (!r.done()) throw IoError("trailing bytes in checkpoint");
  return out;
}

}  // namespace polyseq
