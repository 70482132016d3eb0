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

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "polyseq/geometry.hpp"

namespace polyseq {

enum class TokenKind { kBos, kEos, kSep, kCoo };

// Class-head ordering used by the model: index 0 = COO, 1 = SEP, 2 = EOS.
inline constexpr int kNumTokenClasses = 3;
int class_index(TokenKind kind);
TokenKind kind_from_class(int index);
std::string_view kind_name(TokenKind kind);

class Token {
 public:
  static Token bos() { return Token(TokenKind::kBos, std::nullopt); }
  static Token eos() { return Token(TokenKind::kEos, std::nullopt); }
  static Token sep() { return Token(TokenKind::kSep, std::nullopt); }
  static Token coo(double x, double y) { return Token(TokenKind::kCoo, Point{x, y}); }
  static Token coo(const Point& p) { return coo(p.x, p.y); }

  TokenKind kind() const noexcept { return kind_; }
  bool is_coo() const noexcept { return kind_ == TokenKind::kCoo; }
  // Only valid for COO tokens.
  const Point& coord() const { return *coord_; }

  friend bool operator==(const Token&, const Token&) = default;

 private:
  Token(TokenKind kind, std::optional<Point> coord) : kind_(kind), coord_(coord) {}
  TokenKind kind_;
  std::optional<Point> coord_;
};

using TokenSequence = std::vector<Token>;

// [BOS, box TL, box BR, polygon 1 ..., SEP, polygon 2 ..., EOS]. Polygons are
// reordered by their start vertex; vertex order inside a polygon is kept.
TokenSequence encode_target(const Box& box, const MultiPolygon& mp);

struct DecodedTarget {
  Box box;
  MultiPolygon polygons;
  // Set when the box corners had to be sorted componentwise.
  bool box_reordered = false;
};

// Structural parse; throws MalformedSequence with the offending index.
DecodedTarget decode_sequence(const TokenSequence& ts);

// Token kinds that keep a BOS-started, EOS-free prefix completable.
std::set<TokenKind> validate_prefix(const TokenSequence& partial);

// Debug text format, one token per line: BOS | EOS | SEP | COO x y (6 decimals).
std::string dump_tokens(const TokenSequence& ts);
// Throws ParseError with the 1-based line number.
TokenSequence parse_token_dump(std::string_view text);

}  // namespace polyseq
