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

#include "polyseq/seqcodec.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "polyseq/errors.hpp"

namespace polyseq {
namespace {

constexpr std::size_t kMinPolygonRun = 3;

void check_coord(const Point& p, std::size_t index) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.x > 1.0 || p.y < 0.0 ||
      p.y > 1.0) {
    throw MalformedSequence(index, "coordinate outside [0,1]");
  }
}

}  // namespace

int class_index(TokenKind kind) {
  switch (kind) {
    case TokenKind::kCoo: return 0;
    case TokenKind::kSep: return 1;
    case TokenKind::kEos: return 2;
    case TokenKind::kBos: break;
  }
  throw OutOfRange("BOS has no class-head index");
}

TokenKind kind_from_class(int index) {
  switch (index) {
    case 0: return TokenKind::kCoo;
    case 1: return TokenKind::kSep;
    case 2: return TokenKind::kEos;
    default: throw OutOfRange("class index " + std::to_string(index));
  }
}

std::string_view kind_name(TokenKind kind) {
  switch (kind) {
    case TokenKind::kBos: return "BOS";
    case TokenKind::kEos: return "EOS";
    case TokenKind::kSep: return "SEP";
    case TokenKind::kCoo: return "COO";
  }
  return "?";
}

TokenSequence encode_target(const Box& box, const MultiPolygon& mp) {
  if (!is_valid_box(box)) throw OutOfRange("invalid target box");
  if (mp.polygons.empty()) throw DegeneratePolygon("target has no polygons");
  MultiPolygon ordered = mp;
  for (const Polygon& p : ordered.polygons) {
    if (p.vertices.size() < kMinPolygonRun) throw DegeneratePolygon("polygon with < 3 vertices");
  }
  sort_polygons(ordered);

  TokenSequence ts;
  ts.push_back(Token::bos());
  ts.push_back(Token::coo(box.x1, box.y1));
  ts.push_back(Token::coo(box.x2, box.y2));
  for (std::size_t i = 0; i < ordered.polygons.size(); ++i) {
    if (i > 0) ts.push_back(Token::sep());
    for (const Point& v : ordered.polygons[i].vertices) {
      if (!std::isfinite(v.x) || !std::isfinite(v.y) || v.x < 0.0 || v.x > 1.0 || v.y < 0.0 ||
          v.y > 1.0) {
        throw OutOfRange("polygon vertex outside [0,1]");
      }
      ts.push_back(Token::coo(v));
    }
  }
  ts.push_back(Token::eos());
  return ts;
}

DecodedTarget decode_sequence(const TokenSequence& ts) {
  if (ts.empty() || ts.front().kind() != TokenKind::kBos) throw MalformedSequence(0, "missing BOS");
  for (std::size_t i = 1; i < 3; ++i) {
    if (i >= ts.size() || !ts[i].is_coo()) throw MalformedSequence(i, "missing box corner");
    check_coord(ts[i].coord(), i);
  }

  DecodedTarget out;
  const Point a = ts[1].coord();
  const Point b = ts[2].coord();
  out.box = Box{std::min(a.x, b.x), std::min(a.y, b.y), std::max(a.x, b.x), std::max(a.y, b.y)};
  if (a.x > b.x || a.y > b.y) {
    out.box_reordered = true;
    // Once per process; callers that care read box_reordered.
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) {
      std::clog << "polyseq: warning: box corners out of order, sorted componentwise (further warnings suppressed)\n";
    }
  }

  Polygon current;
  bool closed = false;
  for (std::size_t i = 3; i < ts.size(); ++i) {
    const Token& t = ts[i];
    switch (t.kind()) {
      case TokenKind::kBos:
        throw MalformedSequence(i, "unexpected BOS");
      case TokenKind::kCoo:
        check_coord(t.coord(), i);
        current.vertices.push_back(t.coord());
        break;
      case TokenKind::kSep:
      case TokenKind::kEos:
        if (current.vertices.size() < kMinPolygonRun) {
          throw MalformedSequence(i, "polygon run of length " +
                                         std::to_string(current.vertices.size()) + " before " +
                                         std::string(kind_name(t.kind())));
        }
        out.polygons.polygons.push_back(std::move(current));
        current = Polygon{};
        if (t.kind() == TokenKind::kEos) {
          if (i + 1 != ts.size()) throw MalformedSequence(i + 1, "tokens after EOS");
          closed = true;
        }
        break;
    }
  }
  if (!closed) throw MalformedSequence(ts.size(), "missing EOS");
  return out;
}

std::set<TokenKind> validate_prefix(const TokenSequence& partial) {
  if (partial.empty() || partial.front().kind() != TokenKind::kBos) {
    throw MalformedSequence(0, "prefix must start with BOS");
  }
  std::size_t run = 0;
  for (std::size_t i = 1; i < partial.size(); ++i) {
    const Token& t = partial[i];
    if (t.kind() == TokenKind::kBos) throw MalformedSequence(i, "unexpected BOS");
    if (t.kind() == TokenKind::kEos) throw MalformedSequence(i, "prefix already terminated");
    if (i <= 2) {
      if (!t.is_coo()) throw MalformedSequence(i, "box corner must be a coordinate");
      continue;
    }
    if (t.is_coo()) {
      ++run;
    } else {
      if (run < kMinPolygonRun) throw MalformedSequence(i, "SEP after a polygon run shorter than 3");
      run = 0;
    }
  }
  if (partial.size() < 3 || run < kMinPolygonRun) return {TokenKind::kCoo};
  return {TokenKind::kCoo, TokenKind::kSep, TokenKind::kEos};
}

std::string dump_tokens(const TokenSequence& ts) {
  std::string out;
  char buf[96];
  for (const Token& t : ts) {
    if (t.is_coo()) {
      std::snprintf(buf, sizeof(buf), "COO %.6f %.6f\n", t.coord().x, t.coord().y);
      out += buf;
    } else {
      out += kind_name(t.kind());
      out += '\n';
    }
  }
  return out;
}

TokenSequence parse_token_dump(std::string_view text) {
  TokenSequence ts;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string kind;
    fields >> kind;
    if (kind == "BOS") {
      ts.push_back(Token::bos());
    } else if (kind == "EOS") {
      ts.push_back(Token::eos());
    } else if (kind == "SEP") {
      ts.push_back(Token::sep());
    } else if (kind == "COO") {
      double x = 0.0;
      double y = 0.0;
      if (!(fields >> x >> y)) throw ParseError(line_no, "COO line needs two numbers");
      ts.push_back(Token::coo(x, y));
    } else {
      throw ParseError(line_no, "unknown token '" + kind + "'");
    }
  }
  return ts;
}

}  // namespace polyseq
