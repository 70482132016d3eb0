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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace polyseq {

// All library failures derive from Error; kind() is a stable identifier used
// by the CLI for its machine-parsable error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define POLYSEQ_DEFINE_ERROR(Name)                                    \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(#Name, what) {}    \
  };

POLYSEQ_DEFINE_ERROR(DegeneratePolygon)
POLYSEQ_DEFINE_ERROR(DimensionMismatch)
POLYSEQ_DEFINE_ERROR(EmptyEvaluation)
POLYSEQ_DEFINE_ERROR(OutOfRange)
POLYSEQ_DEFINE_ERROR(ShapeMismatch)
POLYSEQ_DEFINE_ERROR(AlignmentError)
POLYSEQ_DEFINE_ERROR(NumericalFailure)
POLYSEQ_DEFINE_ERROR(ConfigError)
POLYSEQ_DEFINE_ERROR(IoError)

#undef POLYSEQ_DEFINE_ERROR

class MalformedSequence : public Error {
 public:
  MalformedSequence(std::size_t position, const std::string& reason)
      : Error("MalformedSequence",
              "malformed sequence at index " + std::to_string(position) + ": " + reason),
        position_(position),
        reason_(reason) {}
  std::size_t position() const noexcept { return position_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t position_;
  std::string reason_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error("ParseError", "line " + std::to_string(line) + ": " + reason),
        line_(line),
        reason_(reason) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

}  // namespace polyseq
