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

#include <cstdint>
#include <functional>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace polyseq::ad {

// 64-byte aligned storage, so vectorized reductions group terms the same way
// whatever the heap layout.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

// A named, row-major learnable matrix with its gradient accumulator.
struct Parameter {
  std::string name;
  int rows = 0;
  int cols = 0;
  Buffer value;
  Buffer grad;

  Parameter() = default;
  Parameter(std::string n, int r, int c)
      : name(std::move(n)), rows(r), cols(c), value(static_cast<std::size_t>(r) * c, 0.0),
        grad(static_cast<std::size_t>(r) * c, 0.0) {}
  std::size_t size() const noexcept { return value.size(); }
};

struct AttentionSpec {
  int heads = 1;
  bool causal = false;
  // Optional [heads x (2*max_offset+1)] table added to logits by clamped
  // relative offset (key index - query index).
  int rel_bias = -1;
  int max_offset = 0;
};

// Reverse-mode tape over row-major 2D tensors. Nodes are appended in
// topological order; backward() walks them in reverse. Parameter leaves read
// the parameter storage directly and accumulate into Parameter::grad.
class Graph {
 public:
  using Id = int;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  int rows(Id id) const { return nodes_[id].rows; }
  int cols(Id id) const { return nodes_[id].cols; }
  std::span<const double> value(Id id) const;
  std::span<double> grad(Id id);
  bool requires_grad(Id id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Id constant(int rows, int cols, Buffer value);
  Id constant(int rows, int cols, const std::vector<double>& value) {
    return constant(rows, cols, Buffer(value.begin(), value.end()));
  }
  Id param(Parameter& p);

  Id matmul(Id a, Id b);
  // x * w + b, with b a 1 x out row broadcast over rows.
  Id linear(Id x, Id w, Id b);
  Id add(Id a, Id b);
  // x + table[rows[i]] for every row i.
  Id add_rows(Id x, Id table, std::span<const int> rows);
  Id gather_rows(Id table, std::span<const int> rows);
  Id concat_rows(Id a, Id b);
  Id slice_rows(Id x, int begin, int count);
  Id gelu(Id x);
  Id relu(Id x);
  Id sigmoid(Id x);
  Id layer_norm(Id x, Id gamma, Id beta, double eps = 1e-5);
  Id attention(Id q, Id k, Id v, const AttentionSpec& spec);
  // Attention probabilities [heads][q_rows][k_rows] of an attention node.
  std::span<const double> attention_probs(Id id) const { return nodes_[id].aux; }

  // Weighted bilinear lookups into a (bins_h*bins_w) x dim table; rows with
  // weight_sets[i] empty are zero. Each entry is (cell row, weight).
  Id weighted_rows(Id table, std::vector<std::vector<std::pair<int, double>>> weight_sets);

  // Generic node: value given, backward receives the graph and this node id.
  Id custom(int rows, int cols, Buffer value, std::vector<Id> inputs, std::function<void(Graph&, Id)> backward);
  Id custom(int rows, int cols, const std::vector<double>& value, std::vector<Id> inputs,
            std::function<void(Graph&, Id)> backward) {
    return custom(rows, cols, Buffer(value.begin(), value.end()), std::move(inputs), std::move(backward));
  }

  // Seeds d(root)/d(root) = seed for a 1x1 root and propagates.
  void backward(Id root, double seed = 1.0);

 private:
  struct Node {
    int rows = 0;
    int cols = 0;
    Buffer storage;
    const double* external = nullptr;
    Parameter* param = nullptr;
    Buffer grad_storage;
    Buffer aux;
    bool requires_grad = false;
    std::function<void(Graph&, Id)> backward;
  };

  Id push(Node node);
  Node& node(Id id) { return nodes_[id]; }
  bool any_requires(std::initializer_list<Id> ids) const;

  std::vector<Node> nodes_;
};

}  // namespace polyseq::ad
