// Copyright 2026 The GlitchQA Authors. All Rights Reserved.
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
#include <functional>
#include <new>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "glitchqa/common.hpp"

namespace glitchqa {

using Shape = std::vector<int>;

/// 64-byte aligned storage. Vectorized kernels peel loops by pointer
/// alignment, so a fixed base alignment keeps results independent of heap state.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
}

std::string shape_string(const Shape& s);

/// Dense row-major tensor.
template <typename T>
struct Tensor {
  Shape shape;
  AlignedVector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T{0}) : shape(std::move(s)), data(shape_numel(shape), fill) {}
  Tensor(Shape s, const std::vector<T>& values)
      : shape(std::move(s)), data(values.begin(), values.end()) {
    if (data.size() != shape_numel(shape)) throw ShapeError("tensor data/shape size mismatch");
  }

  std::size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Ordered name -> tensor map. Insertion order is the canonical parameter
/// order (checkpoint layout, optimizer state).
template <typename T>
class NamedTensors {
 public:
  void add(const std::string& name, Tensor<T> t) {
    if (index_.count(name)) throw ParameterError("duplicate tensor name '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.emplace_back(name, std::move(t));
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor<T>& at(const std::string& name) { return entries_[lookup(name)].second; }
  const Tensor<T>& at(const std::string& name) const { return entries_[lookup(name)].second; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second.size();
    return n;
  }

  template <typename U>
  NamedTensors<U> cast() const {
    NamedTensors<U> out;
    for (const auto& [name, t] : entries_) out.add(name, t.template cast<U>());
    return out;
  }

  friend bool operator==(const NamedTensors& a, const NamedTensors& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ResolutionError("no tensor named '" + name + "'");
    return it->second;
  }
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Normalization running statistics live alongside trainable tensors but are
/// never touched by the optimizer.
bool is_buffer_name(const std::string& name);

template <typename T>
using Parameters = NamedTensors<T>;

/// Running statistics for a normalization layer. Evaluation reads `mean`/`var`;
/// training writes momentum updates through the `update_*` pointers when set.
template <typename T>
struct NormStats {
  const Tensor<T>* mean = nullptr;
  const Tensor<T>* var = nullptr;
  Tensor<T>* update_mean = nullptr;
  Tensor<T>* update_var = nullptr;
};

/// Reverse-mode autodiff tape over NCHW tensors. Each op appends a node and,
/// when gradients are recorded, a backward closure. Parameter leaves hold a
/// pointer to caller-owned storage that must outlive the tape.
template <typename T>
class Tape {
 public:
  using Id = int;

  explicit Tape(bool record_gradients) : record_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Id input(Tensor<T> value);
  Id parameter(const Tensor<T>& value);

  const Tensor<T>& value(Id id) const;
  const Tensor<T>& grad(Id id) const;
  bool has_grad(Id id) const;

  Id conv2d(Id x, Id weight, int stride, int pad, int groups);
  Id batch_norm(Id x, Id gamma, Id beta, const NormStats<T>& stats, bool training,
                double momentum = 0.1, double eps = 1e-5);
  Id relu(Id x);
  Id max_pool(Id x, int kernel, int stride, int pad);
  Id add(Id a, Id b);
  Id slice_channels(Id x, int begin, int end);
  Id concat_channels(Id a, Id b);
  Id channel_shuffle(Id x, int groups);
  Id global_avg_pool(Id x);
  Id linear(Id x, Id weight, Id bias);

  /// Seeds d(out) with `seed` and runs all recorded closures in reverse.
  void backward(Id out, const Tensor<T>& seed);

  /// Multiply-accumulates executed by conv2d and linear so far.
  std::uint64_t macs() const { return macs_; }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* ref = nullptr;
    Tensor<T> grad;
    bool needs_grad = false;
  };
  Id push(Tensor<T> value, bool needs_grad);
  Tensor<T>& grad_buffer(Id id);
  const Tensor<T>& val(Id id) const { return nodes_[id].ref ? *nodes_[id].ref : nodes_[id].owned; }
  bool needs(Id id) const { return record_ && nodes_[id].needs_grad; }

  bool record_;
  std::vector<Node> nodes_;
  std::vector<std::function<void()>> backward_ops_;
  std::uint64_t macs_ = 0;
};

/// Standalone channel shuffle on an N x C x H x W tensor: channel i of group j
/// moves to position i * groups + j.
template <typename T>
Tensor<T> channel_shuffle(const Tensor<T>& x, int groups);

/// Row-wise softmax of an N x C tensor, computed in double.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits);

}  // namespace glitchqa
