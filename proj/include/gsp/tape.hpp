// Copyright 2026 The gsp Authors. All Rights Reserved.
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

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gsp/error.hpp"
#include "gsp/tensor.hpp"

namespace gsp {

/// Records differentiable operations in execution order and replays their
/// backward rules in reverse.
///
/// A tape is single-writer. Its address identifies it, so it is neither
/// copyable nor movable. A tape constructed with `recording = false` executes
/// operations without keeping any graph (inference mode).
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  /// Whether an op over `inputs` must be recorded.
  bool should_record(std::initializer_list<const Tensor<T>*> inputs) const {
    if (!recording_) return false;
    for (const auto* t : inputs) {
      if (t != nullptr && t->defined() && t->requires_grad()) return true;
    }
    return false;
  }

  /// Appends a node. `backward` reads output.grad() and accumulates into the
  /// grad slots of whichever inputs require gradients.
  void record(std::vector<Tensor<T>> inputs, Tensor<T> output, BackwardFn backward) {
#ifndef NDEBUG
    for (T v : output.data()) {
      if (!std::isfinite(static_cast<double>(v))) {
        bool inputs_finite = true;
        for (const auto& in : inputs) {
          for (T u : in.data()) inputs_finite = inputs_finite && std::isfinite(static_cast<double>(u));
        }
        if (inputs_finite) throw ContractError("non-finite value produced from finite inputs");
        break;
      }
    }
#endif
    output.impl_->requires_grad = true;
    output.impl_->producer = this;
    output.impl_->node = nodes_.size();
    nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(backward)});
  }

  /// Fills grad slots with d(loss)/d(tensor). Leaf gradients accumulate
  /// across calls; intermediate gradients are reset on every call.
  void backward(const Tensor<T>& loss) {
    if (!loss.defined() || loss.numel() != 1) {
      throw ContractError("backward requires a scalar loss, got shape " +
                          (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
    }
    if (loss.impl_->producer != this || loss.impl_->node >= nodes_.size() ||
        !nodes_[loss.impl_->node].output.same(loss)) {
      throw ContractError("loss tensor was not recorded on this tape");
    }
    for (auto& node : nodes_) node.output.impl_->grad.clear();
    Tensor<T> seed = loss;
    seed.grad_mut()[0] = T(1);
    for (std::size_t i = loss.impl_->node + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.output.has_grad()) continue;  // not reachable from loss
      node.backward();
    }
  }

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    BackwardFn backward;
  };

  bool recording_;
  std::vector<Node> nodes_;
};

/// Zeroes every gradient slot.
template <typename T>
void zero_grads(std::span<Tensor<T>> params) {
  for (auto& p : params) p.zero_grad();
}

template <typename T>
void zero_grads(std::vector<Tensor<T>>& params) {
  zero_grads(std::span<Tensor<T>>(params));
}

/// Fingerprint of every piecewise branch taken during a forward pass (relu
/// masks, norm clamps). Finite-difference checks compare fingerprints to
/// detect a perturbation that crossed a kink. Inactive unless a
/// BranchRecorder::Scope is alive on the current thread.
class BranchRecorder {
 public:
  class Scope {
   public:
    Scope() : prev_active_(active_), prev_hash_(hash_) {
      active_ = true;
      hash_ = kOffset;
    }
    ~Scope() {
      active_ = prev_active_;
      hash_ = prev_hash_;
    }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

    std::uint64_t fingerprint() const { return hash_; }
    void reset() { hash_ = kOffset; }

   private:
    bool prev_active_;
    std::uint64_t prev_hash_;
  };

  static bool active() { return active_; }

  static void note(bool branch) {
    hash_ ^= branch ? 0x9dU : 0x3bU;
    hash_ *= kPrime;
  }

 private:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;
  static inline thread_local bool active_ = false;
  static inline thread_local std::uint64_t hash_ = kOffset;
};

}  // namespace gsp
