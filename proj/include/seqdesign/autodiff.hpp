// Copyright 2026 The seqdesign Authors. All Rights Reserved.
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

// Minimal tape-based reverse-mode differentiation over row-major matrices.
//
// A Tape records one forward pass. Nodes that do not depend on any trainable
// input carry no gradient and their backward closures are skipped, so a
// frozen sub-network costs a forward pass only.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "seqdesign/params.hpp"
#include "seqdesign/tensor.hpp"

namespace seqdesign::ad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr && id_ >= 0; }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf with its own gradient buffer, read back with grad().
  Var leaf(Matrix value, bool requires_grad = true);
  /// Leaf aliasing a parameter. On backward() its gradient is added into
  /// param.grad when the parameter is trainable.
  Var param(Param& p);

  const Matrix& value(const Var& v) const;
  bool requires_grad(const Var& v) const;
  /// Gradient of a node after backward(); zero matrix if none flowed.
  const Matrix& grad(const Var& v);

  /// Reverse sweep from a 1x1 node with seed d(loss) = seed.
  void backward(const Var& loss, double seed = 1.0);

  std::size_t size() const { return nodes_.size(); }

  /// With gradients disabled, param() leaves are constants and no backward
  /// closures are recorded (inference mode).
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  bool grad_enabled() const { return grad_enabled_; }

  // Op-author interface.
  using BackwardFn = std::function<void(Tape&, const Matrix& dout)>;
  Var record(Matrix value, bool requires_grad, BackwardFn fn);
  Matrix& grad_buffer(int id);
  bool has_grad(int id) const { return nodes_[id]->grad_live; }
  bool needs(const Var& v) const { return v.valid() && nodes_[v.id()]->requires_grad; }

 private:
  struct Node {
    Matrix owned;
    const Matrix* external = nullptr;
    Matrix grad;
    bool requires_grad = false;
    bool grad_live = false;
    Param* param = nullptr;
    BackwardFn backward;
    const Matrix& value() const { return external ? *external : owned; }
  };
  std::vector<std::unique_ptr<Node>> nodes_;
  bool grad_enabled_ = true;
};

// ---------------------------------------------------------------------------
// Ops. All shapes are checked; a mismatch throws std::invalid_argument.

Var matmul(Var x, Var w);
/// x * w + b, with b a 1 x m row broadcast over rows.
Var linear(Var x, Var w, Var b);
Var add(Var a, Var b);
Var scale(Var x, double s);
Var gelu(Var x);
/// Row-wise layer normalization with affine gamma/beta (1 x d each).
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
/// out.row(i) = x.row(idx[i]), or a zero row for idx[i] == -1; gradients
/// scatter-add back.
Var gather_rows(Var x, std::span<const int> idx);
/// out.row(i) = mean of x rows [offsets[i], offsets[i+1]); zero row if empty.
Var segment_mean(Var x, std::span<const std::size_t> offsets);
/// out.row(i) = x.row(i) * w[i].
Var scale_rows(Var x, std::span<const double> w);
/// Element-wise product with a constant (row-major) mask; used for dropout.
Var mul_mask(Var x, std::span<const double> mask);

struct AttentionSpec {
  std::size_t n_heads = 1;
  bool rotary = true;
  double rotary_base = 10000.0;
};

/// Multi-head scaled dot-product attention. q: nq x D, k/v: nk x D.
/// Rotary embedding (rotate-half convention) is applied per head to queries
/// and keys at the given positions. Keys with key_valid[j] == false receive
/// exactly zero weight.
Var attention(Var q, Var k, Var v, const AttentionSpec& spec, std::span<const double> q_pos,
              std::span<const double> k_pos, std::span<const std::uint8_t> key_valid);

/// Sum over rows with targets[i] >= 0 of -log softmax(logits.row(i)[0:n_classes])[targets[i]],
/// divided by normalizer. Columns >= n_classes get zero gradient.
Var cross_entropy(Var logits, std::span<const int> targets, std::size_t n_classes,
                  double normalizer);

/// Sum of two scalars (1x1).
Var add_scalars(Var a, Var b);

// Shared numerics, exposed for reference implementations in tests.
double gelu_value(double x);
double gelu_derivative(double x);
/// Rotates each head of `x` (rows x n_heads*head_dim) in place by angle
/// sign * pos[i] * base^(-2m/head_dim) for pair (m, m + head_dim/2).
void apply_rotary(Matrix& x, std::size_t n_heads, std::span<const double> pos, double base,
                  double sign = 1.0);

}  // namespace seqdesign::ad
