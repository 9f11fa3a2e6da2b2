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

// Structural adapter placed after the last LM layer.
//
//   h  = seq + Wo MHA(Q = LN_a(seq), K = V = struct) + bo     (rotary on Q, K)
//   h' = h + W_up gelu(W_down LN_b(h) + b_down) + b_up       (bottleneck d/2)
//   design logits = h' Wd + bd over the 20 amino acids
//
// With zero-initialised Wo, bo, W_up, b_up both residual branches vanish and
// h' == seq exactly.

#include <cstddef>
#include <span>

#include "seqdesign/autodiff.hpp"
#include "seqdesign/params.hpp"
#include "seqdesign/rng.hpp"

namespace seqdesign {

struct AdapterConfig {
  std::size_t n_heads = 4;
  bool zero_init_output = true;
  double rotary_base = 10000.0;

  void validate(std::size_t d_model) const;
};

/// Parameters under "ad."; d_model is the LM width, d_struct the encoder width.
void add_adapter_params(ParamStore& ps, const AdapterConfig& cfg, std::size_t d_model, std::size_t d_struct,
                        CounterRng& rng);

/// Closed-form count: LN_a, LN_b (2d each), Wq, Wo (d*d + d), Wk, Wv
/// (d_struct*d + d), W_down (d*d/2 + d/2), W_up (d/2*d + d), head (20d + 20).
std::size_t adapter_param_count(std::size_t d_model, std::size_t d_struct);

struct FusedStates {
  ad::Var states;  // L x d_model
  ad::Var logits;  // L x 20
};

/// seq: L x d_model; structure: L x d_struct. `struct_valid[j] == 0` removes
/// row j as an attention key (padding). Throws std::invalid_argument naming
/// both lengths when they differ.
FusedStates adapt(ad::Tape& t, ParamStore& ps, const AdapterConfig& cfg, ad::Var seq, ad::Var structure,
                  std::span<const double> positions, std::span<const std::uint8_t> struct_valid);

}  // namespace seqdesign
