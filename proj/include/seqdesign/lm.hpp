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

// Bidirectional masked language model over amino-acid tokens.
//
// Pre-norm transformer: x = embed(tokens); per layer
//   x += Wo Attn(LN(x)) with rotary queries/keys;  x += FFN(LN(x));
// hidden = LN_f(x); logits = hidden Wh + bh over the full vocabulary.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "seqdesign/autodiff.hpp"
#include "seqdesign/params.hpp"
#include "seqdesign/rng.hpp"

namespace seqdesign {

struct LMConfig {
  std::size_t d_model = 256;
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  /// 0 means 4 * d_model.
  std::size_t ffn_dim = 0;
  double dropout = 0.0;
  double rotary_base = 10000.0;

  std::size_t ffn_width() const { return ffn_dim ? ffn_dim : 4 * d_model; }
  void validate() const;
};

/// Parameters under "lm.".
void add_lm_params(ParamStore& ps, const LMConfig& cfg, CounterRng& rng);
std::size_t lm_param_count(const LMConfig& cfg);

struct LMStates {
  ad::Var hidden;  // L x d_model
  ad::Var logits;  // L x vocab
};

/// PAD tokens are excluded as attention keys. `positions` defaults to 0..L-1.
/// Throws std::out_of_range naming the position of an out-of-vocabulary token.
LMStates mlm_forward(ad::Tape& t, ParamStore& ps, const LMConfig& cfg, std::span<const int> tokens,
                     std::span<const double> positions = {}, CounterRng* dropout_rng = nullptr);

/// Row-wise softmax over all columns.
Matrix softmax_rows(const Matrix& logits);

}  // namespace seqdesign
