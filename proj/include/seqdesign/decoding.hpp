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

// Iterative-refinement sequence design.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seqdesign/model.hpp"
#include "seqdesign/params.hpp"
#include "seqdesign/rng.hpp"
#include "seqdesign/structure.hpp"

namespace seqdesign {

enum class InitMode { kProposal, kFullMask };
enum class Strategy { kArgmax, kSample };
InitMode init_mode_from_string(const std::string& s);
Strategy strategy_from_string(const std::string& s);
std::string to_string(InitMode m);
std::string to_string(Strategy s);

struct DecodingConfig {
  std::size_t T = 5;
  double tau = 1.0;
  InitMode init = InitMode::kProposal;
  Strategy strategy = Strategy::kArgmax;
  /// 0 = recycle the whole sequence as observed; otherwise the fraction of
  /// free positions re-masked each step, lowest confidence first.
  double remask_fraction = 0.0;
  bool fuse_encoder_logits = false;
  std::size_t n_samples = 1;
  std::uint64_t seed = 0;
  /// Structure states fed to the adapter replaced by zeros. The proposal init
  /// still reads the structure; pair with kFullMask for a sequence-only run.
  bool zero_structure = false;
  bool keep_trajectory = true;

  void validate() const;
};

/// softmax(logits / tau) row-wise. Throws std::invalid_argument for tau <= 0.
Matrix temperature_scale(const Matrix& logits, double tau);

struct DesignResult {
  std::vector<int> sequence;
  /// log softmax of the final logits at the emitted tokens.
  std::vector<double> logprobs;
  std::vector<std::vector<int>> trajectory;
  std::size_t steps_used = 0;
  bool converged = false;
};

/// Proposal logits (L x 20) of the encoder head.
Matrix proposal_logit_matrix(ParamStore& ps, const ModelConfig& mcfg, const PreparedStructure& s);

/// Design logits (L x 20) for a token input, plus the proposal logits when
/// fusion is on.
Matrix design_logit_matrix(ParamStore& ps, const ModelConfig& mcfg, const PreparedStructure& s,
                           const std::vector<int>& tokens, bool fuse, bool zero_structure);

/// S^(0): argmax/sample of the proposal logits, or all MASK. Positions marked
/// observed in `fixed` keep their tokens.
SequenceState init_sequence(ParamStore& ps, const ModelConfig& mcfg, const PreparedStructure& s,
                            const DecodingConfig& cfg, CounterRng& rng, const SequenceState* fixed = nullptr);

/// One design. The rng drives sampling only; argmax decoding ignores it.
DesignResult design(ParamStore& ps, const ModelConfig& mcfg, const PreparedStructure& s, const DecodingConfig& cfg,
                    CounterRng& rng, const SequenceState* fixed = nullptr);

/// Stream used for sample `sample` of item `index`.
CounterRng design_stream(const DecodingConfig& cfg, std::size_t index, std::size_t sample = 0);

struct BatchItem {
  std::vector<DesignResult> samples;
  /// Non-empty when designing this item failed.
  std::string error;
};

/// cfg.n_samples designs per structure with per-item streams, so the output
/// is independent of thread count and batch order. threads <= 1 runs serially.
std::vector<BatchItem> batch_design(ParamStore& ps, const ModelConfig& mcfg,
                                    const std::vector<PreparedStructure>& structures, const DecodingConfig& cfg,
                                    std::size_t threads = 1, const std::vector<std::size_t>* item_ids = nullptr);

}  // namespace seqdesign
