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

// Composite design model: structure encoder -> LM -> adapter.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "json.hpp"
#include "seqdesign/adapter.hpp"
#include "seqdesign/autodiff.hpp"
#include "seqdesign/encoder.hpp"
#include "seqdesign/geometry.hpp"
#include "seqdesign/lm.hpp"
#include "seqdesign/params.hpp"
#include "seqdesign/structure.hpp"

namespace seqdesign {

struct ModelConfig {
  GraphConfig graph;
  EncoderConfig encoder;
  LMConfig lm;
  AdapterConfig adapter;

  void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
/// Missing keys keep their defaults; unknown keys throw std::invalid_argument.
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Full parameter set (encoder, LM, adapter) initialised from `seed`.
ParamStore init_model_params(const ModelConfig& cfg, std::uint64_t seed);
/// LM parameters only (for sequence-only pretraining).
ParamStore init_lm_params(const LMConfig& cfg, std::uint64_t seed);

enum class EncoderMode { kScratchJoint, kPretrainedFrozen, kPretrainedFinetune };
enum class LMMode { kFrozen, kFinetune };
EncoderMode encoder_mode_from_string(const std::string& s);
LMMode lm_mode_from_string(const std::string& s);
std::string to_string(EncoderMode m);
std::string to_string(LMMode m);

/// Adapter and proposal head are always trainable; the encoder body unless
/// frozen; the LM only under kFinetune.
void apply_trainability(ParamStore& ps, EncoderMode enc, LMMode lm);

struct TrainableRatio {
  std::size_t trainable = 0;
  std::size_t total = 0;
  double ratio = 0.0;
};
TrainableRatio trainable_ratio(const ParamStore& ps);

/// Geometry precomputed once per structure.
struct PreparedStructure {
  FeatureSet features;
  ResidueGraph graph;
  std::size_t length = 0;
};
PreparedStructure prepare_structure(const BackboneStructure& s, const GraphConfig& g);
PreparedStructure prepare_structure(const ResidueTable& t, const GraphConfig& g);

struct ForwardOptions {
  /// Replace the structure representation by zeros (sequence-only ablation).
  bool zero_structure = false;
  CounterRng* dropout_rng = nullptr;
};

struct ModelOutputs {
  ad::Var structure;  // L x d_enc
  ad::Var proposal;   // L x 20
  LMStates lm;        // Lp x d, Lp x 24
  FusedStates fused;  // Lp x d, Lp x 20
};

/// `tokens` has length Lp >= L; positions >= L must be PAD and are excluded
/// from attention.
ModelOutputs model_forward(ad::Tape& t, ParamStore& ps, const ModelConfig& cfg, const PreparedStructure& s,
                           std::span<const int> tokens, const ForwardOptions& opts = {});

}  // namespace seqdesign
