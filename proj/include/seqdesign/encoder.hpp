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

// Message-passing structure encoder and its linear proposal head.
//
// Per layer, for every edge i -> j:
//   m_ij = W2 gelu(W_self h_i + W_nbr h_j + W_edge e_ij + b1) + b2
//   h_i <- LN(h_i + mean_j m_ij);  h_i <- LN(h_i + FFN(h_i))
// with FFN(x) = W_b gelu(W_a x + a) + b of width 2 d. Edge embeddings are
// computed once from the edge features and shared by all layers.

#include <cstddef>
#include <vector>

#include "seqdesign/autodiff.hpp"
#include "seqdesign/geometry.hpp"
#include "seqdesign/params.hpp"
#include "seqdesign/rng.hpp"

namespace seqdesign {

struct EncoderConfig {
  std::size_t d_model = 128;
  std::size_t n_layers = 3;
  double dropout = 0.0;

  void validate() const;
};

/// Parameters under "enc."; the proposal head is "enc.proposal".
void add_encoder_params(ParamStore& ps, const EncoderConfig& cfg, const GraphConfig& graph,
                        CounterRng& rng);
std::size_t encoder_param_count(const EncoderConfig& cfg, const GraphConfig& graph);
std::size_t proposal_param_count(const EncoderConfig& cfg);

/// L x d_model structural states. Throws std::invalid_argument naming the
/// tensor when the features do not match the configuration.
ad::Var encode(ad::Tape& t, ParamStore& ps, const EncoderConfig& cfg, const FeatureSet& features,
               const ResidueGraph& graph, CounterRng* dropout_rng = nullptr);

/// Affine map of the states to 20 amino-acid logits.
ad::Var proposal_logits(ad::Tape& t, ParamStore& ps, ad::Var repr);

}  // namespace seqdesign
