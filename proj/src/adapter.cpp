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

#include "seqdesign/adapter.hpp"

#include <stdexcept>
#include <string>

#include "seqdesign/layers.hpp"
#include "seqdesign/vocab.hpp"

namespace seqdesign {

using layers::layer_norm;
using layers::linear;

void AdapterConfig::validate(std::size_t d_model) const {
  if (n_heads == 0 || d_model % n_heads != 0)
    throw std::invalid_argument("adapter n_heads " + std::to_string(n_heads) + " must divide d_model " +
                                std::to_string(d_model));
  if ((d_model / n_heads) % 2 != 0) throw std::invalid_argument("adapter head dimension must be even for rotary");
  if (d_model % 2 != 0) throw std::invalid_argument("adapter bottleneck needs an even d_model");
}

void add_adapter_params(ParamStore& ps, const AdapterConfig& cfg, std::size_t d, std::size_t d_struct,
                        CounterRng& rng) {
  cfg.validate(d);
  layers::add_layer_norm(ps, "ad.ln_attn", d);
  layers::add_linear(ps, "ad.attn.q", d, d, rng);
  layers::add_linear(ps, "ad.attn.k", d_struct, d, rng);
  layers::add_linear(ps, "ad.attn.v", d_struct, d, rng);
  layers::add_linear(ps, "ad.attn.o", d, d, rng, cfg.zero_init_output);
  layers::add_layer_norm(ps, "ad.ln_ffn", d);
  layers::add_linear(ps, "ad.ffn.down", d, d / 2, rng);
  layers::add_linear(ps, "ad.ffn.up", d / 2, d, rng, cfg.zero_init_output);
  layers::add_head(ps, "ad.head", d, vocab::kNumAminoAcids, rng);
}

std::size_t adapter_param_count(std::size_t d, std::size_t d_struct) {
  return 2 * (2 * d) + 2 * (d * d + d) + 2 * (d_struct * d + d) + (d * (d / 2) + d / 2) + ((d / 2) * d + d) +
         (vocab::kNumAminoAcids * d + vocab::kNumAminoAcids);
}

FusedStates adapt(ad::Tape& t, ParamStore& ps, const AdapterConfig& cfg, ad::Var seq, ad::Var structure,
                  std::span<const double> positions, std::span<const std::uint8_t> struct_valid) {
  const std::size_t L = seq.rows(), d = seq.cols();
  cfg.validate(d);
  if (structure.rows() != L)
    throw std::invalid_argument("adapter: sequence length " + std::to_string(L) + " != structure length " +
                                std::to_string(structure.rows()));
  const ad::AttentionSpec spec{cfg.n_heads, true, cfg.rotary_base};
  const ad::Var a = layer_norm(t, ps, "ad.ln_attn", seq);
  const ad::Var q = linear(t, ps, "ad.attn.q", a);
  const ad::Var k = linear(t, ps, "ad.attn.k", structure);
  const ad::Var v = linear(t, ps, "ad.attn.v", structure);
  const ad::Var att = ad::attention(q, k, v, spec, positions, positions, struct_valid);
  const ad::Var h = ad::add(seq, linear(t, ps, "ad.attn.o", att));
  const ad::Var b = ad::gelu(linear(t, ps, "ad.ffn.down", layer_norm(t, ps, "ad.ln_ffn", h)));
  FusedStates out;
  out.states = ad::add(h, linear(t, ps, "ad.ffn.up", b));
  out.logits = linear(t, ps, "ad.head", out.states);
  return out;
}

}  // namespace seqdesign
