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

#include "seqdesign/lm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "seqdesign/layers.hpp"
#include "seqdesign/vocab.hpp"

namespace seqdesign {

using layers::layer_norm;
using layers::linear;

void LMConfig::validate() const {
  if (d_model == 0 || n_heads == 0) throw std::invalid_argument("lm d_model and n_heads must be > 0");
  if (d_model % n_heads != 0)
    throw std::invalid_argument("lm d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                                std::to_string(n_heads));
  if ((d_model / n_heads) % 2 != 0) throw std::invalid_argument("lm head dimension must be even for rotary");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("lm dropout must lie in [0,1)");
}

namespace {

std::string layer_name(std::size_t l) { return "lm.l" + std::to_string(l); }

}  // namespace

void add_lm_params(ParamStore& ps, const LMConfig& cfg, CounterRng& rng) {
  cfg.validate();
  const std::size_t d = cfg.d_model;
  Param& emb = ps.add("lm.embed", vocab::kSize, d);
  init_normal(emb.value, 1.0, rng);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = layer_name(l);
    layers::add_layer_norm(ps, p + ".ln1", d);
    for (const char* w : {".attn.q", ".attn.k", ".attn.v", ".attn.o"}) layers::add_linear(ps, p + w, d, d, rng);
    layers::add_layer_norm(ps, p + ".ln2", d);
    layers::add_linear(ps, p + ".ffn.a", d, cfg.ffn_width(), rng);
    layers::add_linear(ps, p + ".ffn.b", cfg.ffn_width(), d, rng);
  }
  layers::add_layer_norm(ps, "lm.ln_f", d);
  layers::add_head(ps, "lm.head", d, vocab::kSize, rng);
}

std::size_t lm_param_count(const LMConfig& cfg) {
  const std::size_t d = cfg.d_model, f = cfg.ffn_width();
  const std::size_t per_layer = 2 * layers::layer_norm_count(d) + 4 * layers::linear_count(d, d) +
                                layers::linear_count(d, f) + layers::linear_count(f, d);
  return vocab::kSize * d + cfg.n_layers * per_layer + layers::layer_norm_count(d) +
         layers::linear_count(d, vocab::kSize);
}

LMStates mlm_forward(ad::Tape& t, ParamStore& ps, const LMConfig& cfg, std::span<const int> tokens,
                     std::span<const double> positions, CounterRng* dropout_rng) {
  cfg.validate();
  const std::size_t L = tokens.size();
  std::vector<int> ids(tokens.begin(), tokens.end());
  std::vector<std::uint8_t> valid(L);
  for (std::size_t i = 0; i < L; ++i) {
    if (ids[i] < 0 || ids[i] >= vocab::kSize)
      throw std::out_of_range("lm: token " + std::to_string(ids[i]) + " at position " + std::to_string(i) +
                              " is outside the vocabulary");
    valid[i] = ids[i] != vocab::kPad;
  }
  std::vector<double> pos;
  if (positions.empty()) {
    pos.resize(L);
    for (std::size_t i = 0; i < L; ++i) pos[i] = static_cast<double>(i);
  } else {
    if (positions.size() != L) throw std::invalid_argument("lm: position count differs from token count");
    pos.assign(positions.begin(), positions.end());
  }
  const ad::AttentionSpec spec{cfg.n_heads, true, cfg.rotary_base};

  ad::Var x = ad::gather_rows(t.param(ps.at("lm.embed")), ids);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = layer_name(l);
    const ad::Var a = layer_norm(t, ps, p + ".ln1", x);
    const ad::Var q = linear(t, ps, p + ".attn.q", a);
    const ad::Var k = linear(t, ps, p + ".attn.k", a);
    const ad::Var v = linear(t, ps, p + ".attn.v", a);
    ad::Var o = linear(t, ps, p + ".attn.o", ad::attention(q, k, v, spec, pos, pos, valid));
    x = ad::add(x, layers::dropout(o, cfg.dropout, dropout_rng));
    const ad::Var b = layer_norm(t, ps, p + ".ln2", x);
    ad::Var f = linear(t, ps, p + ".ffn.b", ad::gelu(linear(t, ps, p + ".ffn.a", b)));
    x = ad::add(x, layers::dropout(f, cfg.dropout, dropout_rng));
  }
  LMStates out;
  out.hidden = layer_norm(t, ps, "lm.ln_f", x);
  out.logits = linear(t, ps, "lm.head", out.hidden);
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto r = p.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double& v : r) {
      v = std::exp(v - mx);
      z += v;
    }
    for (double& v : r) v /= z;
  }
  return p;
}

}  // namespace seqdesign
