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

#include "seqdesign/encoder.hpp"

#include <stdexcept>
#include <string>

#include "seqdesign/layers.hpp"
#include "seqdesign/vocab.hpp"

namespace seqdesign {

using layers::layer_norm;
using layers::linear;

void EncoderConfig::validate() const {
  if (d_model == 0) throw std::invalid_argument("encoder d_model must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("encoder dropout must lie in [0,1)");
}

namespace {

std::string layer_name(std::size_t l) { return "enc.l" + std::to_string(l); }

}  // namespace

void add_encoder_params(ParamStore& ps, const EncoderConfig& cfg, const GraphConfig& graph, CounterRng& rng) {
  cfg.validate();
  const std::size_t d = cfg.d_model;
  layers::add_linear(ps, "enc.node_in", graph.node_dim(), d, rng);
  layers::add_linear(ps, "enc.edge_in", graph.edge_dim(), d, rng);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = layer_name(l);
    // The three message inputs share one bias (msg.in.b).
    Param& ws = ps.add(p + ".msg.w_self", d, d);
    Param& wn = ps.add(p + ".msg.w_nbr", d, d);
    init_normal(ws.value, 1.0 / std::sqrt(3.0 * static_cast<double>(d)), rng);
    init_normal(wn.value, 1.0 / std::sqrt(3.0 * static_cast<double>(d)), rng);
    layers::add_linear(ps, p + ".msg.in", d, d, rng, /*zero_init=*/true);
    init_normal(ps.at(p + ".msg.in.w").value, 1.0 / std::sqrt(3.0 * static_cast<double>(d)), rng);
    layers::add_linear(ps, p + ".msg.out", d, d, rng);
    layers::add_layer_norm(ps, p + ".ln1", d);
    layers::add_linear(ps, p + ".ffn.a", d, 2 * d, rng);
    layers::add_linear(ps, p + ".ffn.b", 2 * d, d, rng);
    layers::add_layer_norm(ps, p + ".ln2", d);
  }
  layers::add_head(ps, "enc.proposal", d, vocab::kNumAminoAcids, rng);
}

std::size_t encoder_param_count(const EncoderConfig& cfg, const GraphConfig& graph) {
  const std::size_t d = cfg.d_model;
  std::size_t n = layers::linear_count(graph.node_dim(), d) + layers::linear_count(graph.edge_dim(), d);
  const std::size_t per_layer = 2 * d * d + 2 * layers::linear_count(d, d) + 2 * layers::layer_norm_count(d) +
                                layers::linear_count(d, 2 * d) + layers::linear_count(2 * d, d);
  n += cfg.n_layers * per_layer;
  return n + proposal_param_count(cfg);
}

std::size_t proposal_param_count(const EncoderConfig& cfg) {
  return layers::linear_count(cfg.d_model, vocab::kNumAminoAcids);
}

ad::Var encode(ad::Tape& t, ParamStore& ps, const EncoderConfig& cfg, const FeatureSet& features,
               const ResidueGraph& graph, CounterRng* dropout_rng) {
  cfg.validate();
  const std::size_t L = features.node.rows();
  const Matrix& win = ps.at("enc.node_in.w").value;
  require_shape(features.node, L, win.rows(), "encoder node features");
  require_shape(features.edge, graph.edge_count(), ps.at("enc.edge_in.w").value.rows(), "encoder edge features");
  if (graph.edges.size() != L)
    throw std::invalid_argument("encoder graph has " + std::to_string(graph.edges.size()) + " nodes, expected " +
                                std::to_string(L));
  if (win.cols() != cfg.d_model)
    throw std::invalid_argument("encoder parameter enc.node_in.w has width " + std::to_string(win.cols()) +
                                ", config d_model is " + std::to_string(cfg.d_model));

  std::vector<int> src, dst;
  std::vector<std::size_t> offsets{0};
  for (std::size_t i = 0; i < L; ++i) {
    for (int j : graph.edges[i]) {
      src.push_back(static_cast<int>(i));
      dst.push_back(j);
    }
    offsets.push_back(src.size());
  }

  ad::Var h = linear(t, ps, "enc.node_in", t.constant(features.node));
  const ad::Var e = linear(t, ps, "enc.edge_in", t.constant(features.edge));
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = layer_name(l);
    const ad::Var hs = ad::matmul(h, t.param(ps.at(p + ".msg.w_self")));
    const ad::Var hn = ad::matmul(h, t.param(ps.at(p + ".msg.w_nbr")));
    ad::Var pre = linear(t, ps, p + ".msg.in", e);
    pre = ad::add(pre, ad::gather_rows(hs, src));
    pre = ad::add(pre, ad::gather_rows(hn, dst));
    ad::Var m = linear(t, ps, p + ".msg.out", ad::gelu(pre));
    m = layers::dropout(m, cfg.dropout, dropout_rng);
    h = layer_norm(t, ps, p + ".ln1", ad::add(h, ad::segment_mean(m, offsets)));
    ad::Var f = linear(t, ps, p + ".ffn.b", ad::gelu(linear(t, ps, p + ".ffn.a", h)));
    f = layers::dropout(f, cfg.dropout, dropout_rng);
    h = layer_norm(t, ps, p + ".ln2", ad::add(h, f));
  }
  return h;
}

ad::Var proposal_logits(ad::Tape& t, ParamStore& ps, ad::Var repr) { return linear(t, ps, "enc.proposal", repr); }

}  // namespace seqdesign
