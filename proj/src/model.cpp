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

#include "seqdesign/model.hpp"

#include <set>
#include <stdexcept>
#include <vector>

#include "seqdesign/rng.hpp"
#include "seqdesign/vocab.hpp"

namespace seqdesign {

using nlohmann::json;

void ModelConfig::validate() const {
  graph.validate();
  encoder.validate();
  lm.validate();
  adapter.validate(lm.d_model);
}

json to_json(const ModelConfig& c) {
  return {{"graph",
           {{"k", c.graph.k},
            {"rbf_bins", c.graph.rbf_bins},
            {"rbf_min", c.graph.rbf_min},
            {"rbf_max", c.graph.rbf_max},
            {"rel_pos_clip", c.graph.rel_pos_clip}}},
          {"encoder", {{"d_model", c.encoder.d_model}, {"n_layers", c.encoder.n_layers}, {"dropout", c.encoder.dropout}}},
          {"lm",
           {{"d_model", c.lm.d_model},
            {"n_layers", c.lm.n_layers},
            {"n_heads", c.lm.n_heads},
            {"ffn_dim", c.lm.ffn_dim},
            {"dropout", c.lm.dropout},
            {"rotary_base", c.lm.rotary_base}}},
          {"adapter",
           {{"n_heads", c.adapter.n_heads},
            {"zero_init_output", c.adapter.zero_init_output},
            {"rotary_base", c.adapter.rotary_base}}}};
}

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw std::invalid_argument("unknown config key '" + where + "." + k + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  check_keys(j, "model", {"graph", "encoder", "lm", "adapter"});
  if (j.contains("graph")) {
    const json& g = j["graph"];
    check_keys(g, "model.graph", {"k", "rbf_bins", "rbf_min", "rbf_max", "rel_pos_clip"});
    read(g, "k", c.graph.k);
    read(g, "rbf_bins", c.graph.rbf_bins);
    read(g, "rbf_min", c.graph.rbf_min);
    read(g, "rbf_max", c.graph.rbf_max);
    read(g, "rel_pos_clip", c.graph.rel_pos_clip);
  }
  if (j.contains("encoder")) {
    const json& e = j["encoder"];
    check_keys(e, "model.encoder", {"d_model", "n_layers", "dropout"});
    read(e, "d_model", c.encoder.d_model);
    read(e, "n_layers", c.encoder.n_layers);
    read(e, "dropout", c.encoder.dropout);
  }
  if (j.contains("lm")) {
    const json& l = j["lm"];
    check_keys(l, "model.lm", {"d_model", "n_layers", "n_heads", "ffn_dim", "dropout", "rotary_base"});
    read(l, "d_model", c.lm.d_model);
    read(l, "n_layers", c.lm.n_layers);
    read(l, "n_heads", c.lm.n_heads);
    read(l, "ffn_dim", c.lm.ffn_dim);
    read(l, "dropout", c.lm.dropout);
    read(l, "rotary_base", c.lm.rotary_base);
  }
  if (j.contains("adapter")) {
    const json& a = j["adapter"];
    check_keys(a, "model.adapter", {"n_heads", "zero_init_output", "rotary_base"});
    read(a, "n_heads", c.adapter.n_heads);
    read(a, "zero_init_output", c.adapter.zero_init_output);
    read(a, "rotary_base", c.adapter.rotary_base);
  }
  c.validate();
  return c;
}

ParamStore init_model_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamStore ps;
  CounterRng enc_rng = CounterRng::stream({seed, 0xE0C});
  CounterRng lm_rng = CounterRng::stream({seed, 0x1A});
  CounterRng ad_rng = CounterRng::stream({seed, 0xAD});
  add_encoder_params(ps, cfg.encoder, cfg.graph, enc_rng);
  add_lm_params(ps, cfg.lm, lm_rng);
  add_adapter_params(ps, cfg.adapter, cfg.lm.d_model, cfg.encoder.d_model, ad_rng);
  return ps;
}

ParamStore init_lm_params(const LMConfig& cfg, std::uint64_t seed) {
  ParamStore ps;
  CounterRng lm_rng = CounterRng::stream({seed, 0x1A});
  add_lm_params(ps, cfg, lm_rng);
  return ps;
}

EncoderMode encoder_mode_from_string(const std::string& s) {
  if (s == "scratch-joint") return EncoderMode::kScratchJoint;
  if (s == "pretrained-encoder-frozen") return EncoderMode::kPretrainedFrozen;
  if (s == "pretrained-encoder-finetune") return EncoderMode::kPretrainedFinetune;
  throw std::invalid_argument("unknown encoder mode '" + s +
                              "' (scratch-joint, pretrained-encoder-frozen, pretrained-encoder-finetune)");
}

LMMode lm_mode_from_string(const std::string& s) {
  if (s == "lm-frozen") return LMMode::kFrozen;
  if (s == "lm-finetune") return LMMode::kFinetune;
  throw std::invalid_argument("unknown lm mode '" + s + "' (lm-frozen, lm-finetune)");
}

std::string to_string(EncoderMode m) {
  switch (m) {
    case EncoderMode::kScratchJoint: return "scratch-joint";
    case EncoderMode::kPretrainedFrozen: return "pretrained-encoder-frozen";
    case EncoderMode::kPretrainedFinetune: return "pretrained-encoder-finetune";
  }
  return "?";
}

std::string to_string(LMMode m) { return m == LMMode::kFrozen ? "lm-frozen" : "lm-finetune"; }

void apply_trainability(ParamStore& ps, EncoderMode enc, LMMode lm) {
  ps.set_trainable(false);
  ps.set_trainable_prefix("ad.", true);
  if (enc != EncoderMode::kPretrainedFrozen) ps.set_trainable_prefix("enc.", true);
  ps.set_trainable_prefix("enc.proposal.", true);
  if (lm == LMMode::kFinetune) ps.set_trainable_prefix("lm.", true);
}

TrainableRatio trainable_ratio(const ParamStore& ps) {
  TrainableRatio r;
  r.trainable = ps.trainable_count();
  r.total = ps.total_count();
  r.ratio = r.total ? static_cast<double>(r.trainable) / static_cast<double>(r.total) : 0.0;
  return r;
}

PreparedStructure prepare_structure(const ResidueTable& t, const GraphConfig& g) {
  PreparedStructure p;
  p.graph = knn_graph(t, g);
  p.features = featurize(t, p.graph, g);
  p.length = t.size();
  return p;
}

PreparedStructure prepare_structure(const BackboneStructure& s, const GraphConfig& g) {
  return prepare_structure(ResidueTable::from_structure(s), g);
}

ModelOutputs model_forward(ad::Tape& t, ParamStore& ps, const ModelConfig& cfg, const PreparedStructure& s,
                           std::span<const int> tokens, const ForwardOptions& opts) {
  const std::size_t L = s.length, Lp = tokens.size();
  if (Lp < L)
    throw std::invalid_argument("model: " + std::to_string(Lp) + " tokens for a structure of " + std::to_string(L) +
                                " residues");
  for (std::size_t i = L; i < Lp; ++i)
    if (tokens[i] != vocab::kPad) throw std::invalid_argument("model: non-PAD token beyond the structure length");

  ModelOutputs out;
  out.structure = encode(t, ps, cfg.encoder, s.features, s.graph, opts.dropout_rng);
  out.proposal = proposal_logits(t, ps, out.structure);

  std::vector<double> pos(Lp);
  for (std::size_t i = 0; i < Lp; ++i) pos[i] = static_cast<double>(i);
  out.lm = mlm_forward(t, ps, cfg.lm, tokens, pos, opts.dropout_rng);

  ad::Var st = out.structure;
  if (opts.zero_structure) st = t.constant(Matrix(L, cfg.encoder.d_model));
  std::vector<std::uint8_t> valid(Lp, 0);
  for (std::size_t i = 0; i < L; ++i) valid[i] = 1;
  if (Lp > L) {
    std::vector<int> idx(Lp, -1);
    for (std::size_t i = 0; i < L; ++i) idx[i] = static_cast<int>(i);
    st = ad::gather_rows(st, idx);
  }
  out.fused = adapt(t, ps, cfg.adapter, out.lm.hidden, st, pos, valid);
  return out;
}

}  // namespace seqdesign
