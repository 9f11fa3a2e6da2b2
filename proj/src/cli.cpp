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

#include "seqdesign/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "seqdesign/checkpoint.hpp"
#include "seqdesign/dataset.hpp"
#include "seqdesign/decoding.hpp"
#include "seqdesign/eval.hpp"
#include "seqdesign/model.hpp"
#include "seqdesign/synthetic.hpp"
#include "seqdesign/training.hpp"
#include "seqdesign/vocab.hpp"

namespace seqdesign::cli {

using nlohmann::json;
namespace fs = std::filesystem;

json default_config() {
  const SyntheticSpec syn;
  const TrainConfig tr;
  const PretrainConfig pre;
  const DecodingConfig dec;
  const auto motifs = default_motifs();
  return {
      {"seed", 0},
      {"precision", "f64"},
      {"deterministic", true},
      {"threads", 1},
      {"paths",
       {{"data", ""},
        {"val_data", ""},
        {"lm_checkpoint", ""},
        {"encoder_checkpoint", ""},
        {"checkpoint", ""},
        {"output", ""},
        {"metrics", ""}}},
      {"synthetic",
       {{"n_samples", syn.n_samples},
        {"length_min", syn.length_range.first},
        {"length_max", syn.length_range.second},
        {"segment_min", syn.segment_length_range.first},
        {"segment_max", syn.segment_length_range.second},
        {"noise_rate", syn.noise_rate},
        {"motifs", json::array({motifs[0], motifs[1], motifs[2]})}}},
      {"model", to_json(ModelConfig{})},
      {"train",
       {{"encoder_mode", to_string(tr.encoder_mode)},
        {"lm_mode", to_string(tr.lm_mode)},
        {"batch_residues", tr.batch_residues},
        {"warmup", tr.warmup},
        {"lr_scale", tr.lr_scale},
        {"beta1", tr.adam.beta1},
        {"beta2", tr.adam.beta2},
        {"adam_eps", tr.adam.eps},
        {"max_epochs", tr.max_epochs},
        {"max_steps", tr.max_steps},
        {"eps_noise", tr.eps_noise},
        {"val_every", tr.val_every}}},
      {"pretrain",
       {{"batch_residues", pre.batch_residues},
        {"warmup", pre.warmup},
        {"lr_scale", pre.lr_scale},
        {"max_epochs", pre.max_epochs},
        {"max_steps", pre.max_steps},
        {"select_rate", pre.select_rate}}},
      {"decode",
       {{"T", dec.T},
        {"tau", dec.tau},
        {"init", to_string(dec.init)},
        {"strategy", to_string(dec.strategy)},
        {"remask_fraction", dec.remask_fraction},
        {"fuse_encoder_logits", dec.fuse_encoder_logits},
        {"n_samples", dec.n_samples},
        {"zero_structure", dec.zero_structure},
        {"keep_trajectory", dec.keep_trajectory}}},
      {"sweep", {{"taus", json::array({0.1, 0.5, 1.0, 1.5})}, {"n_samples", 20}}},
      {"eval", {{"antibody_chain", ""}}},
      {"gradcheck",
       {{"d_model", 16},
        {"n_layers", 2},
        {"n_heads", 2},
        {"k", 8},
        {"length", 12},
        {"epsilon", 1e-4},
        {"per_group", 32},
        {"tolerance", 1e-4}}},
  };
}

namespace {

const char* type_label(const json& j) {
  if (j.is_boolean()) return "a boolean";
  if (j.is_number_integer()) return "an integer";
  if (j.is_number()) return "a number";
  if (j.is_string()) return "a string";
  if (j.is_array()) return "an array";
  if (j.is_object()) return "an object";
  return "null";
}

bool compatible(const json& def, const json& val) {
  if (def.is_boolean()) return val.is_boolean();
  if (def.is_number_integer()) return val.is_number_integer();
  if (def.is_number()) return val.is_number();
  if (def.is_string()) return val.is_string();
  if (def.is_array()) return val.is_array();
  if (def.is_object()) return val.is_object();
  return false;
}

void merge(json& base, const json& user, const std::string& where) {
  if (!user.is_object()) throw ConfigError("config" + (where.empty() ? "" : " key '" + where + "'") + " must be an object");
  for (const auto& [k, v] : user.items()) {
    const std::string path = where.empty() ? k : where + "." + k;
    if (!base.contains(k)) throw ConfigError("unknown config key '" + path + "'");
    json& slot = base[k];
    if (!compatible(slot, v))
      throw ConfigError("config key '" + path + "' must be " + type_label(slot) + ", got " + type_label(v));
    if (slot.is_object())
      merge(slot, v, path);
    else
      slot = v;
  }
}

}  // namespace

json resolve_config(const json& user) {
  json cfg = default_config();
  merge(cfg, user, "");
  return cfg;
}

void apply_override(json& user, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &user;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

namespace {

// ---------------------------------------------------------------------------
// Config -> typed settings. Type errors and validation failures surface as
// ConfigError naming the section.

template <typename F>
auto typed(const std::string& section, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ConfigError(section + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(section + ": " + e.what());
  }
}

std::string path_of(const json& cfg, const char* key, bool required, const char* command) {
  const std::string p = cfg.at("paths").at(key).get<std::string>();
  if (required && p.empty())
    throw ConfigError(std::string(command) + " requires paths." + key);
  return p;
}

Precision precision_of(const json& cfg) {
  return typed("precision", [&] { return precision_from_string(cfg.at("precision").get<std::string>()); });
}

std::size_t threads_of(const json& cfg) {
  const auto t = cfg.at("threads").get<long long>();
  if (t < 1) throw ConfigError("config key 'threads' must be >= 1");
  return static_cast<std::size_t>(t);
}

ModelConfig model_of(const json& cfg) {
  return typed("model", [&] {
    ModelConfig m = model_config_from_json(cfg.at("model"));
    m.validate();
    return m;
  });
}

SyntheticSpec synthetic_of(const json& cfg) {
  return typed("synthetic", [&] {
    const json& s = cfg.at("synthetic");
    SyntheticSpec spec;
    spec.n_samples = s.at("n_samples").get<std::size_t>();
    spec.length_range = {s.at("length_min").get<std::size_t>(), s.at("length_max").get<std::size_t>()};
    spec.segment_length_range = {s.at("segment_min").get<std::size_t>(), s.at("segment_max").get<std::size_t>()};
    spec.noise_rate = s.at("noise_rate").get<double>();
    const auto m = s.at("motifs").get<std::vector<std::string>>();
    if (m.size() != kNumSecondaryClasses) throw std::invalid_argument("motifs needs one string per class (3)");
    spec.rule_table = rule_table_from_motifs({m[0], m[1], m[2]});
    spec.seed = cfg.at("seed").get<std::uint64_t>();
    spec.validate();
    return spec;
  });
}

TrainConfig train_of(const json& cfg) {
  return typed("train", [&] {
    const json& t = cfg.at("train");
    TrainConfig c;
    c.encoder_mode = encoder_mode_from_string(t.at("encoder_mode").get<std::string>());
    c.lm_mode = lm_mode_from_string(t.at("lm_mode").get<std::string>());
    c.batch_residues = t.at("batch_residues").get<std::size_t>();
    c.warmup = t.at("warmup").get<std::size_t>();
    c.lr_scale = t.at("lr_scale").get<double>();
    c.adam.beta1 = t.at("beta1").get<double>();
    c.adam.beta2 = t.at("beta2").get<double>();
    c.adam.eps = t.at("adam_eps").get<double>();
    c.max_epochs = t.at("max_epochs").get<std::size_t>();
    c.max_steps = t.at("max_steps").get<std::size_t>();
    c.eps_noise = t.at("eps_noise").get<double>();
    c.val_every = t.at("val_every").get<std::size_t>();
    c.seed = cfg.at("seed").get<std::uint64_t>();
    c.precision = precision_from_string(cfg.at("precision").get<std::string>());
    c.validate();
    return c;
  });
}

PretrainConfig pretrain_of(const json& cfg) {
  return typed("pretrain", [&] {
    const json& p = cfg.at("pretrain");
    const json& t = cfg.at("train");
    PretrainConfig c;
    c.batch_residues = p.at("batch_residues").get<std::size_t>();
    c.warmup = p.at("warmup").get<std::size_t>();
    c.lr_scale = p.at("lr_scale").get<double>();
    c.max_epochs = p.at("max_epochs").get<std::size_t>();
    c.max_steps = p.at("max_steps").get<std::size_t>();
    c.select_rate = p.at("select_rate").get<double>();
    c.adam.beta1 = t.at("beta1").get<double>();
    c.adam.beta2 = t.at("beta2").get<double>();
    c.adam.eps = t.at("adam_eps").get<double>();
    c.seed = cfg.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
  });
}

DecodingConfig decode_of(const json& cfg) {
  return typed("decode", [&] {
    const json& d = cfg.at("decode");
    DecodingConfig c;
    c.T = d.at("T").get<std::size_t>();
    c.tau = d.at("tau").get<double>();
    c.init = init_mode_from_string(d.at("init").get<std::string>());
    c.strategy = strategy_from_string(d.at("strategy").get<std::string>());
    c.remask_fraction = d.at("remask_fraction").get<double>();
    c.fuse_encoder_logits = d.at("fuse_encoder_logits").get<bool>();
    c.n_samples = d.at("n_samples").get<std::size_t>();
    c.zero_structure = d.at("zero_structure").get<bool>();
    c.keep_trajectory = d.at("keep_trajectory").get<bool>();
    c.seed = cfg.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
  });
}

// ---------------------------------------------------------------------------

std::vector<Record> load_records(const std::string& path) {
  if (!fs::exists(path)) throw DataError("cannot open dataset '" + path + "'", 0);
  return parse_dataset(path).records;
}

std::vector<std::vector<int>> natives_of(const std::vector<Record>& records) {
  std::vector<std::vector<int>> out;
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.sequence.size(); ++i)
      if (!r.sequence.observed[i] || !vocab::is_amino_acid(r.sequence.tokens[i]))
        throw DataError("record '" + r.structure.id + "' has no complete native sequence (position " +
                            std::to_string(i) + ")",
                        0);
    out.push_back(r.sequence.tokens);
  }
  return out;
}

std::vector<PreparedStructure> prepare_all(const std::vector<Record>& records, const GraphConfig& g) {
  std::vector<PreparedStructure> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(prepare_structure(r.structure, g));
  return out;
}

Checkpoint open_checkpoint(const std::string& dir, const char* key) {
  if (dir.empty()) throw ConfigError(std::string("paths.") + key + " is required");
  if (!fs::exists(fs::path(dir) / "manifest.json"))
    throw MissingCheckpointError("checkpoint not found: '" + dir + "' (paths." + key + ")");
  return load_checkpoint(dir);
}

// Copies every `prefix` tensor of dst from src, shape-checked.
void copy_checked(ParamStore& dst, const ParamStore& src, const std::string& prefix, const std::string& origin) {
  for (auto& p : dst) {
    if (p->name.rfind(prefix, 0) != 0) continue;
    if (!src.contains(p->name)) throw CheckpointError(origin + " lacks tensor '" + p->name + "'");
    const Matrix& v = src.at(p->name).value;
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols())
      throw CheckpointError(origin + " tensor '" + p->name + "' has shape " + std::to_string(v.rows()) + "x" +
                            std::to_string(v.cols()) + ", expected " + std::to_string(p->value.rows()) + "x" +
                            std::to_string(p->value.cols()));
    p->value = v;
  }
}

struct LoadedModel {
  ModelConfig config;
  ParamStore params;
};

LoadedModel load_model(const json& cfg) {
  Checkpoint ck = open_checkpoint(path_of(cfg, "checkpoint", false, ""), "checkpoint");
  LoadedModel m;
  m.config = typed("checkpoint model_config", [&] { return model_config_from_json(ck.model_config); });
  m.params = init_model_params(m.config, 0);
  restore_params(m.params, ck.params);
  m.params.set_trainable(false);
  return m;
}

std::ofstream open_output(const std::string& path) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  return f;
}

void write_json_line(std::ostream& os, const json& j) { os << j.dump() << '\n'; }

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(prec) << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// Commands.

int cmd_gen_data(const json& cfg, std::ostream& out, std::ostream& err) {
  const SyntheticSpec spec = synthetic_of(cfg);
  const std::string path = path_of(cfg, "output", true, "gen-data");
  write_dataset(path, gen_synthetic(spec));
  err << "wrote " << spec.n_samples << " records to " << path << '\n';
  out << "bayes_optimal_recovery " << fmt(bayes_optimal_recovery(spec), 6) << '\n';
  return kOk;
}

int cmd_pretrain_lm(const json& cfg, std::ostream& out, std::ostream& err) {
  const ModelConfig mcfg = model_of(cfg);
  const PretrainConfig pcfg = pretrain_of(cfg);
  const Precision prec = precision_of(cfg);
  const std::string data = path_of(cfg, "data", true, "pretrain-lm");
  const std::string dest = path_of(cfg, "checkpoint", true, "pretrain-lm");
  const std::string metrics = path_of(cfg, "metrics", false, "pretrain-lm");

  std::vector<std::vector<int>> corpus;
  std::size_t skipped = 0;
  for (const auto& r : load_records(data)) {
    const auto& t = r.sequence.tokens;
    if (t.empty() || !std::all_of(t.begin(), t.end(), vocab::is_amino_acid))
      ++skipped;
    else
      corpus.push_back(t);
  }
  if (skipped) err << "skipped " << skipped << " records with non-standard or missing residues\n";
  if (corpus.empty()) throw DataError("no usable sequences in '" + data + "'", 0);

  ParamStore ps = init_lm_params(mcfg.lm, cfg.at("seed").get<std::uint64_t>());
  std::ofstream log;
  if (!metrics.empty()) log = open_output(metrics);
  const auto res = pretrain_lm(corpus, ps, mcfg.lm, pcfg, [&](const TrainLogEntry& e) {
    if (log) write_json_line(log, {{"step", e.step}, {"loss", e.loss}, {"lr", e.lr}});
    if (e.step % 100 == 0) err << "pretrain step " << e.step << " loss " << fmt(e.loss) << '\n';
  });
  if (prec == Precision::kF32)
    for (auto& p : ps) quantize_f32(p->value);

  Checkpoint ck;
  ck.params = ps;
  ck.model_config = to_json(mcfg);
  ck.step = res.steps;
  ck.rng_state = {{"seed", cfg.at("seed")}, {"purpose", "pretrain-lm"}};
  ck.precision = prec;
  save_checkpoint(ck, dest);
  out << "pretrain-lm steps " << res.steps << " final_loss " << fmt(res.losses.empty() ? 0.0 : res.losses.back())
      << '\n';
  return kOk;
}

int cmd_train(const json& cfg, std::ostream& out, std::ostream& err) {
  const ModelConfig mcfg = model_of(cfg);
  const TrainConfig tcfg = train_of(cfg);
  const DecodingConfig dcfg = decode_of(cfg);
  const std::string data = path_of(cfg, "data", true, "train");
  const std::string dest = path_of(cfg, "checkpoint", true, "train");
  const std::string metrics = path_of(cfg, "metrics", false, "train");
  const std::string val_path = path_of(cfg, "val_data", false, "train");
  const std::string lm_ckpt = path_of(cfg, "lm_checkpoint", false, "train");
  const std::string enc_ckpt = path_of(cfg, "encoder_checkpoint", false, "train");

  const std::vector<Record> records = load_records(data);
  if (records.empty()) throw DataError("training set '" + data + "' is empty", 0);
  natives_of(records);
  std::size_t longest = 0;
  for (const auto& r : records) longest = std::max(longest, r.sequence.size());
  if (tcfg.batch_residues < longest)
    throw ConfigError("config key 'train.batch_residues' (" + std::to_string(tcfg.batch_residues) +
                      ") is below the longest protein (" + std::to_string(longest) + ")");

  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  ParamStore ps = init_model_params(mcfg, seed);
  if (!lm_ckpt.empty()) {
    const Checkpoint ck = open_checkpoint(lm_ckpt, "lm_checkpoint");
    copy_checked(ps, ck.params, "lm.", "LM checkpoint '" + lm_ckpt + "'");
  } else if (tcfg.lm_mode == LMMode::kFrozen) {
    err << "warning: no paths.lm_checkpoint; the frozen LM keeps its random initialisation\n";
  }
  if (tcfg.encoder_mode != EncoderMode::kScratchJoint) {
    if (enc_ckpt.empty())
      throw ConfigError("train.encoder_mode '" + to_string(tcfg.encoder_mode) + "' requires paths.encoder_checkpoint");
    const Checkpoint ck = open_checkpoint(enc_ckpt, "encoder_checkpoint");
    copy_checked(ps, ck.params, "enc.", "encoder checkpoint '" + enc_ckpt + "'");
  }

  ValidationFn validate;
  std::vector<PreparedStructure> val_structs;
  std::vector<std::vector<int>> val_natives;
  if (!val_path.empty() && tcfg.val_every > 0) {
    const auto val = load_records(val_path);
    val_natives = natives_of(val);
    val_structs = prepare_all(val, mcfg.graph);
    DecodingConfig vcfg = dcfg;
    vcfg.n_samples = 1;
    vcfg.strategy = Strategy::kArgmax;
    vcfg.keep_trajectory = false;
    validate = [&, vcfg](ParamStore& p) {
      const auto items = batch_design(p, mcfg, val_structs, vcfg, 1);
      std::vector<double> rec;
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (!items[i].error.empty()) throw std::runtime_error("validation design failed: " + items[i].error);
        rec.push_back(recovery(items[i].samples[0].sequence, val_natives[i]));
      }
      return median_recovery(rec);
    };
  }

  std::ofstream log;
  if (!metrics.empty()) log = open_output(metrics);
  const TrainResult res = train(records, ps, mcfg, tcfg, validate, [&](const TrainLogEntry& e) {
    json j = {{"step", e.step},
              {"loss", e.loss},
              {"adapter_loss", e.adapter_loss},
              {"proposal_loss", e.proposal_loss},
              {"lr", e.lr}};
    if (e.val_recovery) j["val_recovery"] = *e.val_recovery;
    if (log) write_json_line(log, j);
    if (e.step % 50 == 0 || e.val_recovery)
      err << "step " << e.step << " loss " << fmt(e.loss) << " lr " << fmt(e.lr, 6)
          << (e.val_recovery ? " val_recovery " + fmt(*e.val_recovery) : "") << '\n';
  });

  Checkpoint ck;
  ck.params = ps;
  ck.model_config = to_json(mcfg);
  ck.step = res.steps;
  ck.rng_state = {{"seed", seed}, {"purpose", "train"}};
  ck.precision = tcfg.precision;
  save_checkpoint(ck, dest);
  const auto ratio = trainable_ratio(ps);
  out << "train steps " << res.steps << " final_loss " << fmt(res.log.empty() ? 0.0 : res.log.back().loss)
      << " trainable " << ratio.trainable << "/" << ratio.total << '\n';
  return kOk;
}

json design_json(const std::string& id, const DesignResult& r, std::size_t sample, bool with_sample) {
  json j = {{"id", id},
            {"sequence", vocab::detokenize(r.sequence)},
            {"logprobs", r.logprobs},
            {"steps_used", r.steps_used},
            {"converged", r.converged}};
  if (with_sample) j["sample"] = sample;
  if (!r.trajectory.empty()) {
    json traj = json::array();
    for (const auto& s : r.trajectory) traj.push_back(vocab::detokenize(s));
    j["trajectory"] = traj;
  }
  return j;
}

int cmd_design(const json& cfg, std::ostream& out, std::ostream& err) {
  const DecodingConfig dcfg = decode_of(cfg);
  const std::size_t threads = threads_of(cfg);
  const std::string data = path_of(cfg, "data", true, "design");
  const std::string dest = path_of(cfg, "output", true, "design");
  LoadedModel m = load_model(cfg);
  const auto records = load_records(data);
  const auto structs = prepare_all(records, m.config.graph);
  const auto items = batch_design(m.params, m.config, structs, dcfg, threads);

  std::ofstream f = open_output(dest);
  std::size_t failed = 0, written = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string& id = records[i].structure.id;
    if (!items[i].error.empty()) {
      ++failed;
      err << "design failed for '" << id << "': " << items[i].error << '\n';
      write_json_line(f, {{"id", id}, {"error", items[i].error}});
      continue;
    }
    for (std::size_t s = 0; s < items[i].samples.size(); ++s, ++written)
      write_json_line(f, design_json(id, items[i].samples[s], s, dcfg.n_samples > 1));
  }
  out << "designed " << written << " sequences for " << records.size() - failed << " structures";
  if (failed) out << " (" << failed << " failed)";
  out << '\n';
  return failed ? kRuntimeError : kOk;
}

int cmd_eval(const json& cfg, std::ostream& out, std::ostream& err) {
  const DecodingConfig dcfg = decode_of(cfg);
  const std::size_t threads = threads_of(cfg);
  const std::string data = path_of(cfg, "data", true, "eval");
  const std::string dest = path_of(cfg, "output", false, "eval");
  const std::string ab_chain = cfg.at("eval").at("antibody_chain").get<std::string>();
  LoadedModel m = load_model(cfg);
  const auto records = load_records(data);
  if (records.empty()) throw DataError("evaluation set '" + data + "' is empty", 0);
  const auto natives = natives_of(records);
  const auto structs = prepare_all(records, m.config.graph);
  const auto items = batch_design(m.params, m.config, structs, dcfg, threads);

  std::vector<double> rec, dist, ident;
  std::vector<std::vector<int>> designs;
  std::vector<ContextLabel> labels;
  std::vector<json> per_protein;
  std::map<std::string, std::vector<double>> ab;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].error.empty())
      throw std::runtime_error("design failed for '" + records[i].structure.id + "': " + items[i].error);
    std::vector<std::vector<int>> seqs;
    for (const auto& s : items[i].samples) seqs.push_back(s.sequence);
    const double r = recovery(seqs[0], natives[i]);
    rec.push_back(r);
    dist.push_back(distinct_fraction(seqs));
    ident.push_back(mean_pairwise_identity(seqs));
    designs.push_back(seqs[0]);
    labels.push_back(label_contexts(records[i].structure));
    per_protein.push_back({{"id", records[i].structure.id}, {"length", natives[i].size()}, {"recovery", r}});

    if (!ab_chain.empty()) {
      const auto& chains = records[i].structure.chains;
      const auto ci = std::find_if(chains.begin(), chains.end(), [&](const Chain& c) { return c.chain_id == ab_chain; });
      if (ci == chains.end()) continue;
      const auto chain_idx = records[i].structure.chain_index();
      std::vector<std::uint8_t> region(chain_idx.size(), 0);
      for (std::size_t k = 0; k < region.size(); ++k) region[k] = chain_idx[k] == ci - chains.begin();
      const auto contact = contact_mask(records[i].structure, region);
      const auto am = antibody_metrics(seqs, natives[i], region, contact);
      ab["aar"].push_back(am.aar);
      if (am.caar) ab["caar"].push_back(*am.caar);
      ab["longest_comm_subseq"].push_back(static_cast<double>(am.longest_comm_subseq));
      ab["longest_cons_ratio"].push_back(am.longest_cons_ratio);
      ab["aa_entropy"].push_back(am.aa_entropy);
    }
  }

  const double ppl = perplexity(m.params, m.config, structs, natives);
  const auto contexts = dissect_recovery(designs, natives, labels);
  json summary = {{"proteins", records.size()},
                  {"median_recovery", median_recovery(rec)},
                  {"mean_recovery", stable_mean(rec)},
                  {"perplexity", ppl},
                  {"contexts", contexts},
                  {"distinct_fraction", stable_mean(dist)},
                  {"mean_pairwise_identity", stable_mean(ident)}};
  if (!ab.empty()) {
    json block;
    for (auto& [k, v] : ab) block[k] = stable_mean(v);
    summary["antibody"] = block;
  }

  if (!dest.empty()) {
    std::ofstream f = open_output(dest);
    for (const auto& p : per_protein) write_json_line(f, p);
    write_json_line(f, {{"summary", summary}});
  }

  out << "proteins            " << records.size() << '\n'
      << "median recovery     " << fmt(summary["median_recovery"].get<double>()) << '\n'
      << "mean recovery       " << fmt(summary["mean_recovery"].get<double>()) << '\n'
      << "perplexity          " << fmt(ppl, 3) << '\n';
  for (const auto& [k, v] : contexts) out << "  recovery " << std::left << std::setw(10) << k << fmt(v) << '\n';
  if (dcfg.n_samples > 1)
    out << "distinct fraction   " << fmt(stable_mean(dist)) << '\n'
        << "pairwise identity   " << fmt(stable_mean(ident)) << '\n';
  if (summary.contains("antibody"))
    for (const auto& [k, v] : summary["antibody"].items())
      out << "  antibody " << std::left << std::setw(20) << k << fmt(v.get<double>()) << '\n';
  (void)err;
  return kOk;
}

int cmd_sweep(const json& cfg, std::ostream& out, std::ostream&) {
  const DecodingConfig dcfg = decode_of(cfg);
  const std::size_t threads = threads_of(cfg);
  const std::string data = path_of(cfg, "data", true, "sweep");
  const std::string dest = path_of(cfg, "output", false, "sweep");
  const auto taus = typed("sweep", [&] { return cfg.at("sweep").at("taus").get<std::vector<double>>(); });
  const auto n = typed("sweep", [&] { return cfg.at("sweep").at("n_samples").get<std::size_t>(); });
  if (n < 2) throw ConfigError("config key 'sweep.n_samples' must be >= 2");
  LoadedModel m = load_model(cfg);
  const auto records = load_records(data);
  const auto natives = natives_of(records);
  const auto structs = prepare_all(records, m.config.graph);
  const auto rows = diversity_sweep(m.params, m.config, structs, natives, dcfg, taus, n, threads);

  std::ofstream f;
  if (!dest.empty()) f = open_output(dest);
  out << "tau      recovery  distinct  identity\n";
  for (const auto& r : rows) {
    if (f)
      write_json_line(f, {{"tau", r.tau},
                          {"mean_recovery", r.mean_recovery},
                          {"distinct_fraction", r.distinct_fraction},
                          {"mean_pairwise_identity", r.mean_pairwise_identity}});
    out << std::left << std::setw(9) << r.tau << fmt(r.mean_recovery) << "    " << fmt(r.distinct_fraction) << "    "
        << fmt(r.mean_pairwise_identity) << '\n';
  }
  return kOk;
}

int cmd_gradcheck(const json& cfg, std::ostream& out, std::ostream&) {
  if (precision_of(cfg) != Precision::kF64) throw ConfigError("gradcheck requires precision f64");
  const json& g = cfg.at("gradcheck");
  ModelConfig mcfg;
  double eps = 0, tol = 0;
  std::size_t per_group = 0, length = 0;
  typed("gradcheck", [&] {
    const auto d = g.at("d_model").get<std::size_t>();
    const auto layers = g.at("n_layers").get<std::size_t>();
    const auto heads = g.at("n_heads").get<std::size_t>();
    mcfg.graph.k = g.at("k").get<std::size_t>();
    mcfg.encoder.d_model = d;
    mcfg.encoder.n_layers = layers;
    mcfg.lm.d_model = d;
    mcfg.lm.n_layers = layers;
    mcfg.lm.n_heads = heads;
    mcfg.adapter.n_heads = heads;
    mcfg.adapter.zero_init_output = false;
    eps = g.at("epsilon").get<double>();
    tol = g.at("tolerance").get<double>();
    per_group = g.at("per_group").get<std::size_t>();
    length = g.at("length").get<std::size_t>();
    if (eps <= 0) throw std::invalid_argument("epsilon must be > 0");
    mcfg.validate();
    return 0;
  });
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  SyntheticSpec spec;
  spec.n_samples = 1;
  spec.length_range = {length, length};
  spec.seed = seed;
  const Record rec = gen_synthetic_sample(spec, 0).record;
  ParamStore ps = init_model_params(mcfg, seed);
  const auto groups = gradcheck_model(ps, mcfg, rec, eps, per_group, seed);
  double worst = 0;
  for (const auto& gr : groups) {
    out << std::left << std::setw(16) << gr.name << " checked " << std::setw(4) << gr.checked << " max_rel_error "
        << std::scientific << std::setprecision(3) << gr.max_rel_error << std::defaultfloat << '\n';
    worst = std::max(worst, gr.max_rel_error);
  }
  out << "worst " << std::scientific << std::setprecision(3) << worst << std::defaultfloat
      << (worst <= tol ? " PASS" : " FAIL") << '\n';
  return worst <= tol ? kOk : kRuntimeError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structure-conditioned protein sequence design", "seqdesign"};
  app.set_help_all_flag("--help-all", "Expand all help");
  app.fallthrough();
  bool version = false;
  std::string config_path;
  std::vector<std::string> sets;
  app.add_flag("--version", version, "Print artifact and checkpoint-format versions");
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--set", sets, "Override a config key: dotted.key=value (repeatable)");

  // Flags that map onto config keys: (option text, config path, is-string).
  struct Mapped {
    std::string value;
    std::string key;
    bool is_string;
    CLI::Option* opt = nullptr;
  };
  std::vector<std::unique_ptr<Mapped>> mapped;
  auto map_flag = [&](CLI::App* sub, const std::string& name, const std::string& key, bool is_string,
                      const std::string& help) {
    auto m = std::make_unique<Mapped>();
    m->key = key;
    m->is_string = is_string;
    m->opt = sub->add_option(name, m->value, help + " (" + key + ")");
    mapped.push_back(std::move(m));
  };
  for (CLI::App* a : {&app}) {
    map_flag(a, "--seed", "seed", false, "Global seed");
    map_flag(a, "--threads", "threads", false, "Worker threads");
    map_flag(a, "--precision", "precision", true, "f32 or f64");
  }

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic structure/sequence dataset");
  map_flag(gen, "--output,-o", "paths.output", true, "Output JSONL");
  map_flag(gen, "--n", "synthetic.n_samples", false, "Number of records");

  auto* pre = app.add_subcommand("pretrain-lm", "Pretrain the sequence LM on the sequences of a dataset");
  map_flag(pre, "--data", "paths.data", true, "Input JSONL");
  map_flag(pre, "--output,-o", "paths.checkpoint", true, "Checkpoint directory");
  map_flag(pre, "--metrics", "paths.metrics", true, "Metrics JSONL");

  auto* tr = app.add_subcommand("train", "CMLM training of the design model");
  map_flag(tr, "--data", "paths.data", true, "Training JSONL");
  map_flag(tr, "--val", "paths.val_data", true, "Validation JSONL");
  map_flag(tr, "--lm-checkpoint", "paths.lm_checkpoint", true, "Pretrained LM checkpoint");
  map_flag(tr, "--encoder-checkpoint", "paths.encoder_checkpoint", true, "Pretrained encoder checkpoint");
  map_flag(tr, "--output,-o", "paths.checkpoint", true, "Checkpoint directory");
  map_flag(tr, "--metrics", "paths.metrics", true, "Metrics JSONL");

  auto* des = app.add_subcommand("design", "Design sequences for structures");
  auto* ev = app.add_subcommand("eval", "Recovery, perplexity and context metrics");
  auto* sw = app.add_subcommand("sweep", "Temperature sweep of sampling diversity");
  for (CLI::App* a : {des, ev, sw}) {
    map_flag(a, "--checkpoint", "paths.checkpoint", true, "Trained checkpoint");
    map_flag(a, "--input,-i", "paths.data", true, "Structures JSONL");
    map_flag(a, "--output,-o", "paths.output", true, "Output JSONL");
    map_flag(a, "--T", "decode.T", false, "Refinement steps");
    map_flag(a, "--tau", "decode.tau", false, "Sampling temperature");
    map_flag(a, "--init", "decode.init", true, "proposal or full-mask");
    map_flag(a, "--strategy", "decode.strategy", true, "argmax or sample");
    map_flag(a, "--n-samples", "decode.n_samples", false, "Designs per structure");
    map_flag(a, "--remask", "decode.remask_fraction", false, "Re-masked fraction per step");
    map_flag(a, "--fuse", "decode.fuse_encoder_logits", false, "Add encoder logits (true/false)");
  }
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of all gradients on a tiny model");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << "run with --help for usage\n";
    return kUsageError;
  }

  if (version) {
    out << "seqdesign " << kArtifactVersion << " (checkpoint format " << kCheckpointFormatVersion << ")\n";
    return kOk;
  }
  const auto subs = app.get_subcommands();
  if (subs.size() != 1) {
    err << "usage error: exactly one command is required (gen-data, pretrain-lm, train, design, eval, sweep, "
           "gradcheck)\n";
    return kUsageError;
  }
  const std::string command = subs[0]->get_name();

  try {
    json user = json::object();
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw ConfigError("cannot read config file '" + config_path + "'");
      user = json::parse(f, nullptr, false, true);
      if (user.is_discarded()) throw ConfigError("config file '" + config_path + "' is not valid JSON");
    }
    for (const auto& s : sets) apply_override(user, s);
    for (const auto& m : mapped) {
      if (m->opt->count() == 0) continue;
      if (m->is_string) {
        json* node = &user;
        std::size_t start = 0;
        while (true) {
          const auto dot = m->key.find('.', start);
          const std::string part = m->key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
          if (dot == std::string::npos) {
            (*node)[part] = m->value;
            break;
          }
          node = &(*node)[part];
          start = dot + 1;
        }
      } else {
        apply_override(user, m->key + "=" + m->value);
      }
    }
    const json cfg = resolve_config(user);
    err << "resolved config: " << cfg.dump() << '\n';

    if (command == "gen-data") return cmd_gen_data(cfg, out, err);
    if (command == "pretrain-lm") return cmd_pretrain_lm(cfg, out, err);
    if (command == "train") return cmd_train(cfg, out, err);
    if (command == "design") return cmd_design(cfg, out, err);
    if (command == "eval") return cmd_eval(cfg, out, err);
    if (command == "sweep") return cmd_sweep(cfg, out, err);
    if (command == "gradcheck") return cmd_gradcheck(cfg, out, err);
    err << "usage error: unknown command '" << command << "'\n";
    return kUsageError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const MissingCheckpointError& e) {
    err << "missing checkpoint: " << e.what() << '\n';
    return kMissingCheckpoint;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const StructureError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << " (step " << e.step() << ")\n";
    return kDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  (void)gc;
}

}  // namespace seqdesign::cli
