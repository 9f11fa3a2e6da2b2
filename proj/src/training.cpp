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

#include "seqdesign/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqdesign/geometry.hpp"
#include "seqdesign/vocab.hpp"

namespace seqdesign {

namespace {

// Stream purposes.
enum : std::uint64_t {
  kStreamShuffle = 11,
  kStreamMask = 12,
  kStreamDropout = 13,
  kStreamPerturb = 14,
  kStreamCorrupt = 15,
  kStreamGradcheck = 16,
};

void partial_fisher_yates(std::vector<std::size_t>& idx, std::size_t m, CounterRng& rng) {
  const std::size_t L = idx.size();
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(L - i));
    std::swap(idx[i], idx[j]);
  }
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

std::size_t MaskedEntry::masked_count() const {
  return static_cast<std::size_t>(std::count_if(targets.begin(), targets.end(), [](int t) { return t >= 0; }));
}

MaskedEntry cmlm_mask(const SequenceState& native, CounterRng& rng, std::optional<double> forced_ratio) {
  const std::size_t L = native.size();
  if (L == 0) throw std::invalid_argument("cmlm_mask: empty sequence");
  for (std::size_t i = 0; i < L; ++i)
    if (!native.observed[i] || !vocab::is_amino_acid(native.tokens[i]))
      throw std::invalid_argument("cmlm_mask: position " + std::to_string(i) +
                                  " is not an observed amino acid");
  MaskedEntry e;
  e.ratio = forced_ratio ? *forced_ratio : rng.uniform_pos();
  if (!(e.ratio > 0.0 && e.ratio <= 1.0)) throw std::invalid_argument("cmlm_mask: ratio must lie in (0,1]");
  const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(e.ratio * static_cast<double>(L))));
  std::vector<std::size_t> idx = iota(L);
  partial_fisher_yates(idx, m, rng);
  e.input = native;
  e.targets.assign(L, -1);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t i = idx[r];
    e.targets[i] = native.tokens[i];
    e.input.tokens[i] = vocab::kMask;
    e.input.observed[i] = 0;
  }
  return e;
}

std::size_t MaskedBatch::masked_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.masked_count();
  return n;
}

ad::Var cmlm_loss(ad::Var logits, std::span<const int> targets, double normalizer) {
  if (std::none_of(targets.begin(), targets.end(), [](int t) { return t >= 0; }))
    throw std::invalid_argument("cmlm_loss: no masked positions");
  return ad::cross_entropy(logits, targets, vocab::kNumAminoAcids, normalizer);
}

double noam_lr(std::size_t d_model, std::size_t step, std::size_t warmup, double lr_scale) {
  if (step == 0 || warmup == 0) throw std::invalid_argument("noam_lr: step and warmup must be >= 1");
  const double s = static_cast<double>(step), w = static_cast<double>(warmup);
  return lr_scale / std::sqrt(static_cast<double>(d_model)) * std::min(1.0 / std::sqrt(s), s * std::pow(w, -1.5));
}

void Adam::step(ParamStore& ps, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& up : ps) {
    Param& p = *up;
    if (!p.trainable) continue;
    auto it = moments_.find(p.name);
    if (it == moments_.end())
      it = moments_.emplace(p.name, std::make_pair(Matrix(p.value.rows(), p.value.cols()),
                                                   Matrix(p.value.rows(), p.value.cols())))
               .first;
    Matrix& m = it->second.first;
    Matrix& v = it->second.second;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      p.value[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
    }
    p.grad.fill(0.0);
  }
}

std::vector<std::vector<std::size_t>> residue_batches(const std::vector<Record>& data,
                                                      const std::vector<std::size_t>& order,
                                                      std::size_t batch_residues) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> cur;
  std::size_t n = 0;
  for (std::size_t r : order) {
    const std::size_t len = data.at(r).sequence.size();
    if (!cur.empty() && n + len > batch_residues) {
      out.push_back(std::move(cur));
      cur.clear();
      n = 0;
    }
    cur.push_back(r);
    n += len;
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

void TrainConfig::validate() const {
  if (warmup < 1) throw std::invalid_argument("train warmup must be >= 1");
  if (batch_residues < 1) throw std::invalid_argument("train batch_residues must be >= 1");
  if (!(eps_noise >= 0.0)) throw std::invalid_argument("train eps_noise must be >= 0");
  if (!(lr_scale > 0.0)) throw std::invalid_argument("train lr_scale must be > 0");
}

BatchLoss batch_loss(ad::Tape& t, ParamStore& ps, const ModelConfig& mcfg,
                     const std::vector<const PreparedStructure*>& structures, const std::vector<MaskedEntry>& entries,
                     const ForwardOptions& opts) {
  if (structures.size() != entries.size()) throw std::invalid_argument("batch_loss: size mismatch");
  std::size_t masked = 0;
  for (const auto& e : entries) masked += e.masked_count();
  if (masked == 0) throw std::invalid_argument("batch_loss: batch has no masked positions");
  const double norm = static_cast<double>(masked);
  BatchLoss out;
  for (std::size_t b = 0; b < entries.size(); ++b) {
    const MaskedEntry& e = entries[b];
    const ModelOutputs o = model_forward(t, ps, mcfg, *structures[b], e.input.tokens, opts);
    std::vector<int> prop_targets(e.targets.begin(), e.targets.begin() + static_cast<std::ptrdiff_t>(structures[b]->length));
    const ad::Var la = cmlm_loss(o.fused.logits, e.targets, norm);
    const ad::Var lp = cmlm_loss(o.proposal, prop_targets, norm);
    out.adapter = out.adapter.valid() ? ad::add_scalars(out.adapter, la) : la;
    out.proposal = out.proposal.valid() ? ad::add_scalars(out.proposal, lp) : lp;
  }
  out.total = ad::add_scalars(out.adapter, out.proposal);
  return out;
}

TrainResult train(const std::vector<Record>& data, ParamStore& ps, const ModelConfig& mcfg, const TrainConfig& cfg,
                  const ValidationFn& validate, const StepFn& on_step) {
  cfg.validate();
  mcfg.validate();
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  std::size_t max_len = 0;
  for (const auto& r : data) max_len = std::max(max_len, r.sequence.size());
  if (cfg.batch_residues < max_len)
    throw std::invalid_argument("train batch_residues " + std::to_string(cfg.batch_residues) +
                                " is below the longest protein (" + std::to_string(max_len) + ")");
  apply_trainability(ps, cfg.encoder_mode, cfg.lm_mode);
  if (cfg.precision == Precision::kF32)
    for (auto& p : ps) quantize_f32(p->value);
  ps.zero_grad();

  std::vector<PreparedStructure> prepared;
  if (cfg.eps_noise == 0.0) {
    prepared.reserve(data.size());
    for (const auto& r : data) prepared.push_back(prepare_structure(r.structure, mcfg.graph));
  }

  Adam adam(cfg.adam);
  TrainResult result;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order = iota(data.size());
    CounterRng shuf = CounterRng::stream({cfg.seed, kStreamShuffle, epoch});
    shuf.shuffle(order);
    for (const auto& batch : residue_batches(data, order, cfg.batch_residues)) {
      if (cfg.max_steps && step >= cfg.max_steps) return result;
      ++step;
      std::vector<MaskedEntry> entries;
      std::vector<PreparedStructure> noisy;
      std::vector<const PreparedStructure*> structs;
      noisy.reserve(batch.size());
      for (std::size_t r : batch) {
        CounterRng mrng = CounterRng::stream({cfg.seed, kStreamMask, epoch, r});
        entries.push_back(cmlm_mask(data[r].sequence, mrng));
        if (cfg.eps_noise > 0.0) {
          const std::uint64_t key = CounterRng::derive_key({cfg.seed, kStreamPerturb, epoch, r});
          noisy.push_back(prepare_structure(perturb(data[r].structure, cfg.eps_noise, key), mcfg.graph));
          structs.push_back(&noisy.back());
        } else {
          structs.push_back(&prepared[r]);
        }
      }
      CounterRng drng = CounterRng::stream({cfg.seed, kStreamDropout, step});
      ForwardOptions opts;
      opts.dropout_rng = &drng;
      ad::Tape tape;
      const BatchLoss bl = batch_loss(tape, ps, mcfg, structs, entries, opts);
      TrainLogEntry log;
      log.step = step;
      log.loss = bl.total.value()[0];
      log.adapter_loss = bl.adapter.value()[0];
      log.proposal_loss = bl.proposal.value()[0];
      if (!std::isfinite(log.loss))
        throw DivergenceError("training diverged: non-finite loss at step " + std::to_string(step), step);
      tape.backward(bl.total);
      log.lr = noam_lr(mcfg.lm.d_model, step, cfg.warmup, cfg.lr_scale);
      adam.step(ps, log.lr);
      if (cfg.precision == Precision::kF32)
        for (auto& p : ps)
          if (p->trainable) quantize_f32(p->value);
      if (validate && cfg.val_every && step % cfg.val_every == 0) log.val_recovery = validate(ps);
      if (on_step) on_step(log);
      result.log.push_back(log);
      result.steps = step;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

void PretrainConfig::validate() const {
  if (warmup < 1) throw std::invalid_argument("pretrain warmup must be >= 1");
  if (batch_residues < 1) throw std::invalid_argument("pretrain batch_residues must be >= 1");
  if (!(select_rate > 0.0 && select_rate <= 1.0)) throw std::invalid_argument("pretrain select_rate must lie in (0,1]");
}

CorruptedSequence bert_corrupt(std::span<const int> native, double select_rate, CounterRng& rng) {
  const std::size_t L = native.size();
  if (L == 0) throw std::invalid_argument("bert_corrupt: empty sequence");
  CorruptedSequence out;
  out.tokens.assign(native.begin(), native.end());
  out.targets.assign(L, -1);
  const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(select_rate * static_cast<double>(L))));
  std::vector<std::size_t> idx = iota(L);
  partial_fisher_yates(idx, m, rng);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t i = idx[r];
    out.targets[i] = native[i];
    const double u = rng.uniform();
    if (u < 0.8) out.tokens[i] = vocab::kMask;
    else if (u < 0.9) out.tokens[i] = static_cast<int>(rng.below(vocab::kNumAminoAcids));
  }
  return out;
}

namespace {

std::vector<std::size_t> length_batches_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order = iota(n);
  CounterRng shuf = CounterRng::stream({seed, kStreamShuffle, epoch});
  shuf.shuffle(order);
  return order;
}

}  // namespace

PretrainResult pretrain_lm(const std::vector<std::vector<int>>& corpus, ParamStore& ps, const LMConfig& lcfg,
                           const PretrainConfig& cfg, const StepFn& on_step) {
  cfg.validate();
  lcfg.validate();
  if (corpus.empty()) throw std::invalid_argument("pretrain_lm: empty corpus");
  ps.set_trainable_prefix("lm.", true);
  ps.zero_grad();
  Adam adam(cfg.adam);
  PretrainResult result;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto order = length_batches_order(corpus.size(), cfg.seed, epoch);
    std::vector<std::vector<std::size_t>> batches;
    std::vector<std::size_t> cur;
    std::size_t n = 0;
    for (std::size_t r : order) {
      if (!cur.empty() && n + corpus[r].size() > cfg.batch_residues) {
        batches.push_back(std::move(cur));
        cur.clear();
        n = 0;
      }
      cur.push_back(r);
      n += corpus[r].size();
    }
    if (!cur.empty()) batches.push_back(std::move(cur));
    for (const auto& batch : batches) {
      if (cfg.max_steps && step >= cfg.max_steps) return result;
      ++step;
      std::vector<CorruptedSequence> items;
      std::size_t selected = 0;
      for (std::size_t r : batch) {
        CounterRng crng = CounterRng::stream({cfg.seed, kStreamCorrupt, epoch, r});
        items.push_back(bert_corrupt(corpus[r], cfg.select_rate, crng));
        for (int tg : items.back().targets) selected += tg >= 0;
      }
      CounterRng drng = CounterRng::stream({cfg.seed, kStreamDropout, step});
      ad::Tape tape;
      ad::Var loss;
      for (const auto& it : items) {
        const LMStates st = mlm_forward(tape, ps, lcfg, it.tokens, {}, &drng);
        const ad::Var l =
            ad::cross_entropy(st.logits, it.targets, vocab::kNumAminoAcids, static_cast<double>(selected));
        loss = loss.valid() ? ad::add_scalars(loss, l) : l;
      }
      const double lv = loss.value()[0];
      if (!std::isfinite(lv))
        throw DivergenceError("pretraining diverged: non-finite loss at step " + std::to_string(step), step);
      tape.backward(loss);
      TrainLogEntry log;
      log.step = step;
      log.loss = lv;
      log.lr = noam_lr(lcfg.d_model, step, cfg.warmup, cfg.lr_scale);
      adam.step(ps, log.lr);
      result.losses.push_back(lv);
      result.steps = step;
      if (on_step) on_step(log);
    }
  }
  return result;
}

double lm_corrupted_loss(const std::vector<std::vector<int>>& corpus, ParamStore& ps, const LMConfig& lcfg,
                         double select_rate, std::uint64_t seed) {
  if (corpus.empty()) throw std::invalid_argument("lm_corrupted_loss: empty corpus");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    CounterRng rng = CounterRng::stream({seed, kStreamCorrupt, r});
    const CorruptedSequence c = bert_corrupt(corpus[r], select_rate, rng);
    ad::Tape tape;
    tape.set_grad_enabled(false);
    const LMStates st = mlm_forward(tape, ps, lcfg, c.tokens);
    total += ad::cross_entropy(st.logits, c.targets, vocab::kNumAminoAcids, 1.0).value()[0];
    for (int tg : c.targets) count += tg >= 0;
  }
  return total / static_cast<double>(count);
}

double lm_masked_accuracy(const std::vector<std::vector<int>>& corpus, ParamStore& ps, const LMConfig& lcfg,
                          double select_rate, std::uint64_t seed) {
  if (corpus.empty()) throw std::invalid_argument("lm_masked_accuracy: empty corpus");
  std::size_t hit = 0, count = 0;
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    const std::size_t L = corpus[r].size();
    CounterRng rng = CounterRng::stream({seed, kStreamMask, r});
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(select_rate * static_cast<double>(L))));
    std::vector<std::size_t> idx = iota(L);
    partial_fisher_yates(idx, m, rng);
    std::vector<int> tokens = corpus[r];
    for (std::size_t k = 0; k < m; ++k) tokens[idx[k]] = vocab::kMask;
    ad::Tape tape;
    tape.set_grad_enabled(false);
    const Matrix& logits = mlm_forward(tape, ps, lcfg, tokens).logits.value();
    for (std::size_t k = 0; k < m; ++k) {
      const auto row = logits.row(idx[k]);
      const auto best = std::max_element(row.begin(), row.begin() + vocab::kNumAminoAcids) - row.begin();
      hit += static_cast<int>(best) == corpus[r][idx[k]];
      ++count;
    }
  }
  return static_cast<double>(hit) / static_cast<double>(count);
}

// ---------------------------------------------------------------------------

std::vector<GradcheckGroup> gradcheck(ParamStore& ps, const std::function<ad::Var(ad::Tape&)>& loss_fn,
                                      double epsilon, std::size_t per_group, std::uint64_t seed) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("gradcheck: epsilon must be a positive finite step");
  ps.zero_grad();
  {
    ad::Tape tape;
    const ad::Var loss = loss_fn(tape);
    tape.backward(loss);
  }
  auto eval = [&]() {
    ad::Tape tape;
    tape.set_grad_enabled(false);
    return loss_fn(tape).value()[0];
  };

  // Group name: parameter name up to its second '.'.
  std::map<std::string, std::vector<std::pair<Param*, std::size_t>>> groups;
  std::vector<std::string> group_order;
  for (auto& up : ps) {
    Param& p = *up;
    if (!p.trainable) continue;
    const auto first = p.name.find('.');
    const auto second = first == std::string::npos ? std::string::npos : p.name.find('.', first + 1);
    const std::string g = p.name.substr(0, second);
    if (!groups.count(g)) group_order.push_back(g);
    for (std::size_t i = 0; i < p.value.size(); ++i) groups[g].emplace_back(&p, i);
  }

  std::vector<GradcheckGroup> out;
  CounterRng rng = CounterRng::stream({seed, kStreamGradcheck});
  for (const std::string& g : group_order) {
    auto& cand = groups[g];
    rng.shuffle(cand);
    GradcheckGroup res;
    res.name = g;
    const std::size_t n = std::min(per_group, cand.size());
    for (std::size_t c = 0; c < n; ++c) {
      Param& p = *cand[c].first;
      const std::size_t i = cand[c].second;
      const double w = p.value[i];
      const double ga = p.grad[i];
      auto at = [&](double delta) {
        p.value[i] = w + delta;
        return eval();
      };
      const double fp1 = at(epsilon), fm1 = at(-epsilon), fp2 = at(2 * epsilon), fm2 = at(-2 * epsilon);
      p.value[i] = w;
      const double gn = (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * epsilon);
      const double rel = std::fabs(ga - gn) / std::max({std::fabs(ga), std::fabs(gn), 1e-8});
      res.max_rel_error = std::max(res.max_rel_error, rel);
      ++res.checked;
    }
    out.push_back(res);
  }
  ps.zero_grad();
  return out;
}

std::vector<GradcheckGroup> gradcheck_model(ParamStore& ps, const ModelConfig& mcfg, const Record& record,
                                            double epsilon, std::size_t per_group, std::uint64_t seed) {
  ps.set_trainable(true);
  const PreparedStructure prep = prepare_structure(record.structure, mcfg.graph);
  CounterRng mrng = CounterRng::stream({seed, kStreamMask});
  const MaskedEntry entry = cmlm_mask(record.sequence, mrng, 0.5);
  const std::vector<const PreparedStructure*> structs{&prep};
  const std::vector<MaskedEntry> entries{entry};
  return gradcheck(
      ps, [&](ad::Tape& t) { return batch_loss(t, ps, mcfg, structs, entries).total; }, epsilon, per_group, seed);
}

}  // namespace seqdesign
