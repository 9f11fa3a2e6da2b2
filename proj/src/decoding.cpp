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

#include "seqdesign/decoding.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "seqdesign/vocab.hpp"

namespace seqdesign {

namespace {

enum : std::uint64_t { kStreamDesign = 21 };

std::size_t argmax20(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.begin() + vocab::kNumAminoAcids) - row.begin());
}

std::size_t sample_row(std::span<const double> probs, CounterRng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    acc += probs[c];
    if (u < acc) return c;
  }
  // Rounding left u above the total: take the last class with mass.
  for (std::size_t c = probs.size(); c-- > 0;)
    if (probs[c] > 0.0) return c;
  return 0;
}

std::vector<double> log_softmax_at(const Matrix& logits, const std::vector<int>& tokens) {
  std::vector<double> out(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto r = logits.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double v : r) z += std::exp(v - mx);
    out[i] = r[tokens[i]] - mx - std::log(z);
  }
  return out;
}

// Emits one token per free row of `logits`.
std::vector<int> emit(const Matrix& logits, const DecodingConfig& cfg, CounterRng& rng, const SequenceState* fixed,
                      std::vector<double>* confidence) {
  const std::size_t L = logits.rows();
  std::vector<int> out(L);
  const Matrix probs = temperature_scale(logits, cfg.strategy == Strategy::kSample ? cfg.tau : 1.0);
  if (confidence) confidence->assign(L, 1.0);
  for (std::size_t i = 0; i < L; ++i) {
    if (fixed && fixed->observed[i]) {
      out[i] = fixed->tokens[i];
      continue;
    }
    const std::size_t c = cfg.strategy == Strategy::kArgmax ? argmax20(logits.row(i)) : sample_row(probs.row(i), rng);
    out[i] = static_cast<int>(c);
    if (confidence) (*confidence)[i] = probs(i, c);
  }
  return out;
}

}  // namespace

InitMode init_mode_from_string(const std::string& s) {
  if (s == "proposal") return InitMode::kProposal;
  if (s == "full-mask") return InitMode::kFullMask;
  throw std::invalid_argument("unknown init mode '" + s + "' (proposal, full-mask)");
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "argmax") return Strategy::kArgmax;
  if (s == "sample") return Strategy::kSample;
  throw std::invalid_argument("unknown strategy '" + s + "' (argmax, sample)");
}

std::string to_string(InitMode m) { return m == InitMode::kProposal ? "proposal" : "full-mask"; }
std::string to_string(Strategy s) { return s == Strategy::kArgmax ? "argmax" : "sample"; }

void DecodingConfig::validate() const {
  if (T < 1) throw std::invalid_argument("decoding T must be >= 1");
  if (strategy == Strategy::kSample && !(tau > 0.0)) throw std::invalid_argument("decoding tau must be > 0");
  if (!(remask_fraction >= 0.0 && remask_fraction < 1.0))
    throw std::invalid_argument("decoding remask fraction must lie in [0,1)");
  if (n_samples < 1) throw std::invalid_argument("decoding n_samples must be >= 1");
  if (n_samples > 1 && strategy != Strategy::kSample)
    throw std::invalid_argument("decoding n_samples > 1 requires the sample strategy");
}

Matrix temperature_scale(const Matrix& logits, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be > 0 (argmax is a separate strategy)");
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto r = logits.row(i);
    auto o = p.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (std::size_t c = 0; c < r.size(); ++c) {
      o[c] = std::exp((r[c] - mx) / tau);
      z += o[c];
    }
    for (double& v : o) v /= z;
  }
  return p;
}

Matrix proposal_logit_matrix(ParamStore& ps, const ModelConfig& mcfg, const PreparedStructure& s) {
  ad::Tape t;
  t.set_grad_enabled(false);
  const ad::Var h = encode(t, ps, mcfg.encoder, s.features, s.graph);
  return proposal_logits(t, ps, h).value();
}

Matrix design_logit_matrix(ParamStore& ps, const ModelConfig& mcfg, const PreparedStructure& s,
                           const std::vector<int>& tokens, bool fuse, bool zero_structure) {
  ad::Tape t;
  t.set_grad_enabled(false);
  ForwardOptions opts;
  opts.zero_structure = zero_structure;
  const ModelOutputs o = model_forward(t, ps, mcfg, s, tokens, opts);
  Matrix logits = o.fused.logits.value();
  if (fuse) add_inplace(logits, o.proposal.value());
  return logits;
}

SequenceState init_sequence(ParamStore& ps, const ModelConfig& mcfg, const PreparedStructure& s,
                            const DecodingConfig& cfg, CounterRng& rng, const SequenceState* fixed) {
  const std::size_t L = s.length;
  if (fixed && fixed->size() != L) throw std::invalid_argument("init_sequence: fixed sequence length mismatch");
  SequenceState out = SequenceState::fully_masked(L);
  if (cfg.init == InitMode::kProposal) {
    const Matrix logits = proposal_logit_matrix(ps, mcfg, s);
    out = SequenceState::fully_observed(emit(logits, cfg, rng, nullptr, nullptr));
  }
  if (fixed)
    for (std::size_t i = 0; i < L; ++i)
      if (fixed->observed[i]) {
        out.tokens[i] = fixed->tokens[i];
        out.observed[i] = 1;
      }
  return out;
}

DesignResult design(ParamStore& ps, const ModelConfig& mcfg, const PreparedStructure& s, const DecodingConfig& cfg,
                    CounterRng& rng, const SequenceState* fixed) {
  cfg.validate();
  const std::size_t L = s.length;
  DesignResult res;
  SequenceState cur = init_sequence(ps, mcfg, s, cfg, rng, fixed);
  res.trajectory.push_back(cur.tokens);
  std::vector<double> confidence;
  if (cfg.remask_fraction > 0.0 && cfg.init == InitMode::kProposal) {
    const Matrix p = temperature_scale(proposal_logit_matrix(ps, mcfg, s), 1.0);
    confidence.assign(L, 1.0);
    for (std::size_t i = 0; i < L; ++i)
      if (vocab::is_amino_acid(cur.tokens[i])) confidence[i] = p(i, cur.tokens[i]);
  }
  Matrix logits;
  for (std::size_t t = 1; t <= cfg.T; ++t) {
    std::vector<int> input = cur.tokens;
    if (cfg.remask_fraction > 0.0 && !confidence.empty()) {
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < L; ++i)
        if (!(fixed && fixed->observed[i]) && input[i] != vocab::kMask) free.push_back(i);
      const auto n = static_cast<std::size_t>(std::floor(cfg.remask_fraction * static_cast<double>(free.size())));
      std::stable_sort(free.begin(), free.end(),
                       [&](std::size_t a, std::size_t b) { return confidence[a] < confidence[b]; });
      for (std::size_t k = 0; k < n; ++k) input[free[k]] = vocab::kMask;
    }
    logits = design_logit_matrix(ps, mcfg, s, input, cfg.fuse_encoder_logits, cfg.zero_structure);
    std::vector<int> next = emit(logits, cfg, rng, fixed, &confidence);
    res.steps_used = t;
    if (cfg.strategy == Strategy::kArgmax && next == cur.tokens) {
      res.converged = true;
      break;
    }
    cur = SequenceState::fully_observed(std::move(next));
    if (cfg.keep_trajectory) res.trajectory.push_back(cur.tokens);
  }
  if (!cfg.keep_trajectory) res.trajectory = {cur.tokens};
  res.sequence = cur.tokens;
  res.logprobs = log_softmax_at(logits, res.sequence);
  return res;
}

CounterRng design_stream(const DecodingConfig& cfg, std::size_t index, std::size_t sample) {
  return CounterRng::stream({cfg.seed, kStreamDesign, index, sample});
}

std::vector<BatchItem> batch_design(ParamStore& ps, const ModelConfig& mcfg,
                                    const std::vector<PreparedStructure>& structures, const DecodingConfig& cfg,
                                    std::size_t threads, const std::vector<std::size_t>* item_ids) {
  cfg.validate();
  if (item_ids && item_ids->size() != structures.size())
    throw std::invalid_argument("batch_design: item id count differs from structure count");
  std::vector<BatchItem> out(structures.size());
  auto run = [&](std::size_t i) {
    const std::size_t id = item_ids ? (*item_ids)[i] : i;
    try {
      for (std::size_t s = 0; s < cfg.n_samples; ++s) {
        CounterRng rng = design_stream(cfg, id, s);
        out[i].samples.push_back(design(ps, mcfg, structures[i], cfg, rng));
      }
    } catch (const std::exception& e) {
      out[i].samples.clear();
      out[i].error = e.what();
    }
  };
  if (threads <= 1 || structures.size() <= 1) {
    for (std::size_t i = 0; i < structures.size(); ++i) run(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(threads, structures.size()); ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < structures.size(); i = next++) run(i);
    });
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace seqdesign
