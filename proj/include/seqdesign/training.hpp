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

// Conditional masked language model training, sequence-only LM pretraining
// and finite-difference gradient verification.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqdesign/autodiff.hpp"
#include "seqdesign/checkpoint.hpp"
#include "seqdesign/dataset.hpp"
#include "seqdesign/model.hpp"
#include "seqdesign/params.hpp"
#include "seqdesign/rng.hpp"

namespace seqdesign {

/// Raised when a training loss becomes non-finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::uint64_t step) : std::runtime_error(what), step_(step) {}
  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_;
};

/// One masked training example. targets[i] is the native token where the
/// input is masked and -1 elsewhere.
struct MaskedEntry {
  SequenceState input;
  std::vector<int> targets;
  double ratio = 0.0;
  std::size_t masked_count() const;
};

/// r = rng.uniform_pos() (or `forced_ratio`), m = max(1, round(r L)); the
/// masked set is the first m entries of a partial Fisher-Yates pass over
/// 0..L-1 (for i < m: swap(idx[i], idx[i + rng.below(L - i)])). Throws
/// std::invalid_argument for L = 0 or a state that is not fully observed.
MaskedEntry cmlm_mask(const SequenceState& native, CounterRng& rng, std::optional<double> forced_ratio = {});

/// Residue-count batch: every entry plus the record it came from.
struct MaskedBatch {
  std::vector<std::size_t> records;
  std::vector<MaskedEntry> entries;
  std::size_t masked_count() const;
};

/// Sum of -log p(target) over rows with target >= 0, divided by `normalizer`
/// (the batch's masked count). Throws std::invalid_argument when no row has a
/// target.
ad::Var cmlm_loss(ad::Var logits, std::span<const int> targets, double normalizer);

/// Noam schedule scaled by lr_scale: d^-0.5 min(step^-0.5, step warmup^-1.5).
double noam_lr(std::size_t d_model, std::size_t step, std::size_t warmup, double lr_scale = 1.0);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

/// Adam over the trainable parameters of a store; state is keyed by name.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  /// Applies one update with learning rate lr and clears the gradients.
  void step(ParamStore& ps, double lr);
  std::size_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::map<std::string, std::pair<Matrix, Matrix>, std::less<>> moments_;
};

/// Groups records into batches of at most `batch_residues` residues (at least
/// one record each) following `order`.
std::vector<std::vector<std::size_t>> residue_batches(const std::vector<Record>& data,
                                                      const std::vector<std::size_t>& order,
                                                      std::size_t batch_residues);

struct TrainConfig {
  EncoderMode encoder_mode = EncoderMode::kScratchJoint;
  LMMode lm_mode = LMMode::kFrozen;
  std::size_t batch_residues = 6000;
  std::size_t warmup = 4000;
  double lr_scale = 1.0;
  AdamConfig adam;
  std::size_t max_epochs = 100;
  /// 0 = bounded by epochs only.
  std::size_t max_steps = 0;
  double eps_noise = 0.0;
  std::uint64_t seed = 0;
  /// Run the validation callback every this many steps (0 = never).
  std::size_t val_every = 0;
  Precision precision = Precision::kF64;

  void validate() const;
};

struct TrainLogEntry {
  std::size_t step = 0;
  double loss = 0.0;
  double adapter_loss = 0.0;
  double proposal_loss = 0.0;
  double lr = 0.0;
  std::optional<double> val_recovery;
};

struct TrainResult {
  std::vector<TrainLogEntry> log;
  std::size_t steps = 0;
};

using ValidationFn = std::function<double(ParamStore&)>;
using StepFn = std::function<void(const TrainLogEntry&)>;

/// Runs CMLM training in place on `ps` (trainability set from the modes).
/// Throws DivergenceError on a non-finite loss.
TrainResult train(const std::vector<Record>& data, ParamStore& ps, const ModelConfig& mcfg, const TrainConfig& cfg,
                  const ValidationFn& validate = nullptr, const StepFn& on_step = nullptr);

/// Loss of one batch (adapter CMLM + proposal CMLM), recorded on `t`.
struct BatchLoss {
  ad::Var total, adapter, proposal;
};
BatchLoss batch_loss(ad::Tape& t, ParamStore& ps, const ModelConfig& mcfg,
                     const std::vector<const PreparedStructure*>& structures, const std::vector<MaskedEntry>& entries,
                     const ForwardOptions& opts = {});

// ---------------------------------------------------------------------------
// Sequence-only pretraining.

struct PretrainConfig {
  std::size_t batch_residues = 2000;
  std::size_t warmup = 400;
  double lr_scale = 1.0;
  AdamConfig adam;
  std::size_t max_epochs = 10;
  std::size_t max_steps = 0;
  double select_rate = 0.15;
  std::uint64_t seed = 0;

  void validate() const;
};

/// BERT-style corruption: m = max(1, round(select_rate L)) positions by
/// partial Fisher-Yates; each selected position is MASK with probability 0.8,
/// a uniform random amino acid with 0.1, unchanged otherwise. targets holds
/// the original token at selected positions, -1 elsewhere.
struct CorruptedSequence {
  std::vector<int> tokens;
  std::vector<int> targets;
};
CorruptedSequence bert_corrupt(std::span<const int> native, double select_rate, CounterRng& rng);

struct PretrainResult {
  std::vector<double> losses;
  std::size_t steps = 0;
};

/// Trains the LM in place. Throws std::invalid_argument on an empty corpus.
PretrainResult pretrain_lm(const std::vector<std::vector<int>>& corpus, ParamStore& ps, const LMConfig& lcfg,
                           const PretrainConfig& cfg, const StepFn& on_step = nullptr);

/// Mean masked-token cross-entropy of the LM on one corrupted copy of each
/// sequence (20 amino-acid classes).
double lm_corrupted_loss(const std::vector<std::vector<int>>& corpus, ParamStore& ps, const LMConfig& lcfg,
                         double select_rate, std::uint64_t seed);

/// Fraction of MASKed positions whose argmax over the 20 amino acids equals
/// the native token (one masked copy per sequence, select_rate positions).
double lm_masked_accuracy(const std::vector<std::vector<int>>& corpus, ParamStore& ps, const LMConfig& lcfg,
                          double select_rate, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Gradient check.

struct GradcheckGroup {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
};

/// Worst relative error |ga - gn| / max(|ga|, |gn|, 1e-8) per parameter
/// group (name up to its second '.'), over up to `per_group` random scalars of
/// the trainable parameters. Numerical derivatives use the fourth-order
/// central stencil with step `epsilon`. Throws std::invalid_argument for
/// epsilon <= 0.
std::vector<GradcheckGroup> gradcheck(ParamStore& ps, const std::function<ad::Var(ad::Tape&)>& loss_fn,
                                      double epsilon, std::size_t per_group, std::uint64_t seed);

/// The standard check: CMLM loss of one record with a fixed mask, all
/// parameters trainable.
std::vector<GradcheckGroup> gradcheck_model(ParamStore& ps, const ModelConfig& mcfg, const Record& record,
                                            double epsilon, std::size_t per_group, std::uint64_t seed);

}  // namespace seqdesign
