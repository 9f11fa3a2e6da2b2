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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqdesign/training.hpp"
#include "seqdesign/vocab.hpp"
#include "test_util.hpp"

namespace seqdesign {
namespace {

SequenceState native(const std::string& letters) {
  return SequenceState::fully_observed(vocab::tokenize(letters));
}

// ------------------------------------------------------------------ masking

TEST(CmlmMask, ForcedFullRatioMasksEverything) {
  CounterRng rng(1);
  const MaskedEntry e = cmlm_mask(native("ACDE"), rng, 1.0);
  EXPECT_EQ(e.masked_count(), 4u);
  const std::vector<int> expect = vocab::tokenize("ACDE");
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(e.input.tokens[i], vocab::kMask);
    EXPECT_FALSE(e.input.observed[i]);
    EXPECT_EQ(e.targets[i], expect[i]);
  }
}

TEST(CmlmMask, SingleResidueAlwaysMasked) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CounterRng rng(seed);
    const MaskedEntry e = cmlm_mask(native("W"), rng);
    EXPECT_EQ(e.masked_count(), 1u);
    EXPECT_EQ(e.input.tokens[0], vocab::kMask);
  }
}

TEST(CmlmMask, SubsetReplaysThroughGenerator) {
  const SequenceState s = native("ACDEFGHIKL");
  CounterRng rng(77);
  const MaskedEntry e = cmlm_mask(s, rng, 0.5);

  CounterRng replay(77);
  std::vector<std::size_t> idx(10);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < 5; ++i) std::swap(idx[i], idx[i + replay.below(10 - i)]);
  std::vector<int> expect_targets(10, -1);
  for (std::size_t i = 0; i < 5; ++i) expect_targets[idx[i]] = s.tokens[idx[i]];
  EXPECT_EQ(e.targets, expect_targets);
  for (std::size_t i = 0; i < 10; ++i)
    EXPECT_EQ(e.input.tokens[i], expect_targets[i] >= 0 ? vocab::kMask : s.tokens[i]);
}

TEST(CmlmMask, DrawnRatioIsInUnitInterval) {
  const SequenceState s = native("ACDEFGHIKLMNPQRSTVWY");
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    CounterRng rng(seed);
    const MaskedEntry e = cmlm_mask(s, rng);
    EXPECT_GT(e.ratio, 0.0);
    EXPECT_LE(e.ratio, 1.0);
    EXPECT_GE(e.masked_count(), 1u);
  }
}

TEST(CmlmMask, Errors) {
  CounterRng rng(1);
  EXPECT_THROW(cmlm_mask(SequenceState{}, rng), std::invalid_argument);
  EXPECT_THROW(cmlm_mask(SequenceState::fully_masked(3), rng), std::invalid_argument);
  EXPECT_THROW(cmlm_mask(native("AC"), rng, 0.0), std::invalid_argument);
}

// ------------------------------------------------------------------- loss

TEST(CmlmLoss, UniformLogitsGiveLogTwenty) {
  ad::Tape t;
  const std::vector<int> targets{0, -1, 19, 7, -1, 3};
  const ad::Var l = cmlm_loss(t.constant(Matrix(6, vocab::kSize, 0.25)), targets, 4.0);
  EXPECT_NEAR(l.value()[0], std::log(20.0), 1e-6);
}

TEST(CmlmLoss, GradientVanishesAtObservedAndPaddedPositions) {
  ParamStore ps;
  CounterRng rng(3);
  Param& z = ps.add("z.logits", 6, vocab::kSize);
  for (std::size_t i = 0; i < z.value.size(); ++i) z.value[i] = rng.normal();
  const std::vector<int> targets{5, -1, 11, -1, -1, 2};  // rows 3-4 play the padded tail
  ad::Tape t;
  t.backward(cmlm_loss(t.param(z), targets, 3.0));
  for (std::size_t i = 0; i < 6; ++i) {
    double row = 0;
    for (std::size_t c = 0; c < z.grad.cols(); ++c) row = std::max(row, std::fabs(z.grad(i, c)));
    if (targets[i] < 0) EXPECT_EQ(row, 0.0) << "row " << i;
    else EXPECT_GT(row, 0.0) << "row " << i;
  }
  // Special tokens never receive probability mass in the loss.
  for (std::size_t i = 0; i < 6; ++i)
    for (int c = vocab::kNumAminoAcids; c < vocab::kSize; ++c) EXPECT_EQ(z.grad(i, c), 0.0);
}

TEST(CmlmLoss, NoMaskedPositionsIsAnError) {
  ad::Tape t;
  const std::vector<int> targets{-1, -1};
  EXPECT_THROW(cmlm_loss(t.constant(Matrix(2, 20)), targets, 1.0), std::invalid_argument);
}

class BatchLossTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg_ = testing::tiny_config(false);
    ps_ = init_model_params(cfg_, 4);
    recs_ = testing::tiny_records(3, 5);
    for (const auto& r : recs_) prepared_.push_back(prepare_structure(r.structure, cfg_.graph));
    for (std::size_t i = 0; i < recs_.size(); ++i) {
      CounterRng rng(100 + i);
      entries_.push_back(cmlm_mask(recs_[i].sequence, rng));
    }
  }
  double loss(const std::vector<PreparedStructure>& ps, const std::vector<MaskedEntry>& entries) {
    std::vector<const PreparedStructure*> ptr;
    for (const auto& p : ps) ptr.push_back(&p);
    ad::Tape t;
    return batch_loss(t, ps_, cfg_, ptr, entries).total.value()[0];
  }
  ModelConfig cfg_;
  ParamStore ps_;
  std::vector<Record> recs_;
  std::vector<PreparedStructure> prepared_;
  std::vector<MaskedEntry> entries_;
};

TEST_F(BatchLossTest, InvariantToPaddingAmount) {
  const double base = loss(prepared_, entries_);
  for (std::size_t pad : {1u, 5u, 17u}) {
    std::vector<MaskedEntry> padded = entries_;
    for (auto& e : padded) {
      e.input.tokens.insert(e.input.tokens.end(), pad, vocab::kPad);
      e.input.observed.insert(e.input.observed.end(), pad, 0);
      e.targets.insert(e.targets.end(), pad, -1);
    }
    EXPECT_EQ(loss(prepared_, padded), base) << "pad " << pad;
  }
}

TEST_F(BatchLossTest, InvariantToRigidMotion) {
  const double base = loss(prepared_, entries_);
  CounterRng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<PreparedStructure> moved;
    for (const auto& r : recs_)
      moved.push_back(prepare_structure(testing::transformed(r.structure, testing::random_rigid(rng)), cfg_.graph));
    EXPECT_NEAR(loss(moved, entries_), base, 1e-5 * std::fabs(base));
  }
}

TEST_F(BatchLossTest, TotalIsAdapterPlusProposal) {
  std::vector<const PreparedStructure*> ptr;
  for (const auto& p : prepared_) ptr.push_back(&p);
  ad::Tape t;
  const BatchLoss bl = batch_loss(t, ps_, cfg_, ptr, entries_);
  EXPECT_EQ(bl.total.value()[0], bl.adapter.value()[0] + bl.proposal.value()[0]);
}

// ------------------------------------------------------------ optimisation

TEST(NoamSchedule, WarmupThenInverseSqrtDecay) {
  const double peak = noam_lr(64, 100, 100);
  EXPECT_NEAR(peak, 1.0 / 8.0 / 10.0, 1e-15);
  EXPECT_NEAR(noam_lr(64, 50, 100), peak / 2, 1e-15);
  EXPECT_NEAR(noam_lr(64, 400, 100), peak / 2, 1e-15);
  EXPECT_NEAR(noam_lr(64, 400, 100, 3.0), 3 * peak / 2, 1e-15);
  EXPECT_THROW(noam_lr(64, 0, 100), std::invalid_argument);
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  ParamStore ps;
  Param& p = ps.add("x.w", Matrix(1, 3, 1.0));
  p.grad(0, 0) = 2.0;
  p.grad(0, 1) = -0.5;
  Adam adam({0.9, 0.98, 1e-12});
  adam.step(ps, 0.1);
  EXPECT_NEAR(p.value(0, 0), 0.9, 1e-12);
  EXPECT_NEAR(p.value(0, 1), 1.1, 1e-12);
  EXPECT_EQ(p.value(0, 2), 1.0);
  EXPECT_EQ(p.grad(0, 0), 0.0);
}

TEST(ResidueBatches, RespectBudgetAndCoverEveryRecord) {
  const auto recs = testing::tiny_records(40, 3, 10, 30);
  std::vector<std::size_t> order(recs.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batches = residue_batches(recs, order, 70);
  std::vector<std::size_t> seen;
  for (const auto& b : batches) {
    std::size_t n = 0;
    for (std::size_t r : b) n += recs[r].sequence.size();
    EXPECT_LE(n, 70u);
    seen.insert(seen.end(), b.begin(), b.end());
  }
  EXPECT_EQ(seen, order);
}

class TrainTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg_ = testing::tiny_config();
    recs_ = testing::tiny_records(24, 8);
  }
  TrainConfig train_config(std::size_t steps) {
    TrainConfig tc;
    tc.batch_residues = 64;
    tc.warmup = 10;
    tc.max_steps = steps;
    tc.seed = 3;
    return tc;
  }
  ModelConfig cfg_;
  std::vector<Record> recs_;
};

TEST_F(TrainTest, FrozenTensorsStayBitwiseUnchanged) {
  ParamStore ps = init_model_params(cfg_, 1);
  const ParamStore before = ps;
  TrainConfig tc = train_config(100);
  tc.encoder_mode = EncoderMode::kPretrainedFrozen;
  tc.max_epochs = 1000;
  const TrainResult r = train(recs_, ps, cfg_, tc);
  ASSERT_EQ(r.steps, 100u);
  std::size_t frozen = 0, moved = 0;
  for (const auto& p : ps) {
    const Matrix& old = before.at(p->name).value;
    const bool changed = !(old == p->value);
    if (!p->trainable) {
      ++frozen;
      EXPECT_FALSE(changed) << p->name;
    } else {
      moved += changed;
    }
  }
  EXPECT_GT(frozen, 0u);
  EXPECT_GT(moved, 0u);
  EXPECT_FALSE(ps.at("lm.embed").trainable);
  EXPECT_FALSE(ps.at("enc.node_in.w").trainable);
  EXPECT_TRUE(ps.at("enc.proposal.w").trainable);
}

TEST_F(TrainTest, SameSeedGivesIdenticalRuns) {
  ParamStore a = init_model_params(cfg_, 1), b = init_model_params(cfg_, 1);
  const TrainConfig tc = train_config(8);
  const TrainResult ra = train(recs_, a, cfg_, tc), rb = train(recs_, b, cfg_, tc);
  ASSERT_EQ(ra.log.size(), rb.log.size());
  for (std::size_t i = 0; i < ra.log.size(); ++i) EXPECT_EQ(ra.log[i].loss, rb.log[i].loss);
  for (const auto& p : a) EXPECT_TRUE(p->value == b.at(p->name).value) << p->name;
}

TEST_F(TrainTest, PerturbationNoiseStillDeterministic) {
  ParamStore a = init_model_params(cfg_, 1), b = init_model_params(cfg_, 1);
  TrainConfig tc = train_config(4);
  tc.eps_noise = 0.2;
  const TrainResult ra = train(recs_, a, cfg_, tc), rb = train(recs_, b, cfg_, tc);
  for (std::size_t i = 0; i < ra.log.size(); ++i) EXPECT_EQ(ra.log[i].loss, rb.log[i].loss);
}

TEST_F(TrainTest, ValidationCallbackRunsOnSchedule) {
  ParamStore ps = init_model_params(cfg_, 1);
  TrainConfig tc = train_config(6);
  tc.val_every = 2;
  int calls = 0;
  const TrainResult r = train(recs_, ps, cfg_, tc, [&](ParamStore&) { return 0.5 + ++calls; });
  EXPECT_EQ(calls, 3);
  EXPECT_FALSE(r.log[0].val_recovery.has_value());
  EXPECT_EQ(r.log[1].val_recovery.value(), 1.5);
}

TEST_F(TrainTest, ConfigErrors) {
  ParamStore ps = init_model_params(cfg_, 1);
  TrainConfig tc = train_config(1);
  tc.batch_residues = 5;
  try {
    train(recs_, ps, cfg_, tc);
    FAIL() << "expected an exception";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("longest protein"), std::string::npos) << e.what();
  }
  tc = train_config(1);
  tc.warmup = 0;
  EXPECT_THROW(train(recs_, ps, cfg_, tc), std::invalid_argument);
  EXPECT_THROW(train({}, ps, cfg_, train_config(1)), std::invalid_argument);
}

// ------------------------------------------------------------- pretraining

TEST(BertCorrupt, SelectsRoundedFractionAndKeepsTargets) {
  const std::vector<int> s = vocab::tokenize("ACDEFGHIKLMNPQRSTVWY");
  std::size_t masked = 0, random = 0, kept = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    CounterRng rng(seed);
    const CorruptedSequence c = bert_corrupt(s, 0.15, rng);
    std::size_t sel = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (c.targets[i] < 0) {
        EXPECT_EQ(c.tokens[i], s[i]);
        continue;
      }
      ++sel;
      EXPECT_EQ(c.targets[i], s[i]);
      if (c.tokens[i] == vocab::kMask) ++masked;
      else if (c.tokens[i] == s[i]) ++kept;
      else ++random;
    }
    EXPECT_EQ(sel, 3u);
  }
  const double n = 1200.0;
  // Random replacements can hit the native letter (1 in 20).
  EXPECT_NEAR(masked / n, 0.8, 4 * std::sqrt(0.16 / n));
  EXPECT_NEAR(kept / n, 0.1 + 0.1 / 20, 4 * std::sqrt(0.1 / n));
  EXPECT_NEAR(random / n, 0.1 * 19 / 20, 4 * std::sqrt(0.1 / n));
}

TEST(Pretrain, SameSeedSameLossCurve) {
  LMConfig lc;
  lc.d_model = 16;
  lc.n_layers = 1;
  lc.n_heads = 2;
  std::vector<std::vector<int>> corpus;
  for (const auto& r : testing::tiny_records(30, 2)) corpus.push_back(r.sequence.tokens);
  PretrainConfig pc;
  pc.batch_residues = 100;
  pc.max_epochs = 2;
  pc.seed = 4;
  ParamStore a = init_lm_params(lc, 1), b = init_lm_params(lc, 1);
  const PretrainResult ra = pretrain_lm(corpus, a, lc, pc), rb = pretrain_lm(corpus, b, lc, pc);
  ASSERT_GT(ra.steps, 2u);
  EXPECT_EQ(ra.losses, rb.losses);
  pc.seed = 5;
  ParamStore c = init_lm_params(lc, 1);
  EXPECT_NE(pretrain_lm(corpus, c, lc, pc).losses, ra.losses);
}

TEST(Pretrain, EmptyCorpusIsAnError) {
  LMConfig lc;
  lc.d_model = 16;
  lc.n_layers = 1;
  lc.n_heads = 2;
  ParamStore ps = init_lm_params(lc, 1);
  EXPECT_THROW(pretrain_lm({}, ps, lc, PretrainConfig{}), std::invalid_argument);
}

// --------------------------------------------------------------- gradcheck

TEST(Gradcheck, SquareProbe) {
  ParamStore ps;
  Param& w = ps.add("probe.w", Matrix(1, 1, 3.0));
  const auto loss = [&](ad::Tape& t) {
    const ad::Var v = t.param(w);
    return ad::matmul(v, v);
  };
  ad::Tape t;
  t.backward(loss(t));
  EXPECT_NEAR(w.grad[0], 6.0, 1e-8);
  w.grad.fill(0.0);
  const auto groups = gradcheck(ps, loss, 1e-4, 1, 0);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].checked, 1u);
  EXPECT_LE(groups[0].max_rel_error * 6.0, 1e-8);
  EXPECT_THROW(gradcheck(ps, loss, 0.0, 1, 0), std::invalid_argument);
}

TEST(Gradcheck, TinyModelWithinTolerance) {
  const ModelConfig cfg = testing::tiny_config(false);
  ParamStore ps = init_model_params(cfg, 2);
  const auto recs = testing::tiny_records(1, 3, 12, 12);
  const auto groups = gradcheck_model(ps, cfg, recs[0], 1e-4, 8, 1);
  EXPECT_GE(groups.size(), 10u);
  for (const auto& g : groups) EXPECT_LE(g.max_rel_error, 1e-4) << g.name;
}

}  // namespace
}  // namespace seqdesign
