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

#include <cmath>
#include <numeric>

#include "reference.hpp"
#include "seqdesign/adapter.hpp"
#include "seqdesign/encoder.hpp"
#include "seqdesign/lm.hpp"
#include "seqdesign/model.hpp"
#include "seqdesign/training.hpp"
#include "seqdesign/vocab.hpp"
#include "test_util.hpp"

namespace seqdesign {
namespace {

using testing::max_abs;
using testing::max_abs_diff;

// Fills every parameter (biases and norms included) with random values so
// that reference comparisons exercise all terms.
void scramble(ParamStore& ps, std::uint64_t seed, double scale = 0.3) {
  CounterRng rng(seed);
  for (auto& p : ps)
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] += scale * rng.normal();
}

Matrix value(ParamStore& ps, const std::string& name) { return ps.at(name).value; }

Matrix ref_linear(ParamStore& ps, const std::string& name, const Matrix& x) {
  return ref::linear(x, value(ps, name + ".w"), value(ps, name + ".b"));
}

Matrix ref_ln(ParamStore& ps, const std::string& name, const Matrix& x) {
  return ref::layer_norm(x, value(ps, name + ".g"), value(ps, name + ".b"));
}

PreparedStructure prepared(const BackboneStructure& s, const GraphConfig& g) { return prepare_structure(s, g); }

// ---------------------------------------------------------------- encoder

class EncoderTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg_ = testing::tiny_config();
    records_ = testing::tiny_records(3, 7, 14, 20);
    // Break the exact distance ties of ideal geometry.
    structure_ = perturb(records_[0].structure, 0.05, 3);
  }
  ParamStore params(std::size_t layers, std::uint64_t seed = 1) {
    EncoderConfig e = cfg_.encoder;
    e.n_layers = layers;
    ParamStore ps;
    CounterRng rng(seed);
    add_encoder_params(ps, e, cfg_.graph, rng);
    return ps;
  }
  Matrix run(ParamStore& ps, std::size_t layers, const PreparedStructure& p) {
    EncoderConfig e = cfg_.encoder;
    e.n_layers = layers;
    ad::Tape t;
    t.set_grad_enabled(false);
    return encode(t, ps, e, p.features, p.graph).value();
  }
  ModelConfig cfg_;
  std::vector<Record> records_;
  BackboneStructure structure_;
};

TEST_F(EncoderTest, ZeroLayersIsInputProjection) {
  ParamStore ps = params(0);
  const PreparedStructure p = prepared(structure_, cfg_.graph);
  const Matrix out = run(ps, 0, p);
  EXPECT_LT(max_abs_diff(out, ref_linear(ps, "enc.node_in", p.features.node)), 1e-12);
}

TEST_F(EncoderTest, OneLayerMatchesStraightLineReference) {
  ParamStore ps = params(1);
  scramble(ps, 2);
  const PreparedStructure p = prepared(structure_, cfg_.graph);
  const Matrix out = run(ps, 1, p);

  const std::size_t L = p.length, d = cfg_.encoder.d_model;
  const Matrix h = ref_linear(ps, "enc.node_in", p.features.node);
  const Matrix e = ref_linear(ps, "enc.edge_in", p.features.edge);
  const Matrix ws = value(ps, "enc.l0.msg.w_self"), wn = value(ps, "enc.l0.msg.w_nbr");
  const Matrix win = value(ps, "enc.l0.msg.in.w"), bin = value(ps, "enc.l0.msg.in.b");
  Matrix agg(L, d);
  std::size_t edge = 0;
  for (std::size_t i = 0; i < L; ++i) {
    const auto& nb = p.graph.edges[i];
    for (int j : nb) {
      Matrix pre(1, d);
      for (std::size_t o = 0; o < d; ++o) {
        double s = bin(0, o);
        for (std::size_t k = 0; k < d; ++k)
          s += e(edge, k) * win(k, o) + h(i, k) * ws(k, o) + h(j, k) * wn(k, o);
        pre(0, o) = s;
      }
      const Matrix m = ref_linear(ps, "enc.l0.msg.out", ref::gelu(pre));
      for (std::size_t o = 0; o < d; ++o) agg(i, o) += m(0, o) / static_cast<double>(nb.size());
      ++edge;
    }
  }
  const Matrix h1 = ref_ln(ps, "enc.l0.ln1", ref::add(h, agg));
  const Matrix f = ref_linear(ps, "enc.l0.ffn.b", ref::gelu(ref_linear(ps, "enc.l0.ffn.a", h1)));
  const Matrix expect = ref_ln(ps, "enc.l0.ln2", ref::add(h1, f));
  EXPECT_LT(max_abs_diff(out, expect), 1e-9);
}

TEST_F(EncoderTest, ProposalHeadZeroWeightsGiveBias) {
  ParamStore ps = params(2);
  Param& w = ps.at("enc.proposal.w");
  Param& b = ps.at("enc.proposal.b");
  w.value.fill(0.0);
  for (int c = 0; c < vocab::kNumAminoAcids; ++c) b.value(0, c) = 0.1 * c - 0.5;
  const PreparedStructure p = prepared(structure_, cfg_.graph);
  ad::Tape t;
  const Matrix logits = proposal_logits(t, ps, t.constant(run(ps, 2, p))).value();
  ASSERT_EQ(logits.rows(), p.length);
  ASSERT_EQ(logits.cols(), 20u);
  for (std::size_t i = 0; i < logits.rows(); ++i)
    for (int c = 0; c < 20; ++c) EXPECT_EQ(logits(i, c), b.value(0, c));
}

TEST_F(EncoderTest, ProposalHeadOneHotWeightsCopyFeatures) {
  ParamStore ps = params(2);
  Param& w = ps.at("enc.proposal.w");
  w.value.fill(0.0);
  ps.at("enc.proposal.b").value.fill(0.0);
  for (std::size_t k = 0; k < 16; ++k) w.value(k, k) = 1.0;
  const PreparedStructure p = prepared(structure_, cfg_.graph);
  const Matrix repr = run(ps, 2, p);
  ad::Tape t;
  const Matrix logits = proposal_logits(t, ps, t.constant(repr)).value();
  for (std::size_t i = 0; i < repr.rows(); ++i) {
    for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(logits(i, k), repr(i, k));
    for (std::size_t k = 16; k < 20; ++k) EXPECT_EQ(logits(i, k), 0.0);
  }
}

TEST_F(EncoderTest, ProposalHeadMatchesGemm) {
  ParamStore ps = params(2);
  scramble(ps, 4);
  const PreparedStructure p = prepared(structure_, cfg_.graph);
  const Matrix repr = run(ps, 2, p);
  ad::Tape t;
  const Matrix logits = proposal_logits(t, ps, t.constant(repr)).value();
  EXPECT_LT(max_abs_diff(logits, ref_linear(ps, "enc.proposal", repr)), 1e-9);
}

TEST_F(EncoderTest, PermutationEquivariantExactly) {
  ParamStore ps = params(2);
  scramble(ps, 5);
  const ResidueTable table = ResidueTable::from_structure(structure_);
  std::vector<std::size_t> perm(table.size());
  std::iota(perm.begin(), perm.end(), 0);
  CounterRng rng(6);
  rng.shuffle(perm);
  const Matrix a = run(ps, 2, prepare_structure(table, cfg_.graph));
  const Matrix b = run(ps, 2, prepare_structure(table.permuted(perm), cfg_.graph));
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t c = 0; c < a.cols(); ++c) ASSERT_EQ(b(i, c), a(perm[i], c)) << "row " << i;
}

TEST_F(EncoderTest, RigidMotionInvariant) {
  ParamStore ps = params(2);
  scramble(ps, 7);
  const BackboneStructure s = records_[1].structure;
  const Matrix a = run(ps, 2, prepared(s, cfg_.graph));
  CounterRng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix b = run(ps, 2, prepared(testing::transformed(s, testing::random_rigid(rng)), cfg_.graph));
    EXPECT_LT(max_abs_diff(a, b), 1e-5 * std::max(1.0, max_abs(a)));
  }
}

TEST_F(EncoderTest, ParamCountMatchesStore) {
  ParamStore ps = params(2);
  EXPECT_EQ(ps.total_count(), encoder_param_count({16, 2, 0.0}, cfg_.graph));
}

// --------------------------------------------------------------------- LM

class LMTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg_.d_model = 16;
    cfg_.n_layers = 2;
    cfg_.n_heads = 2;
    ps_ = init_lm_params(cfg_, 11);
  }
  LMStates run(std::span<const int> tokens, std::span<const double> pos = {}) {
    tape_.set_grad_enabled(false);
    return mlm_forward(tape_, ps_, cfg_, tokens, pos);
  }
  LMConfig cfg_;
  ParamStore ps_;
  ad::Tape tape_;
};

TEST_F(LMTest, AllMaskInputGivesNormalizedRows) {
  const std::vector<int> tokens(9, vocab::kMask);
  const Matrix logits = run(tokens).logits.value();
  ASSERT_EQ(logits.rows(), 9u);
  ASSERT_EQ(logits.cols(), static_cast<std::size_t>(vocab::kSize));
  const Matrix p = softmax_rows(logits);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double s = 0;
    for (std::size_t c = 0; c < p.cols(); ++c) s += p(i, c);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST_F(LMTest, PrependedPaddingOnlyShiftsPositions) {
  scramble(ps_, 12);
  const std::vector<int> tokens{0, 5, 9, vocab::kMask, 3, 17, 2};
  const Matrix a = run(tokens).logits.value();
  for (std::size_t pad : {1u, 3u}) {
    std::vector<int> padded(pad, vocab::kPad);
    padded.insert(padded.end(), tokens.begin(), tokens.end());
    const Matrix b = run(padded).logits.value();
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t c = 0; c < a.cols(); ++c) EXPECT_NEAR(a(i, c), b(i + pad, c), 1e-5);
  }
}

TEST_F(LMTest, SingleTokenMatchesStraightLineReference) {
  scramble(ps_, 13);
  const std::vector<int> tokens{7};
  const Matrix logits = run(tokens).logits.value();
  Matrix x(1, 16);
  for (std::size_t c = 0; c < 16; ++c) x(0, c) = ps_.at("lm.embed").value(7, c);
  for (int l = 0; l < 2; ++l) {
    const std::string p = "lm.l" + std::to_string(l);
    // One key: attention returns its value row.
    const Matrix a = ref_ln(ps_, p + ".ln1", x);
    x = ref::add(x, ref_linear(ps_, p + ".attn.o", ref_linear(ps_, p + ".attn.v", a)));
    const Matrix b = ref_ln(ps_, p + ".ln2", x);
    x = ref::add(x, ref_linear(ps_, p + ".ffn.b", ref::gelu(ref_linear(ps_, p + ".ffn.a", b))));
  }
  const Matrix expect = ref_linear(ps_, "lm.head", ref_ln(ps_, "lm.ln_f", x));
  EXPECT_LT(max_abs_diff(logits, expect), 1e-9);
}

TEST_F(LMTest, MultiTokenMatchesReference) {
  scramble(ps_, 14);
  const std::vector<int> tokens{4, vocab::kPad, 11, vocab::kMask, 19};
  const std::vector<double> pos{0, 1, 2, 3, 4};
  const std::vector<std::uint8_t> valid{1, 0, 1, 1, 1};
  const Matrix logits = run(tokens).logits.value();
  Matrix x(tokens.size(), 16);
  for (std::size_t i = 0; i < tokens.size(); ++i)
    for (std::size_t c = 0; c < 16; ++c) x(i, c) = ps_.at("lm.embed").value(tokens[i], c);
  for (int l = 0; l < 2; ++l) {
    const std::string p = "lm.l" + std::to_string(l);
    const Matrix a = ref_ln(ps_, p + ".ln1", x);
    const Matrix att = ref::attention(ref_linear(ps_, p + ".attn.q", a), ref_linear(ps_, p + ".attn.k", a),
                                      ref_linear(ps_, p + ".attn.v", a), 2, pos, pos, valid);
    x = ref::add(x, ref_linear(ps_, p + ".attn.o", att));
    const Matrix b = ref_ln(ps_, p + ".ln2", x);
    x = ref::add(x, ref_linear(ps_, p + ".ffn.b", ref::gelu(ref_linear(ps_, p + ".ffn.a", b))));
  }
  const Matrix expect = ref_linear(ps_, "lm.head", ref_ln(ps_, "lm.ln_f", x));
  EXPECT_LT(max_abs_diff(logits, expect), 1e-9);
}

TEST_F(LMTest, InitialLossNearUniform) {
  CounterRng rng(15);
  std::vector<std::vector<int>> corpus(200);
  for (auto& s : corpus) {
    s.resize(40);
    for (int& v : s) v = static_cast<int>(rng.below(20));
  }
  EXPECT_NEAR(lm_corrupted_loss(corpus, ps_, cfg_, 0.15, 3), std::log(20.0), 0.05);
}

TEST_F(LMTest, InvalidTokenAndConfigErrors) {
  const std::vector<int> bad{3, 99};
  EXPECT_THROW(run(bad), std::out_of_range);
  LMConfig c = cfg_;
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST_F(LMTest, ParamCountMatchesStore) { EXPECT_EQ(ps_.total_count(), lm_param_count(cfg_)); }

// ---------------------------------------------------------------- adapter

class AdapterTest : public ::testing::Test {
 protected:
  static constexpr std::size_t kD = 16, kDs = 12, kL = 7;
  ParamStore params(bool zero_init, std::uint64_t seed = 21) {
    ParamStore ps;
    CounterRng rng(seed);
    AdapterConfig c;
    c.n_heads = 2;
    c.zero_init_output = zero_init;
    add_adapter_params(ps, c, kD, kDs, rng);
    return ps;
  }
  static Matrix random(std::size_t r, std::size_t c, std::uint64_t seed) {
    CounterRng rng(seed);
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.normal();
    return m;
  }
  FusedStates run(ParamStore& ps, const Matrix& seq, const Matrix& st, bool zero_init = false) {
    AdapterConfig c;
    c.n_heads = 2;
    c.zero_init_output = zero_init;
    std::vector<double> pos(seq.rows());
    std::iota(pos.begin(), pos.end(), 0.0);
    std::vector<std::uint8_t> valid(seq.rows(), 1);
    return adapt(tape_, ps, c, tape_.constant(seq), tape_.constant(st), pos, valid);
  }
  Matrix ffn_branch(ParamStore& ps, const Matrix& h) {
    return ref_linear(ps, "ad.ffn.up", ref::gelu(ref_linear(ps, "ad.ffn.down", ref_ln(ps, "ad.ln_ffn", h))));
  }
  ad::Tape tape_;
};

TEST_F(AdapterTest, IdentityAtInit) {
  ParamStore ps = params(true);
  const Matrix seq = random(kL, kD, 1), st = random(kL, kDs, 2);
  const FusedStates out = run(ps, seq, st, true);
  EXPECT_TRUE(out.states.value() == seq);
}

TEST_F(AdapterTest, ZeroStructureAndValueBiasSilenceAttention) {
  ParamStore ps = params(false);
  scramble(ps, 3);
  ps.at("ad.attn.v.b").value.fill(0.0);
  ps.at("ad.attn.o.b").value.fill(0.0);
  const Matrix seq = random(kL, kD, 4);
  const FusedStates out = run(ps, seq, Matrix(kL, kDs));
  EXPECT_LT(max_abs_diff(out.states.value(), ref::add(seq, ffn_branch(ps, seq))), 1e-12);
}

TEST_F(AdapterTest, MatchesStraightLineReference) {
  ParamStore ps = params(false);
  scramble(ps, 5);
  const Matrix seq = random(kL, kD, 6), st = random(kL, kDs, 7);
  const FusedStates out = run(ps, seq, st);
  std::vector<double> pos(kL);
  std::iota(pos.begin(), pos.end(), 0.0);
  const Matrix a = ref_ln(ps, "ad.ln_attn", seq);
  const Matrix att = ref::attention(ref_linear(ps, "ad.attn.q", a), ref_linear(ps, "ad.attn.k", st),
                                    ref_linear(ps, "ad.attn.v", st), 2, pos, pos, std::vector<std::uint8_t>(kL, 1));
  const Matrix h = ref::add(seq, ref_linear(ps, "ad.attn.o", att));
  const Matrix states = ref::add(h, ffn_branch(ps, h));
  EXPECT_LT(max_abs_diff(out.states.value(), states), 1e-9);
  EXPECT_LT(max_abs_diff(out.logits.value(), ref_linear(ps, "ad.head", states)), 1e-9);
}

TEST_F(AdapterTest, LengthMismatchNamesBothLengths) {
  ParamStore ps = params(false);
  try {
    run(ps, random(5, kD, 1), random(6, kDs, 2));
    FAIL() << "expected an exception";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('5'), std::string::npos) << msg;
    EXPECT_NE(msg.find('6'), std::string::npos) << msg;
  }
}

TEST(TrainableRatioTest, AdapterOnlyCountMatchesClosedForm) {
  const ModelConfig cfg = testing::tiny_config();
  ParamStore ps = init_model_params(cfg, 3);
  apply_trainability(ps, EncoderMode::kPretrainedFrozen, LMMode::kFrozen);
  const std::size_t d = 16, ds = 16, A = 20;
  const std::size_t adapter = 2 * 2 * d + 2 * (d * d + d) + 2 * (ds * d + d) + (d * (d / 2) + d / 2) +
                              (d / 2 * d + d) + (d * A + A);
  const std::size_t proposal = ds * A + A;
  const TrainableRatio r = trainable_ratio(ps);
  EXPECT_EQ(r.trainable, adapter + proposal);
  EXPECT_EQ(r.total, ps.count_with_prefix("enc.") + ps.count_with_prefix("lm.") + ps.count_with_prefix("ad."));
  EXPECT_EQ(r.ratio, static_cast<double>(adapter + proposal) / static_cast<double>(r.total));
  EXPECT_EQ(adapter_param_count(d, ds), adapter);
}

TEST(TrainableRatioTest, AllTrainableIsOne) {
  ParamStore ps = init_model_params(testing::tiny_config(), 3);
  apply_trainability(ps, EncoderMode::kScratchJoint, LMMode::kFinetune);
  EXPECT_EQ(trainable_ratio(ps).ratio, 1.0);
}

TEST(ModelForwardTest, FusedStatesEqualLMHiddenAtInit) {
  const ModelConfig cfg = testing::tiny_config(true);
  ParamStore ps = init_model_params(cfg, 5);
  const auto recs = testing::tiny_records(1, 9);
  const PreparedStructure p = prepare_structure(recs[0].structure, cfg.graph);
  std::vector<int> tokens(p.length, vocab::kMask);
  tokens[2] = 4;
  tokens.push_back(vocab::kPad);
  ad::Tape t;
  const ModelOutputs out = model_forward(t, ps, cfg, p, tokens);
  EXPECT_TRUE(out.fused.states.value() == out.lm.hidden.value());
  EXPECT_EQ(out.proposal.rows(), p.length);
  EXPECT_EQ(out.fused.logits.rows(), tokens.size());
}

}  // namespace
}  // namespace seqdesign
