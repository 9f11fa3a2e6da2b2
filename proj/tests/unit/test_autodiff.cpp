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
#include <functional>

#include "seqdesign/autodiff.hpp"
#include "seqdesign/training.hpp"
#include "test_util.hpp"

namespace seqdesign {
namespace {

using ad::Tape;
using ad::Var;

Matrix random_matrix(std::size_t r, std::size_t c, CounterRng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = scale * rng.normal();
  return m;
}

// Reduces any matrix to a scalar with fixed random weights: sum_ij W_ij x_ij.
Var reduce(Tape& t, Var x, std::uint64_t seed) {
  CounterRng rng(seed);
  const Matrix w = random_matrix(x.cols(), 1, rng);
  const Matrix ones(1, x.rows(), 1.0);
  return ad::matmul(ad::matmul(t.constant(ones), x), t.constant(w));
}

double worst(const std::vector<GradcheckGroup>& groups) {
  double w = 0;
  for (const auto& g : groups) w = std::max(w, g.max_rel_error);
  return w;
}

class OpGradients : public ::testing::Test {
 protected:
  void check(const std::function<Var(Tape&)>& fn, double tol = 1e-7) {
    const auto groups = gradcheck(ps_, fn, 1e-4, 64, 5);
    ASSERT_FALSE(groups.empty());
    EXPECT_LE(worst(groups), tol);
  }
  Param& add(const std::string& name, std::size_t r, std::size_t c, double scale = 1.0) {
    return ps_.add(name, random_matrix(r, c, rng_, scale));
  }
  ParamStore ps_;
  CounterRng rng_{42};
};

TEST_F(OpGradients, MatmulLinearAddScale) {
  add("x.v", 5, 4);
  add("w.v", 4, 3);
  add("b.v", 1, 3);
  check([&](Tape& t) {
    Var x = t.param(ps_.at("x.v"));
    Var y = ad::linear(x, t.param(ps_.at("w.v")), t.param(ps_.at("b.v")));
    Var z = ad::add(ad::scale(y, 0.7), ad::matmul(x, t.param(ps_.at("w.v"))));
    return reduce(t, z, 1);
  });
}

TEST_F(OpGradients, GeluAndLayerNorm) {
  add("x.v", 6, 5);
  add("g.v", 1, 5);
  add("b.v", 1, 5);
  check([&](Tape& t) {
    Var x = ad::gelu(t.param(ps_.at("x.v")));
    return reduce(t, ad::layer_norm(x, t.param(ps_.at("g.v")), t.param(ps_.at("b.v"))), 2);
  });
}

TEST_F(OpGradients, GatherSegmentScaleMask) {
  add("x.v", 4, 3);
  const std::vector<int> idx{3, -1, 0, 0, 2, 1};
  const std::vector<std::size_t> off{0, 2, 2, 6};
  const std::vector<double> w{0.5, -1.0, 2.0};
  const std::vector<double> mask{1, 0, 2, 1, 1, 0, 0, 3, 1};
  check([&](Tape& t) {
    Var g = ad::gather_rows(t.param(ps_.at("x.v")), idx);
    Var s = ad::segment_mean(g, off);
    return reduce(t, ad::mul_mask(ad::scale_rows(s, w), mask), 3);
  });
}

TEST_F(OpGradients, AttentionWithRotaryAndKeyMask) {
  add("q.v", 5, 8);
  add("k.v", 6, 8);
  add("v.v", 6, 8);
  const std::vector<double> qp{0, 1, 2, 3, 4}, kp{0, 1, 2, 3, 4, 5};
  const std::vector<std::uint8_t> valid{1, 1, 0, 1, 1, 0};
  check([&](Tape& t) {
    Var o = ad::attention(t.param(ps_.at("q.v")), t.param(ps_.at("k.v")), t.param(ps_.at("v.v")),
                          {2, true, 10000.0}, qp, kp, valid);
    return reduce(t, o, 4);
  });
}

TEST_F(OpGradients, CrossEntropy) {
  add("z.v", 5, 24);
  const std::vector<int> targets{3, -1, 19, 0, -1};
  check([&](Tape& t) { return ad::cross_entropy(t.param(ps_.at("z.v")), targets, 20, 3.0); });
}

TEST(Autodiff, MaskedKeysHaveNoInfluence) {
  CounterRng rng(3);
  const Matrix q = random_matrix(3, 4, rng), k = random_matrix(4, 4, rng), v = random_matrix(4, 4, rng);
  Matrix k2 = k, v2 = v;
  for (std::size_t c = 0; c < 4; ++c) {
    k2(2, c) = 100.0 * rng.normal();
    v2(2, c) = 100.0 * rng.normal();
  }
  const std::vector<double> pos{0, 1, 2, 3};
  const std::vector<std::uint8_t> valid{1, 1, 0, 1};
  Tape t;
  const Var a = ad::attention(t.constant(q), t.constant(k), t.constant(v), {2, true, 1e4}, {pos.data(), 3}, pos, valid);
  const Var b = ad::attention(t.constant(q), t.constant(k2), t.constant(v2), {2, true, 1e4}, {pos.data(), 3}, pos, valid);
  EXPECT_TRUE(a.value() == b.value());
}

TEST(Autodiff, RotaryScoresDependOnOffsetOnly) {
  CounterRng rng(4);
  const Matrix q0 = random_matrix(1, 8, rng), k0 = random_matrix(1, 8, rng);
  auto score = [&](double pq, double pk) {
    Matrix q = q0, k = k0;
    const std::vector<double> a{pq}, b{pk};
    ad::apply_rotary(q, 2, a, 10000.0);
    ad::apply_rotary(k, 2, b, 10000.0);
    double s = 0;
    for (std::size_t c = 0; c < 8; ++c) s += q[c] * k[c];
    return s;
  };
  for (double shift : {1.0, 7.0, 123.0}) {
    EXPECT_NEAR(score(3, 5), score(3 + shift, 5 + shift), 1e-9);
    EXPECT_NEAR(score(10, 2), score(10 + shift, 2 + shift), 1e-9);
  }
  Matrix q = q0;
  const std::vector<double> p{17.0};
  ad::apply_rotary(q, 2, p, 10000.0);
  ad::apply_rotary(q, 2, p, 10000.0, -1.0);
  EXPECT_LT(testing::max_abs_diff(q, q0), 1e-12);
}

TEST(Autodiff, FrozenParamsReceiveNoGradient) {
  ParamStore ps;
  CounterRng rng(5);
  Param& a = ps.add("a.w", random_matrix(3, 3, rng));
  Param& b = ps.add("b.w", random_matrix(3, 3, rng));
  b.trainable = false;
  Tape t;
  const Var y = ad::matmul(t.param(a), t.param(b));
  t.backward(reduce(t, y, 9));
  EXPECT_GT(testing::max_abs(a.grad), 0.0);
  EXPECT_TRUE(b.grad.empty() || testing::max_abs(b.grad) == 0.0);
}

TEST(Autodiff, InferenceModeRecordsNoGradients) {
  ParamStore ps;
  CounterRng rng(6);
  Param& a = ps.add("a.w", random_matrix(2, 2, rng));
  Tape t;
  t.set_grad_enabled(false);
  const Var y = ad::matmul(t.param(a), t.param(a));
  EXPECT_FALSE(y.requires_grad());
}

TEST(Autodiff, ShapeMismatchThrows) {
  Tape t;
  const Var a = t.constant(Matrix(2, 3)), b = t.constant(Matrix(2, 3));
  EXPECT_THROW(ad::matmul(a, b), std::invalid_argument);
  EXPECT_THROW(ad::add(a, t.constant(Matrix(3, 2))), std::invalid_argument);
}

}  // namespace
}  // namespace seqdesign
