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

// Named-parameter layer helpers shared by the encoder, LM and adapter.
// A linear layer `name` owns `name.w` (in x out) and `name.b` (1 x out); a
// layer norm owns `name.g` and `name.b`.

#include <cmath>
#include <string>

#include "seqdesign/autodiff.hpp"
#include "seqdesign/params.hpp"
#include "seqdesign/rng.hpp"

namespace seqdesign::layers {

/// Weights ~ N(0, 1/in); bias zero. zero_init zeroes both.
inline void add_linear(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out,
                       CounterRng& rng, bool zero_init = false) {
  Param& w = ps.add(name + ".w", in, out);
  ps.add(name + ".b", 1, out);
  if (!zero_init) init_normal(w.value, 1.0 / std::sqrt(static_cast<double>(in)), rng);
}

/// Output head: weights ~ N(0, 0.02^2) so the initial distribution is close
/// to uniform.
inline void add_head(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out, CounterRng& rng) {
  Param& w = ps.add(name + ".w", in, out);
  ps.add(name + ".b", 1, out);
  init_normal(w.value, 0.02, rng);
}

inline void add_layer_norm(ParamStore& ps, const std::string& name, std::size_t d) {
  ps.add(name + ".g", Matrix(1, d, 1.0));
  ps.add(name + ".b", 1, d);
}

inline std::size_t linear_count(std::size_t in, std::size_t out) { return in * out + out; }
inline std::size_t layer_norm_count(std::size_t d) { return 2 * d; }

inline ad::Var linear(ad::Tape& t, ParamStore& ps, const std::string& name, ad::Var x) {
  return ad::linear(x, t.param(ps.at(name + ".w")), t.param(ps.at(name + ".b")));
}

inline ad::Var layer_norm(ad::Tape& t, ParamStore& ps, const std::string& name, ad::Var x) {
  return ad::layer_norm(x, t.param(ps.at(name + ".g")), t.param(ps.at(name + ".b")));
}

/// Inverted dropout driven by a counter stream. A null stream or rate 0 is the
/// identity.
inline ad::Var dropout(ad::Var x, double rate, CounterRng* rng) {
  if (rng == nullptr || rate <= 0.0) return x;
  const Matrix& v = x.value();
  std::vector<double> mask(v.size());
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng->uniform() < rate ? 0.0 : keep;
  return ad::mul_mask(x, mask);
}

}  // namespace seqdesign::layers
