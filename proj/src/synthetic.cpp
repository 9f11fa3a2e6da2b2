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

#include "seqdesign/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "seqdesign/rng.hpp"
#include "seqdesign/vocab.hpp"

namespace seqdesign {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Stream purposes under (seed, index).
enum : std::uint64_t { kStreamPlan = 1, kStreamAngles = 2, kStreamSequence = 3 };

Vec3 unit(const Vec3& v) { return (1.0 / norm(v)) * v; }

// Smallest absolute angular difference in degrees.
double angle_gap(double a, double b) {
  double d = std::fmod(std::fabs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

double wrap_degrees(double a) {
  a = std::fmod(a + 180.0, 360.0);
  if (a < 0) a += 360.0;
  return a - 180.0;
}

bool in_box(double phi, double psi, double cphi, double cpsi) {
  return angle_gap(phi, cphi) <= DihedralTargets::kBoxHalfWidth &&
         angle_gap(psi, cpsi) <= DihedralTargets::kBoxHalfWidth;
}

}  // namespace

RuleTable rule_table_from_motifs(const std::array<std::string, kNumSecondaryClasses>& motifs) {
  RuleTable t{};
  for (int c = 0; c < kNumSecondaryClasses; ++c) {
    const std::string& m = motifs[c];
    if (m.empty()) throw std::invalid_argument("rule motif for class " + std::to_string(c) + " is empty");
    std::vector<int> toks;
    for (char ch : m) {
      const int tok = vocab::token_of(ch);
      if (!vocab::is_amino_acid(tok))
        throw std::invalid_argument(std::string("rule motif letter '") + ch + "' is not an amino acid");
      for (int prev : toks)
        if (prev == tok) throw std::invalid_argument("rule motif '" + m + "' repeats a letter");
      toks.push_back(tok);
    }
    t[c].fill(toks[0]);
    for (std::size_t k = 0; k < toks.size(); ++k) t[c][toks[k]] = toks[(k + 1) % toks.size()];
  }
  return t;
}

std::array<std::string, kNumSecondaryClasses> default_motifs() { return {"AELK", "VT", "G"}; }

RuleTable default_rule_table() { return rule_table_from_motifs(default_motifs()); }

void SyntheticSpec::validate() const {
  if (length_range.first < 1 || length_range.first > length_range.second)
    throw std::invalid_argument("synthetic length_range is empty");
  if (segment_length_range.first < 1 || segment_length_range.first > segment_length_range.second)
    throw std::invalid_argument("synthetic segment_length_range is empty");
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0))
    throw std::invalid_argument("synthetic noise_rate must lie in [0,1]");
  for (const auto& row : rule_table)
    for (int v : row)
      if (!vocab::is_amino_acid(v))
        throw std::invalid_argument("rule table value " + std::to_string(v) + " is not an amino acid");
}

Vec3 place_atom(const Vec3& a, const Vec3& b, const Vec3& c, double bond, double angle_deg,
                double torsion_deg) {
  const Vec3 bc = unit(c - b);
  const Vec3 n = unit(cross(b - a, bc));
  const Vec3 m = cross(n, bc);
  const double th = angle_deg * kDeg;
  const double tau = torsion_deg * kDeg;
  const double x = -bond * std::cos(th);
  const double y = bond * std::sin(th) * std::cos(tau);
  const double z = bond * std::sin(th) * std::sin(tau);
  return c + x * bc + y * m + z * n;
}

std::vector<ResidueAtoms> build_backbone(const std::vector<double>& phi,
                                         const std::vector<double>& psi,
                                         const std::vector<double>& omega) {
  using G = IdealGeometry;
  const std::size_t L = phi.size();
  if (psi.size() != L || omega.size() != L)
    throw std::invalid_argument("build_backbone: dihedral arrays differ in length");
  std::vector<ResidueAtoms> out(L);
  if (L == 0) return out;
  out[0].n = {0.0, 0.0, 0.0};
  out[0].ca = {G::kBondNCa, 0.0, 0.0};
  const double th = G::kAngleNCaC * kDeg;
  out[0].c = out[0].ca + Vec3{-G::kBondCaC * std::cos(th), G::kBondCaC * std::sin(th), 0.0};
  for (std::size_t i = 1; i < L; ++i) {
    const auto& p = out[i - 1];
    auto& r = out[i];
    r.n = place_atom(p.n, p.ca, p.c, G::kBondCN, G::kAngleCaCN, psi[i - 1]);
    r.ca = place_atom(p.ca, p.c, r.n, G::kBondNCa, G::kAngleCNCa, omega[i - 1]);
    r.c = place_atom(p.c, r.n, r.ca, G::kBondCaC, G::kAngleNCaC, phi[i]);
  }
  for (std::size_t i = 0; i < L; ++i) {
    auto& r = out[i];
    r.o = place_atom(r.n, r.ca, r.c, G::kBondCO, G::kAngleCaCO, psi[i] + 180.0);
  }
  return out;
}

SyntheticSample gen_synthetic_sample(const SyntheticSpec& spec, std::size_t index) {
  spec.validate();
  using D = DihedralTargets;
  SyntheticSample s;

  CounterRng plan = CounterRng::stream({spec.seed, index, kStreamPlan});
  const std::size_t span = spec.length_range.second - spec.length_range.first + 1;
  const std::size_t L = spec.length_range.first + plan.below(span);
  const std::size_t seg_span = spec.segment_length_range.second - spec.segment_length_range.first + 1;
  int prev_class = -1;
  while (s.classes.size() < L) {
    // Adjacent segments always change class so every segment boundary is visible.
    int c = static_cast<int>(plan.below(prev_class < 0 ? 3 : 2));
    if (prev_class >= 0 && c >= prev_class) ++c;
    const std::size_t len = spec.segment_length_range.first + plan.below(seg_span);
    for (std::size_t k = 0; k < len && s.classes.size() < L; ++k) s.classes.push_back(c);
    prev_class = c;
  }

  CounterRng ang = CounterRng::stream({spec.seed, index, kStreamAngles});
  s.phi.resize(L);
  s.psi.resize(L);
  s.omega.assign(L, 180.0);
  for (std::size_t i = 0; i < L; ++i) {
    double phi = 0, psi = 0;
    switch (static_cast<SecondaryClass>(s.classes[i])) {
      case SecondaryClass::kHelix:
        phi = D::kHelixPhi;
        psi = D::kHelixPsi;
        break;
      case SecondaryClass::kStrand:
        phi = D::kStrandPhi;
        psi = D::kStrandPsi;
        break;
      case SecondaryClass::kCoil:
        do {
          phi = -180.0 + 360.0 * ang.uniform();
          psi = -180.0 + 360.0 * ang.uniform();
        } while (in_box(phi, psi, D::kHelixPhi, D::kHelixPsi) ||
                 in_box(phi, psi, D::kStrandPhi, D::kStrandPsi));
        break;
    }
    s.phi[i] = wrap_degrees(phi + D::kNoiseSigma * ang.normal());
    s.psi[i] = wrap_degrees(psi + D::kNoiseSigma * ang.normal());
  }

  CounterRng seq = CounterRng::stream({spec.seed, index, kStreamSequence});
  std::vector<int> tokens(L);
  s.noisy.assign(L, 0);
  int prev = kRuleStart;
  for (std::size_t i = 0; i < L; ++i) {
    const bool noisy = seq.uniform() < spec.noise_rate;
    const int tok = noisy ? static_cast<int>(seq.below(vocab::kNumAminoAcids))
                          : spec.rule_table[s.classes[i]][prev];
    tokens[i] = tok;
    s.noisy[i] = noisy ? 1 : 0;
    prev = tok;
  }

  Chain chain;
  chain.chain_id = "A";
  chain.residues = build_backbone(s.phi, s.psi, s.omega);
  s.record.structure.id = "syn" + std::to_string(index);
  s.record.structure.chains.push_back(std::move(chain));
  s.record.structure.native_sequence = tokens;
  s.record.sequence = SequenceState::fully_observed(std::move(tokens));
  s.record.structure.validate();
  return s;
}

std::vector<Record> gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<Record> out;
  out.reserve(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i)
    out.push_back(std::move(gen_synthetic_sample(spec, i).record));
  return out;
}

double bayes_optimal_recovery(const SyntheticSpec& spec) {
  spec.validate();
  return (1.0 - spec.noise_rate) + spec.noise_rate / vocab::kNumAminoAcids;
}

}  // namespace seqdesign
