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

// Synthetic backbone/sequence corpus with a known sequence rule.
//
// Each sample is a single chain. A segment plan assigns every residue a
// secondary-structure class; dihedrals follow the class; coordinates come from
// ideal-geometry chain extension; the sequence follows a lookup table keyed
// by (class, previous residue) with uniform noise.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "seqdesign/dataset.hpp"
#include "seqdesign/structure.hpp"

namespace seqdesign {

enum class SecondaryClass : int { kHelix = 0, kStrand = 1, kCoil = 2 };
inline constexpr int kNumSecondaryClasses = 3;
/// Predecessor slot used for the first residue of a chain.
inline constexpr int kRuleStart = 20;

/// rule[class][predecessor] -> amino-acid token. Predecessor is 0..19 or kRuleStart.
using RuleTable = std::array<std::array<int, 21>, kNumSecondaryClasses>;

/// Table in which each class cycles through its motif (a string of distinct
/// one-letter codes): inside the motif a residue is followed by the next motif
/// letter, and anything else (including the chain start) by the first one.
/// Throws std::invalid_argument on an empty motif or a non-amino-acid letter.
RuleTable rule_table_from_motifs(const std::array<std::string, kNumSecondaryClasses>& motifs);

std::array<std::string, kNumSecondaryClasses> default_motifs();
RuleTable default_rule_table();

struct SyntheticSpec {
  std::size_t n_samples = 100;
  std::pair<std::size_t, std::size_t> length_range{30, 60};
  std::pair<std::size_t, std::size_t> segment_length_range{2, 6};
  double noise_rate = 0.1;
  RuleTable rule_table = default_rule_table();
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on an empty range, eta outside [0,1], or a
  /// table value that is not an amino-acid index.
  void validate() const;
};

/// Ideal backbone geometry (A and degrees).
struct IdealGeometry {
  static constexpr double kBondNCa = 1.458;
  static constexpr double kBondCaC = 1.525;
  static constexpr double kBondCN = 1.329;
  static constexpr double kBondCO = 1.231;
  static constexpr double kAngleNCaC = 111.2;
  static constexpr double kAngleCaCN = 116.2;
  static constexpr double kAngleCNCa = 121.7;
  static constexpr double kAngleCaCO = 120.5;
};

/// Class-typical dihedral centres (degrees) and generator noise.
struct DihedralTargets {
  static constexpr double kHelixPhi = -60.0, kHelixPsi = -45.0;
  static constexpr double kStrandPhi = -135.0, kStrandPsi = 135.0;
  /// Half-width of the helix/strand boxes excluded from coil sampling.
  static constexpr double kBoxHalfWidth = 40.0;
  static constexpr double kNoiseSigma = 8.0;
};

/// Places atom d so that |d-c| = bond, angle(b,c,d) = angle_deg and
/// dihedral(a,b,c,d) = torsion_deg.
Vec3 place_atom(const Vec3& a, const Vec3& b, const Vec3& c, double bond, double angle_deg,
                double torsion_deg);

/// Builds one chain from per-residue dihedrals (degrees). phi[0] is unused;
/// psi[i] and omega[i] set the geometry between residue i and i+1.
std::vector<ResidueAtoms> build_backbone(const std::vector<double>& phi,
                                         const std::vector<double>& psi,
                                         const std::vector<double>& omega);

struct SyntheticSample {
  Record record;
  std::vector<int> classes;
  std::vector<double> phi, psi, omega;
  /// 1 where the residue was drawn from the noise distribution.
  std::vector<std::uint8_t> noisy;
};

/// Sample `index` of the corpus. Depends only on (spec, index).
SyntheticSample gen_synthetic_sample(const SyntheticSpec& spec, std::size_t index);
std::vector<Record> gen_synthetic(const SyntheticSpec& spec);

/// Expected recovery of the predictor that knows the class and the previous
/// residue: (1 - eta) + eta / 20.
double bayes_optimal_recovery(const SyntheticSpec& spec);

}  // namespace seqdesign
