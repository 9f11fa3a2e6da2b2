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

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqdesign {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

/// Signed dihedral angle (radians, in (-pi, pi]) of the four points.
double dihedral(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3);

struct ResidueAtoms {
  Vec3 n{};
  Vec3 ca{};
  Vec3 c{};
  std::optional<Vec3> o;
  /// Marks a break between this residue and the previous one in the chain.
  bool break_before = false;
};

struct Chain {
  std::string chain_id;
  std::vector<ResidueAtoms> residues;
};

class StructureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Backbone of one protein (possibly multi-chain). Residues are addressed by
/// a flat index running over chains in order.
struct BackboneStructure {
  std::string id;
  std::vector<Chain> chains;
  /// Tokens aligned with the flat residue order, when known.
  std::optional<std::vector<int>> native_sequence;

  std::size_t residue_count() const;
  const ResidueAtoms& residue(std::size_t flat) const;
  ResidueAtoms& residue(std::size_t flat);

  /// chain index of each flat residue.
  std::vector<int> chain_index() const;
  /// flag[i] = 1 when residue i starts a chain or follows a break.
  std::vector<std::uint8_t> chain_break_flags() const;

  /// Throws StructureError on non-finite coordinates, empty chains, a native
  /// sequence of the wrong length, or an unflagged intra-chain CA-CA distance
  /// outside (1.0, 5.0) A.
  void validate() const;
};

/// Flags intra-chain neighbours whose CA-CA distance lies outside (1.0, 5.0) A.
void flag_gaps(BackboneStructure& s);

/// Token ids plus an observed mask. tokens[i] == MASK iff !observed[i].
struct SequenceState {
  std::vector<int> tokens;
  std::vector<std::uint8_t> observed;

  std::size_t size() const { return tokens.size(); }
  static SequenceState fully_observed(std::vector<int> tokens);
  static SequenceState fully_masked(std::size_t length);
  /// Throws std::invalid_argument when the MASK/observed invariant is violated.
  void validate() const;
};

}  // namespace seqdesign
