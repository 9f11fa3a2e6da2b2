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

// Rigid-motion-invariant backbone featurization.
//
// Node features (10): sin/cos of phi, psi, omega; three undefined-angle flags;
// a degenerate-frame flag.
// Edge features (94) for i -> j: RBF of the CA-CA distance (16), unit
// displacement in the frame of i (3), R_i^T R_j flattened row-major (9),
// one-hot of the clipped signed offset j - i within a chain (65, all zero
// across chains), same-chain flag (1).

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "seqdesign/structure.hpp"
#include "seqdesign/tensor.hpp"

namespace seqdesign {

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GraphConfig {
  std::size_t k = 30;
  std::size_t rbf_bins = 16;
  double rbf_min = 2.0;
  double rbf_max = 22.0;
  int rel_pos_clip = 32;

  void validate() const;
  std::size_t node_dim() const { return 10; }
  std::size_t edge_dim() const { return rbf_bins + 3 + 9 + static_cast<std::size_t>(2 * rel_pos_clip + 1) + 1; }
};

/// Flat per-residue view of a structure. Everything downstream reads only this
/// table, so relabelling residues (with prev/next remapped) relabels outputs.
struct ResidueTable {
  std::vector<Vec3> n, ca, c;
  std::vector<int> chain;     // chain index
  std::vector<int> position;  // index within the chain
  std::vector<int> prev;      // bonded predecessor or -1
  std::vector<int> next;      // bonded successor or -1

  std::size_t size() const { return ca.size(); }
  static ResidueTable from_structure(const BackboneStructure& s);
  /// Table whose residue p is residue perm[p] of this one.
  ResidueTable permuted(const std::vector<std::size_t>& perm) const;
};

/// Orthonormal frame; axes[k] is the k-th column.
struct Frame {
  std::array<Vec3, 3> axes{};
  Vec3 origin{};
  bool degenerate = false;
};

/// Gram-Schmidt on (C - CA, N - CA): e1 = unit(C - CA), e2 = unit(N - CA
/// minus its e1 part), e3 = e1 x e2. With strict set, a residue whose
/// (C - CA) x (N - CA) has norm < 1e-8 throws GeometryError; otherwise it gets
/// the identity frame and the degenerate flag.
std::vector<Frame> local_frames(const ResidueTable& t, bool strict = true);
std::vector<Frame> local_frames(const BackboneStructure& s, bool strict = true);

struct ResidueGraph {
  /// edges[i]: up to k neighbours, nearest CA first; distances equal to
  /// 1e-6 A count as ties, broken by lower index.
  std::vector<std::vector<int>> edges;
  /// 1 where the residue starts a chain or follows a break.
  std::vector<std::uint8_t> chain_break;

  std::size_t edge_count() const;
};

ResidueGraph knn_graph(const ResidueTable& t, const GraphConfig& config);
ResidueGraph knn_graph(const BackboneStructure& s, const GraphConfig& config);

struct FeatureSet {
  Matrix node;  // L x node_dim
  Matrix edge;  // E x edge_dim, edges of residue 0 first, in neighbour order
};

/// Gaussian RBF expansion; centres evenly spaced over [rbf_min, rbf_max],
/// sigma = centre spacing.
std::vector<double> rbf(double d, const GraphConfig& config);

/// Per-residue (phi, psi, omega) in radians with validity flags. phi needs a
/// bonded predecessor, psi and omega a bonded successor.
struct Dihedrals {
  std::vector<double> phi, psi, omega;
  std::vector<std::uint8_t> has_phi, has_psi, has_omega;
};
Dihedrals backbone_dihedrals(const ResidueTable& t);

FeatureSet featurize(const ResidueTable& t, const ResidueGraph& graph, const GraphConfig& config,
                     bool strict = false);
FeatureSet featurize(const BackboneStructure& s, const ResidueGraph& graph, const GraphConfig& config,
                     bool strict = false);

/// Adds N(0, eps^2) to every atom coordinate (N, CA, C, O in residue order).
/// eps = 0 returns an exact copy. Throws std::invalid_argument for eps < 0.
BackboneStructure perturb(const BackboneStructure& s, double eps, std::uint64_t seed);

}  // namespace seqdesign
