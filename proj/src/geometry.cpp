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

#include "seqdesign/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "seqdesign/rng.hpp"

namespace seqdesign {

void GraphConfig::validate() const {
  if (rbf_bins < 2) throw std::invalid_argument("graph rbf_bins must be >= 2");
  if (!(rbf_min < rbf_max)) throw std::invalid_argument("graph rbf range must satisfy min < max");
  if (rel_pos_clip < 0) throw std::invalid_argument("graph rel_pos_clip must be >= 0");
}

ResidueTable ResidueTable::from_structure(const BackboneStructure& s) {
  ResidueTable t;
  int flat = 0;
  for (std::size_t c = 0; c < s.chains.size(); ++c) {
    const auto& res = s.chains[c].residues;
    for (std::size_t i = 0; i < res.size(); ++i, ++flat) {
      t.n.push_back(res[i].n);
      t.ca.push_back(res[i].ca);
      t.c.push_back(res[i].c);
      t.chain.push_back(static_cast<int>(c));
      t.position.push_back(static_cast<int>(i));
      const bool bonded_prev = i > 0 && !res[i].break_before;
      const bool bonded_next = i + 1 < res.size() && !res[i + 1].break_before;
      t.prev.push_back(bonded_prev ? flat - 1 : -1);
      t.next.push_back(bonded_next ? flat + 1 : -1);
    }
  }
  return t;
}

ResidueTable ResidueTable::permuted(const std::vector<std::size_t>& perm) const {
  if (perm.size() != size()) throw std::invalid_argument("permutation length differs from table size");
  std::vector<int> inverse(size(), -1);
  for (std::size_t p = 0; p < perm.size(); ++p) inverse.at(perm[p]) = static_cast<int>(p);
  auto remap = [&](int old) { return old < 0 ? -1 : inverse[static_cast<std::size_t>(old)]; };
  ResidueTable t;
  for (std::size_t p = 0; p < perm.size(); ++p) {
    const std::size_t o = perm[p];
    t.n.push_back(n[o]);
    t.ca.push_back(ca[o]);
    t.c.push_back(c[o]);
    t.chain.push_back(chain[o]);
    t.position.push_back(position[o]);
    t.prev.push_back(remap(prev[o]));
    t.next.push_back(remap(next[o]));
  }
  return t;
}

std::vector<Frame> local_frames(const ResidueTable& t, bool strict) {
  std::vector<Frame> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    Frame& f = out[i];
    f.origin = t.ca[i];
    const Vec3 u = t.c[i] - t.ca[i];
    const Vec3 v = t.n[i] - t.ca[i];
    if (norm(cross(u, v)) < 1e-8) {
      if (strict)
        throw GeometryError("degenerate frame at residue " + std::to_string(i) + ": N, CA, C are collinear");
      f.axes = {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
      f.degenerate = true;
      continue;
    }
    const Vec3 e1 = (1.0 / norm(u)) * u;
    const Vec3 w = v - dot(v, e1) * e1;
    const Vec3 e2 = (1.0 / norm(w)) * w;
    f.axes = {e1, e2, cross(e1, e2)};
  }
  return out;
}

std::vector<Frame> local_frames(const BackboneStructure& s, bool strict) {
  return local_frames(ResidueTable::from_structure(s), strict);
}

std::size_t ResidueGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& e : edges) n += e.size();
  return n;
}

constexpr double kDistanceGrid = 1e6;

ResidueGraph knn_graph(const ResidueTable& t, const GraphConfig& config) {
  config.validate();
  const std::size_t L = t.size();
  if (L == 0) throw std::invalid_argument("knn_graph needs at least one residue");
  ResidueGraph g;
  g.edges.resize(L);
  g.chain_break.resize(L);
  // Distances are ranked on a 1e-6 A grid so that ties which only differ by
  // rounding (ideal geometry produces many) resolve by index in every frame.
  std::vector<std::pair<long long, int>> cand;
  for (std::size_t i = 0; i < L; ++i) {
    g.chain_break[i] = t.prev[i] < 0 ? 1 : 0;
    cand.clear();
    for (std::size_t j = 0; j < L; ++j)
      if (j != i) cand.emplace_back(std::llround(distance(t.ca[i], t.ca[j]) * kDistanceGrid), static_cast<int>(j));
    const std::size_t k = std::min(config.k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    for (std::size_t r = 0; r < k; ++r) g.edges[i].push_back(cand[r].second);
  }
  return g;
}

ResidueGraph knn_graph(const BackboneStructure& s, const GraphConfig& config) {
  return knn_graph(ResidueTable::from_structure(s), config);
}

std::vector<double> rbf(double d, const GraphConfig& config) {
  const double spacing = (config.rbf_max - config.rbf_min) / static_cast<double>(config.rbf_bins - 1);
  std::vector<double> out(config.rbf_bins);
  for (std::size_t b = 0; b < config.rbf_bins; ++b) {
    const double mu = config.rbf_min + spacing * static_cast<double>(b);
    const double z = (d - mu) / spacing;
    out[b] = std::exp(-0.5 * z * z);
  }
  return out;
}

Dihedrals backbone_dihedrals(const ResidueTable& t) {
  const std::size_t L = t.size();
  Dihedrals d;
  d.phi.assign(L, 0.0);
  d.psi.assign(L, 0.0);
  d.omega.assign(L, 0.0);
  d.has_phi.assign(L, 0);
  d.has_psi.assign(L, 0);
  d.has_omega.assign(L, 0);
  for (std::size_t i = 0; i < L; ++i) {
    if (t.prev[i] >= 0) {
      d.phi[i] = dihedral(t.c[static_cast<std::size_t>(t.prev[i])], t.n[i], t.ca[i], t.c[i]);
      d.has_phi[i] = 1;
    }
    if (t.next[i] >= 0) {
      const auto j = static_cast<std::size_t>(t.next[i]);
      d.psi[i] = dihedral(t.n[i], t.ca[i], t.c[i], t.n[j]);
      d.omega[i] = dihedral(t.ca[i], t.c[i], t.n[j], t.ca[j]);
      d.has_psi[i] = d.has_omega[i] = 1;
    }
  }
  return d;
}

FeatureSet featurize(const ResidueTable& t, const ResidueGraph& graph, const GraphConfig& config, bool strict) {
  config.validate();
  const std::size_t L = t.size();
  if (graph.edges.size() != L)
    throw std::invalid_argument("featurize: graph has " + std::to_string(graph.edges.size()) +
                                " nodes, structure has " + std::to_string(L) + " residues");
  const auto frames = local_frames(t, strict);
  const auto dih = backbone_dihedrals(t);

  FeatureSet fs;
  fs.node = Matrix(L, config.node_dim());
  for (std::size_t i = 0; i < L; ++i) {
    auto r = fs.node.row(i);
    const double angles[3] = {dih.phi[i], dih.psi[i], dih.omega[i]};
    const bool valid[3] = {dih.has_phi[i] != 0, dih.has_psi[i] != 0, dih.has_omega[i] != 0};
    for (int a = 0; a < 3; ++a) {
      if (valid[a]) {
        r[2 * a] = std::sin(angles[a]);
        r[2 * a + 1] = std::cos(angles[a]);
      }
      r[6 + a] = valid[a] ? 0.0 : 1.0;
    }
    r[9] = frames[i].degenerate ? 1.0 : 0.0;
  }

  const std::size_t clip = static_cast<std::size_t>(config.rel_pos_clip);
  fs.edge = Matrix(graph.edge_count(), config.edge_dim());
  std::size_t e = 0;
  for (std::size_t i = 0; i < L; ++i) {
    const Frame& fi = frames[i];
    for (int jj : graph.edges[i]) {
      const auto j = static_cast<std::size_t>(jj);
      auto r = fs.edge.row(e++);
      std::size_t col = 0;
      const Vec3 delta = t.ca[j] - t.ca[i];
      const double d = norm(delta);
      for (double v : rbf(d, config)) r[col++] = v;
      for (int a = 0; a < 3; ++a) r[col++] = d > 0 ? dot(fi.axes[a], delta) / d : 0.0;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) r[col++] = dot(fi.axes[a], frames[j].axes[b]);
      if (t.chain[i] == t.chain[j]) {
        const long off = std::clamp<long>(t.position[j] - t.position[i], -config.rel_pos_clip, config.rel_pos_clip);
        r[col + static_cast<std::size_t>(off + config.rel_pos_clip)] = 1.0;
        r[col + 2 * clip + 1] = 1.0;
      }
    }
  }
  return fs;
}

FeatureSet featurize(const BackboneStructure& s, const ResidueGraph& graph, const GraphConfig& config,
                     bool strict) {
  return featurize(ResidueTable::from_structure(s), graph, config, strict);
}

BackboneStructure perturb(const BackboneStructure& s, double eps, std::uint64_t seed) {
  if (!(eps >= 0.0)) throw std::invalid_argument("perturb: eps must be >= 0");
  BackboneStructure out = s;
  if (eps == 0.0) return out;
  CounterRng rng = CounterRng::stream({seed, 0x9E27});
  auto jitter = [&](Vec3& v) {
    for (double& x : v) x += eps * rng.normal();
  };
  for (auto& chain : out.chains)
    for (auto& r : chain.residues) {
      jitter(r.n);
      jitter(r.ca);
      jitter(r.c);
      if (r.o) jitter(*r.o);
    }
  return out;
}

}  // namespace seqdesign
