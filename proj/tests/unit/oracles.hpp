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

// Brute-force reference implementations of the evaluation metrics, written
// directly from their definitions with no shared code.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "seqdesign/eval.hpp"
#include "seqdesign/structure.hpp"
#include "seqdesign/tensor.hpp"

namespace seqdesign::oracle {

inline double recovery(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

// Value with floor((n-1)/2) elements ranked before it.
inline double median(const std::vector<double>& v) {
  const std::size_t want = (v.size() - 1) / 2;
  for (double x : v) {
    std::size_t less = 0, equal = 0;
    for (double y : v) {
      less += y < x;
      equal += y == x;
    }
    if (less <= want && want < less + equal) return x;
  }
  return NAN;
}

inline double perplexity(const std::vector<Matrix>& logits, const std::vector<std::vector<int>>& targets) {
  long double nll = 0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < logits.size(); ++p)
    for (std::size_t i = 0; i < targets[p].size(); ++i) {
      long double z = 0;
      for (int c = 0; c < 20; ++c) z += std::exp(static_cast<long double>(logits[p](i, c)));
      nll += std::log(z) - logits[p](i, targets[p][i]);
      ++count;
    }
  return static_cast<double>(std::exp(nll / count));
}

inline std::size_t common_substring(const std::vector<std::vector<int>>& seqs, double fraction) {
  const auto need = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(seqs.size()) - 1e-12));
  std::size_t best = 0;
  for (const auto& s : seqs)
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = i + 1; j <= s.size(); ++j) {
        if (j - i <= best) continue;
        std::size_t hits = 0;
        for (const auto& t : seqs) hits += std::search(t.begin(), t.end(), s.begin() + i, s.begin() + j) != t.end();
        if (hits >= need) best = j - i;
      }
  return best;
}

inline double run_ratio(const std::vector<int>& s) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i; j < s.size(); ++j) {
      bool same = true;
      for (std::size_t k = i; k <= j; ++k) same = same && s[k] == s[i];
      if (same) best = std::max(best, j - i + 1);
    }
  return static_cast<double>(best) / static_cast<double>(s.size());
}

inline double entropy(const std::vector<int>& s) {
  std::map<int, int> c;
  for (int v : s) ++c[v];
  double h = 0;
  for (auto [k, n] : c) {
    const double f = static_cast<double>(n) / static_cast<double>(s.size());
    h -= f * std::log(f);
  }
  return h;
}

inline AntibodyMetrics antibody(const std::vector<std::vector<int>>& designs, const std::vector<int>& native,
                                const std::vector<std::uint8_t>& region, const std::vector<std::uint8_t>& contact) {
  const double n = static_cast<double>(designs.size());
  const std::size_t ncon = static_cast<std::size_t>(std::count(contact.begin(), contact.end(), 1));
  AntibodyMetrics m;
  double caar = 0;
  std::vector<std::vector<int>> sub;
  for (const auto& d : designs) {
    std::vector<int> r;
    std::size_t hit = 0, chit = 0;
    for (std::size_t i = 0; i < native.size(); ++i) {
      if (region[i]) {
        r.push_back(d[i]);
        hit += d[i] == native[i];
      }
      if (contact[i]) chit += d[i] == native[i];
    }
    m.aar += static_cast<double>(hit) / static_cast<double>(r.size()) / n;
    if (ncon) caar += static_cast<double>(chit) / static_cast<double>(ncon) / n;
    m.longest_cons_ratio += run_ratio(r) / n;
    m.aa_entropy += entropy(r) / n;
    sub.push_back(r);
  }
  if (ncon) m.caar = caar;
  m.longest_comm_subseq = common_substring(sub, 0.3);
  return m;
}

inline double distinct_fraction(const std::vector<std::vector<int>>& d) {
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    bool seen = false;
    for (std::size_t j = 0; j < i; ++j) seen = seen || d[i] == d[j];
    distinct += !seen;
  }
  return static_cast<double>(distinct) / static_cast<double>(d.size());
}

inline double pairwise_identity(const std::vector<std::vector<int>>& d) {
  if (d.size() < 2) return 1.0;
  double sum = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = i + 1; j < d.size(); ++j, ++pairs) sum += recovery(d[i], d[j]);
  return sum / static_cast<double>(pairs);
}

inline std::map<std::string, double> dissect(const std::vector<std::vector<int>>& designs,
                                             const std::vector<std::vector<int>>& natives,
                                             const std::vector<ContextLabel>& labels) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> tally;
  for (std::size_t p = 0; p < designs.size(); ++p)
    for (std::size_t i = 0; i < designs[p].size(); ++i) {
      const ContextLabel& l = labels[p];
      std::vector<std::string> names{"all", l.burial[i] == Burial::kCore ? "core" : "surface",
                                     l.secondary[i] == Secondary::kHelix    ? "helix"
                                     : l.secondary[i] == Secondary::kStrand ? "strand"
                                                                            : "loop"};
      if (l.interface[i]) names.push_back("interface");
      for (const auto& name : names) {
        tally[name].first += designs[p][i] == natives[p][i];
        tally[name].second += 1;
      }
    }
  std::map<std::string, double> out;
  for (const auto& [name, c] : tally) out[name] = static_cast<double>(c.first) / static_cast<double>(c.second);
  return out;
}

inline std::vector<Vec3> backbone_atoms(const ResidueAtoms& r) {
  std::vector<Vec3> a{r.n, r.ca, r.c};
  if (r.o) a.push_back(*r.o);
  return a;
}

inline std::vector<std::uint8_t> contacts(const BackboneStructure& s, const std::vector<std::uint8_t>& region,
                                          double cutoff = 8.0) {
  const std::size_t L = s.residue_count();
  const auto chain = s.chain_index();
  std::vector<std::uint8_t> want(L, 0);
  for (std::size_t i = 0; i < L; ++i) {
    if (!region[i]) continue;
    for (std::size_t j = 0; j < L; ++j) {
      if (chain[i] == chain[j]) continue;
      for (const auto& p : backbone_atoms(s.residue(i)))
        for (const auto& q : backbone_atoms(s.residue(j))) want[i] |= distance(p, q) <= cutoff;
    }
  }
  return want;
}

// Residue context from the definitions: burial by CA neighbour count,
// secondary structure by (phi, psi) boxes, interface by cross-chain CA range.
inline ContextLabel labels(const BackboneStructure& s) {
  std::vector<ResidueAtoms> all;
  std::vector<int> chain;
  std::vector<std::size_t> pos, len;
  for (std::size_t c = 0; c < s.chains.size(); ++c)
    for (std::size_t i = 0; i < s.chains[c].residues.size(); ++i) {
      all.push_back(s.chains[c].residues[i]);
      chain.push_back(static_cast<int>(c));
      pos.push_back(i);
      len.push_back(s.chains[c].residues.size());
    }
  const std::size_t L = all.size();
  ContextLabel l;
  l.burial.assign(L, Burial::kSurface);
  l.secondary.assign(L, Secondary::kLoop);
  l.interface.assign(L, 0);
  auto dih = [](Vec3 a, Vec3 b, Vec3 c, Vec3 d) {
    const Vec3 b0 = a - b, u = c - b, b2 = d - c;
    const Vec3 v = b0 - (dot(b0, u) / dot(u, u)) * u, w = b2 - (dot(b2, u) / dot(u, u)) * u;
    return std::atan2(dot(cross(u, v), w) / norm(u), dot(v, w)) * 180.0 / std::numbers::pi;
  };
  auto near = [](double a, double b) {
    const double g = std::fmod(std::fabs(a - b), 360.0);
    return std::min(g, 360.0 - g) <= 40.0;
  };
  for (std::size_t i = 0; i < L; ++i) {
    std::size_t n = 0;
    for (std::size_t j = 0; j < L; ++j) {
      if (i == j) continue;
      const double d = distance(all[i].ca, all[j].ca);
      n += d <= 10.0;
      if (chain[i] != chain[j] && d <= 8.0) l.interface[i] = 1;
    }
    if (n >= 16) l.burial[i] = Burial::kCore;
    if (pos[i] == 0 || pos[i] + 1 == len[i]) continue;
    const double phi = dih(all[i - 1].c, all[i].n, all[i].ca, all[i].c);
    const double psi = dih(all[i].n, all[i].ca, all[i].c, all[i + 1].n);
    if (near(phi, -60) && near(psi, -45)) l.secondary[i] = Secondary::kHelix;
    else if (near(phi, -135) && near(psi, 135)) l.secondary[i] = Secondary::kStrand;
  }
  return l;
}

}  // namespace seqdesign::oracle
