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

#include "seqdesign/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>

#include "seqdesign/geometry.hpp"
#include "seqdesign/vocab.hpp"

namespace seqdesign {

namespace {

double angle_gap_deg(double a, double b) {
  double d = std::fmod(std::fabs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw std::invalid_argument(std::string(what) + ": length " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace

double recovery(std::span<const int> pred, std::span<const int> native) {
  check_lengths(pred.size(), native.size(), "recovery");
  if (native.empty()) throw std::invalid_argument("recovery: empty sequence");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < native.size(); ++i) hit += pred[i] == native[i];
  return static_cast<double>(hit) / static_cast<double>(native.size());
}

double median_recovery(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  const std::size_t mid = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  return values[mid];
}

double stable_mean(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("mean of an empty set");
  std::sort(values.begin(), values.end());
  double sum = 0.0, comp = 0.0;
  for (double v : values) {
    const double t = sum + v;
    comp += std::fabs(sum) >= std::fabs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return (sum + comp) / static_cast<double>(values.size());
}

double perplexity_from_logits(const std::vector<Matrix>& logits, const std::vector<std::vector<int>>& targets) {
  check_lengths(logits.size(), targets.size(), "perplexity");
  std::vector<double> nll;
  for (std::size_t p = 0; p < logits.size(); ++p) {
    const Matrix& m = logits[p];
    check_lengths(m.rows(), targets[p].size(), "perplexity");
    if (m.cols() < static_cast<std::size_t>(vocab::kNumAminoAcids))
      throw std::invalid_argument("perplexity: logits need 20 columns");
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const int t = targets[p][i];
      if (!vocab::is_amino_acid(t)) continue;
      double mx = m(i, 0);
      for (int c = 1; c < vocab::kNumAminoAcids; ++c) mx = std::max(mx, m(i, c));
      double z = 0.0;
      for (int c = 0; c < vocab::kNumAminoAcids; ++c) z += std::exp(m(i, c) - mx);
      nll.push_back(mx + std::log(z) - m(i, static_cast<std::size_t>(t)));
    }
  }
  if (nll.empty()) throw std::invalid_argument("perplexity: no scored residues");
  return std::exp(stable_mean(std::move(nll)));
}

double perplexity(ParamStore& ps, const ModelConfig& mcfg, const std::vector<PreparedStructure>& structures,
                  const std::vector<std::vector<int>>& natives) {
  if (structures.empty()) throw std::invalid_argument("perplexity: empty dataset");
  check_lengths(structures.size(), natives.size(), "perplexity");
  std::vector<Matrix> logits;
  logits.reserve(structures.size());
  for (const auto& s : structures) {
    const std::vector<int> masked(s.length, vocab::kMask);
    logits.push_back(design_logit_matrix(ps, mcfg, s, masked, false, false));
  }
  return perplexity_from_logits(logits, natives);
}

ContextLabel label_contexts(const BackboneStructure& s, const ContextThresholds& th) {
  const ResidueTable t = ResidueTable::from_structure(s);
  const std::size_t L = t.size();
  ContextLabel out;
  out.burial.assign(L, Burial::kSurface);
  out.secondary.assign(L, Secondary::kLoop);
  out.interface.assign(L, 0);
  const double r2_b = th.burial_radius * th.burial_radius;
  const double r2_i = th.interface_radius * th.interface_radius;
  for (std::size_t i = 0; i < L; ++i) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < L; ++j) {
      if (j == i) continue;
      const Vec3 d = t.ca[i] - t.ca[j];
      const double r2 = dot(d, d);
      if (r2 <= r2_b) ++count;
      if (t.chain[j] != t.chain[i] && r2 <= r2_i) out.interface[i] = 1;
    }
    if (count >= th.burial_count) out.burial[i] = Burial::kCore;
  }
  const Dihedrals d = backbone_dihedrals(t);
  constexpr double kDeg = 180.0 / std::numbers::pi;
  for (std::size_t i = 0; i < L; ++i) {
    if (!d.has_phi[i] || !d.has_psi[i]) continue;
    const double phi = d.phi[i] * kDeg, psi = d.psi[i] * kDeg;
    auto in = [&](double cphi, double cpsi) {
      return angle_gap_deg(phi, cphi) <= th.box_half_width && angle_gap_deg(psi, cpsi) <= th.box_half_width;
    };
    if (in(-60.0, -45.0))
      out.secondary[i] = Secondary::kHelix;
    else if (in(-135.0, 135.0))
      out.secondary[i] = Secondary::kStrand;
  }
  return out;
}

std::map<std::string, double> dissect_recovery(const std::vector<std::vector<int>>& designs,
                                               const std::vector<std::vector<int>>& natives,
                                               const std::vector<ContextLabel>& labels) {
  check_lengths(designs.size(), natives.size(), "dissect_recovery");
  check_lengths(designs.size(), labels.size(), "dissect_recovery");
  std::map<std::string, std::vector<double>> hits;
  for (std::size_t p = 0; p < designs.size(); ++p) {
    const auto& d = designs[p];
    const auto& n = natives[p];
    const auto& lab = labels[p];
    check_lengths(d.size(), n.size(), "dissect_recovery");
    check_lengths(d.size(), lab.burial.size(), "dissect_recovery");
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double h = d[i] == n[i] ? 1.0 : 0.0;
      hits["all"].push_back(h);
      hits[lab.burial[i] == Burial::kCore ? "core" : "surface"].push_back(h);
      switch (lab.secondary[i]) {
        case Secondary::kHelix: hits["helix"].push_back(h); break;
        case Secondary::kStrand: hits["strand"].push_back(h); break;
        case Secondary::kLoop: hits["loop"].push_back(h); break;
      }
      if (lab.interface[i]) hits["interface"].push_back(h);
    }
  }
  std::map<std::string, double> out;
  for (auto& [k, v] : hits) out[k] = stable_mean(std::move(v));
  return out;
}

std::size_t longest_common_substring(const std::vector<std::vector<int>>& seqs, double fraction) {
  if (seqs.empty()) throw std::invalid_argument("longest_common_substring: no sequences");
  const auto need = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(seqs.size()) - 1e-12));
  std::size_t max_len = 0;
  for (const auto& s : seqs) max_len = std::max(max_len, s.size());
  // Presence in >= need strings is monotone in length, so binary search.
  auto ok = [&](std::size_t len) {
    std::map<std::vector<int>, std::size_t> count;
    for (const auto& s : seqs) {
      if (s.size() < len) continue;
      std::set<std::vector<int>> seen;
      for (std::size_t i = 0; i + len <= s.size(); ++i)
        seen.emplace(s.begin() + static_cast<std::ptrdiff_t>(i), s.begin() + static_cast<std::ptrdiff_t>(i + len));
      for (const auto& sub : seen)
        if (++count[sub] >= std::max<std::size_t>(need, 1)) return true;
    }
    return false;
  };
  std::size_t lo = 0, hi = max_len;
  while (lo < hi) {
    const std::size_t mid = (lo + hi + 1) / 2;
    if (ok(mid))
      lo = mid;
    else
      hi = mid - 1;
  }
  return lo;
}

double longest_run_ratio(std::span<const int> seq) {
  if (seq.empty()) throw std::invalid_argument("longest_run_ratio: empty sequence");
  std::size_t best = 1, run = 1;
  for (std::size_t i = 1; i < seq.size(); ++i) {
    run = seq[i] == seq[i - 1] ? run + 1 : 1;
    best = std::max(best, run);
  }
  return static_cast<double>(best) / static_cast<double>(seq.size());
}

double letter_entropy(std::span<const int> seq) {
  if (seq.empty()) throw std::invalid_argument("letter_entropy: empty sequence");
  std::map<int, std::size_t> count;
  for (int t : seq) ++count[t];
  double h = 0.0;
  for (const auto& [tok, c] : count) {
    const double f = static_cast<double>(c) / static_cast<double>(seq.size());
    h -= f * std::log(f);
  }
  return h;
}

AntibodyMetrics antibody_metrics(const std::vector<std::vector<int>>& designs, std::span<const int> native,
                                 std::span<const std::uint8_t> region, std::span<const std::uint8_t> contact) {
  if (designs.empty()) throw std::invalid_argument("antibody_metrics: empty design set");
  check_lengths(region.size(), native.size(), "antibody_metrics region");
  check_lengths(contact.size(), native.size(), "antibody_metrics contact");
  std::vector<std::size_t> reg, con;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (contact[i] && !region[i])
      throw std::invalid_argument("antibody_metrics: contact position " + std::to_string(i) + " outside the region");
    if (region[i]) reg.push_back(i);
    if (contact[i]) con.push_back(i);
  }
  if (reg.empty()) throw std::invalid_argument("antibody_metrics: empty region");

  std::vector<std::vector<int>> sub;
  std::vector<double> aar, caar, cons, ent;
  for (const auto& d : designs) {
    check_lengths(d.size(), native.size(), "antibody_metrics design");
    std::vector<int> r;
    std::size_t hit = 0;
    for (std::size_t i : reg) {
      r.push_back(d[i]);
      hit += d[i] == native[i];
    }
    aar.push_back(static_cast<double>(hit) / static_cast<double>(reg.size()));
    if (!con.empty()) {
      std::size_t ch = 0;
      for (std::size_t i : con) ch += d[i] == native[i];
      caar.push_back(static_cast<double>(ch) / static_cast<double>(con.size()));
    }
    cons.push_back(longest_run_ratio(r));
    ent.push_back(letter_entropy(r));
    sub.push_back(std::move(r));
  }
  AntibodyMetrics m;
  m.aar = stable_mean(aar);
  if (!caar.empty()) m.caar = stable_mean(caar);
  m.longest_comm_subseq = longest_common_substring(sub, 0.3);
  m.longest_cons_ratio = stable_mean(cons);
  m.aa_entropy = stable_mean(ent);
  return m;
}

std::vector<std::uint8_t> contact_mask(const BackboneStructure& s, std::span<const std::uint8_t> region,
                                       double cutoff) {
  const std::size_t L = s.residue_count();
  check_lengths(region.size(), L, "contact_mask");
  const std::vector<int> chain = s.chain_index();
  auto atoms = [&](std::size_t i) {
    const ResidueAtoms& r = s.residue(i);
    std::vector<Vec3> a{r.n, r.ca, r.c};
    if (r.o) a.push_back(*r.o);
    return a;
  };
  std::vector<std::uint8_t> out(L, 0);
  const double c2 = cutoff * cutoff;
  for (std::size_t i = 0; i < L; ++i) {
    if (!region[i]) continue;
    const auto ai = atoms(i);
    for (std::size_t j = 0; j < L && !out[i]; ++j) {
      if (chain[j] == chain[i]) continue;
      for (const Vec3& p : atoms(j))
        for (const Vec3& q : ai)
          if (dot(p - q, p - q) <= c2) out[i] = 1;
    }
  }
  return out;
}

double distinct_fraction(const std::vector<std::vector<int>>& designs) {
  if (designs.empty()) throw std::invalid_argument("distinct_fraction: no designs");
  const std::set<std::vector<int>> u(designs.begin(), designs.end());
  return static_cast<double>(u.size()) / static_cast<double>(designs.size());
}

double mean_pairwise_identity(const std::vector<std::vector<int>>& designs) {
  if (designs.size() < 2) return 1.0;
  std::vector<double> ids;
  for (std::size_t a = 0; a < designs.size(); ++a)
    for (std::size_t b = a + 1; b < designs.size(); ++b) ids.push_back(recovery(designs[a], designs[b]));
  return stable_mean(std::move(ids));
}

std::vector<SweepRow> diversity_sweep(ParamStore& ps, const ModelConfig& mcfg,
                                      const std::vector<PreparedStructure>& structures,
                                      const std::vector<std::vector<int>>& natives, const DecodingConfig& base,
                                      const std::vector<double>& taus, std::size_t n_samples, std::size_t threads) {
  if (structures.empty()) throw std::invalid_argument("diversity_sweep: empty dataset");
  check_lengths(structures.size(), natives.size(), "diversity_sweep");
  std::vector<SweepRow> rows;
  for (double tau : taus) {
    DecodingConfig cfg = base;
    cfg.tau = tau;
    cfg.n_samples = n_samples;
    cfg.strategy = Strategy::kSample;
    cfg.keep_trajectory = false;
    cfg.validate();
    const auto items = batch_design(ps, mcfg, structures, cfg, threads);
    std::vector<double> rec, dist, ident;
    for (std::size_t p = 0; p < items.size(); ++p) {
      if (!items[p].error.empty()) throw std::runtime_error("diversity_sweep: item " + std::to_string(p) + ": " + items[p].error);
      std::vector<std::vector<int>> seqs;
      for (const auto& r : items[p].samples) {
        rec.push_back(recovery(r.sequence, natives[p]));
        seqs.push_back(r.sequence);
      }
      dist.push_back(distinct_fraction(seqs));
      ident.push_back(mean_pairwise_identity(seqs));
    }
    rows.push_back({tau, stable_mean(rec), stable_mean(dist), stable_mean(ident)});
  }
  return rows;
}

}  // namespace seqdesign
