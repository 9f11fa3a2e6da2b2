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

// Evaluation metrics: recovery, perplexity, structural-context dissection,
// antibody-style region metrics and temperature sweeps.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqdesign/decoding.hpp"
#include "seqdesign/model.hpp"
#include "seqdesign/params.hpp"
#include "seqdesign/structure.hpp"

namespace seqdesign {

/// Fraction of identical positions. Throws std::invalid_argument on a length
/// mismatch or empty input.
double recovery(std::span<const int> pred, std::span<const int> native);
/// Lower-middle order statistic. Throws on an empty set.
double median_recovery(std::vector<double> values);
/// Mean that does not depend on input order (sorted, compensated summation).
double stable_mean(std::vector<double> values);

/// exp(total NLL / count) where `logits` rows are scored against `targets`
/// with a log-softmax over the first 20 columns.
double perplexity_from_logits(const std::vector<Matrix>& logits, const std::vector<std::vector<int>>& targets);

/// One full-mask pass per protein (every position MASK, structure observed).
/// Throws std::invalid_argument on an empty dataset.
double perplexity(ParamStore& ps, const ModelConfig& mcfg, const std::vector<PreparedStructure>& structures,
                  const std::vector<std::vector<int>>& natives);

enum class Burial { kCore, kSurface };
enum class Secondary { kHelix, kStrand, kLoop };

struct ContextLabel {
  std::vector<Burial> burial;
  std::vector<Secondary> secondary;
  std::vector<std::uint8_t> interface;
};

struct ContextThresholds {
  double burial_radius = 10.0;
  std::size_t burial_count = 16;
  double box_half_width = 40.0;
  double interface_radius = 8.0;
};

/// Core iff >= 16 other CA atoms within 10 A; helix/strand iff (phi, psi) lies
/// within 40 degrees of (-60, -45) / (-135, 135) on both axes, loop otherwise
/// (including residues with an undefined angle); interface iff a CA of another
/// chain lies within 8 A.
ContextLabel label_contexts(const BackboneStructure& s, const ContextThresholds& th = {});

/// Residue-level mean recovery per context class: "core", "surface",
/// "helix", "strand", "loop", "interface", plus "all". Classes without
/// residues are absent from the map.
std::map<std::string, double> dissect_recovery(const std::vector<std::vector<int>>& designs,
                                               const std::vector<std::vector<int>>& natives,
                                               const std::vector<ContextLabel>& labels);

struct AntibodyMetrics {
  double aar = 0.0;
  /// Absent when the contact mask is empty.
  std::optional<double> caar;
  std::size_t longest_comm_subseq = 0;
  double longest_cons_ratio = 0.0;
  double aa_entropy = 0.0;
};

/// Metrics over the region positions of n full-length designs of one native.
/// Throws std::invalid_argument on an empty design set, an empty region, a
/// contact position outside the region or mismatched lengths.
AntibodyMetrics antibody_metrics(const std::vector<std::vector<int>>& designs, std::span<const int> native,
                                 std::span<const std::uint8_t> region, std::span<const std::uint8_t> contact);

/// Length of the longest contiguous substring present in at least
/// ceil(0.3 n) of the n strings.
std::size_t longest_common_substring(const std::vector<std::vector<int>>& seqs, double fraction = 0.3);
/// Longest run of one letter divided by the length.
double longest_run_ratio(std::span<const int> seq);
/// -sum f ln f over the empirical letter frequencies.
double letter_entropy(std::span<const int> seq);

/// Region residues (chain `region_chain`) with any backbone atom within
/// `cutoff` A of any backbone atom of another chain.
std::vector<std::uint8_t> contact_mask(const BackboneStructure& s, std::span<const std::uint8_t> region,
                                       double cutoff = 8.0);

struct SweepRow {
  double tau = 0.0;
  double mean_recovery = 0.0;
  double distinct_fraction = 0.0;
  double mean_pairwise_identity = 0.0;
};

/// Samples n_samples designs per structure at each tau (sample strategy,
/// other settings from `base`).
std::vector<SweepRow> diversity_sweep(ParamStore& ps, const ModelConfig& mcfg,
                                      const std::vector<PreparedStructure>& structures,
                                      const std::vector<std::vector<int>>& natives, const DecodingConfig& base,
                                      const std::vector<double>& taus, std::size_t n_samples, std::size_t threads = 1);

/// Distinct designs / number of designs.
double distinct_fraction(const std::vector<std::vector<int>>& designs);
/// Mean recovery(a, b) over unordered pairs; 1 for fewer than two designs.
double mean_pairwise_identity(const std::vector<std::vector<int>>& designs);

}  // namespace seqdesign
