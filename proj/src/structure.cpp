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

#include "seqdesign/structure.hpp"

#include <string>

#include "seqdesign/vocab.hpp"

namespace seqdesign {

double dihedral(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3) {
  const Vec3 b0 = p0 - p1;
  const Vec3 b1 = p2 - p1;
  const Vec3 b2 = p3 - p2;
  const double nb1 = norm(b1);
  const Vec3 u = (1.0 / nb1) * b1;
  const Vec3 v = b0 - dot(b0, u) * u;
  const Vec3 w = b2 - dot(b2, u) * u;
  const double x = dot(v, w);
  const double y = dot(cross(u, v), w);
  return std::atan2(y, x);
}

std::size_t BackboneStructure::residue_count() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.residues.size();
  return n;
}

const ResidueAtoms& BackboneStructure::residue(std::size_t flat) const {
  for (const auto& c : chains) {
    if (flat < c.residues.size()) return c.residues[flat];
    flat -= c.residues.size();
  }
  throw std::out_of_range("residue index out of range");
}

ResidueAtoms& BackboneStructure::residue(std::size_t flat) {
  return const_cast<ResidueAtoms&>(static_cast<const BackboneStructure&>(*this).residue(flat));
}

std::vector<int> BackboneStructure::chain_index() const {
  std::vector<int> out;
  out.reserve(residue_count());
  for (std::size_t c = 0; c < chains.size(); ++c)
    out.insert(out.end(), chains[c].residues.size(), static_cast<int>(c));
  return out;
}

std::vector<std::uint8_t> BackboneStructure::chain_break_flags() const {
  std::vector<std::uint8_t> out;
  out.reserve(residue_count());
  for (const auto& c : chains)
    for (std::size_t i = 0; i < c.residues.size(); ++i)
      out.push_back(i == 0 || c.residues[i].break_before ? 1 : 0);
  return out;
}

namespace {

bool finite(const Vec3& v) {
  return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]);
}

}  // namespace

void BackboneStructure::validate() const {
  const std::string where = id.empty() ? std::string("structure") : "structure '" + id + "'";
  if (chains.empty()) throw StructureError(where + " has no chains");
  std::size_t flat = 0;
  for (const auto& c : chains) {
    if (c.residues.empty())
      throw StructureError(where + ": chain '" + c.chain_id + "' has no residues");
    for (std::size_t i = 0; i < c.residues.size(); ++i, ++flat) {
      const auto& r = c.residues[i];
      if (!finite(r.n) || !finite(r.ca) || !finite(r.c) || (r.o && !finite(*r.o)))
        throw StructureError(where + ": non-finite coordinate at residue " + std::to_string(flat));
      if (i > 0 && !r.break_before) {
        const double d = distance(c.residues[i - 1].ca, r.ca);
        if (!(d > 1.0 && d < 5.0))
          throw StructureError(where + ": CA-CA distance " + std::to_string(d) +
                               " A between residues " + std::to_string(flat - 1) + " and " +
                               std::to_string(flat) + " without a chain break");
      }
    }
  }
  if (native_sequence && native_sequence->size() != flat)
    throw StructureError(where + ": native sequence length " +
                         std::to_string(native_sequence->size()) + " != residue count " +
                         std::to_string(flat));
}

void flag_gaps(BackboneStructure& s) {
  for (auto& c : s.chains)
    for (std::size_t i = 1; i < c.residues.size(); ++i) {
      const double d = distance(c.residues[i - 1].ca, c.residues[i].ca);
      if (!(d > 1.0 && d < 5.0)) c.residues[i].break_before = true;
    }
}

SequenceState SequenceState::fully_observed(std::vector<int> tokens) {
  SequenceState s;
  s.observed.assign(tokens.size(), 1);
  s.tokens = std::move(tokens);
  for (std::size_t i = 0; i < s.tokens.size(); ++i)
    if (s.tokens[i] == vocab::kMask) s.observed[i] = 0;
  return s;
}

SequenceState SequenceState::fully_masked(std::size_t length) {
  SequenceState s;
  s.tokens.assign(length, vocab::kMask);
  s.observed.assign(length, 0);
  return s;
}

void SequenceState::validate() const {
  if (observed.size() != tokens.size())
    throw std::invalid_argument("sequence state: observed mask length " +
                                std::to_string(observed.size()) + " != token count " +
                                std::to_string(tokens.size()));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if ((tokens[i] == vocab::kMask) == (observed[i] != 0))
      throw std::invalid_argument("sequence state: MASK/observed mismatch at position " +
                                  std::to_string(i));
  }
}

}  // namespace seqdesign
