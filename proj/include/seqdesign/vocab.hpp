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
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace seqdesign::vocab {

// Token layout: the 20 amino acids in alphabetical one-letter order, then
// four special tokens. Indices are part of the checkpoint format.
inline constexpr std::string_view kAminoAcids = "ACDEFGHIKLMNPQRSTVWY";
inline constexpr int kNumAminoAcids = 20;
inline constexpr int kMask = 20;
inline constexpr int kPad = 21;
inline constexpr int kUnk = 22;
inline constexpr int kChainBreak = 23;
inline constexpr int kSize = 24;

/// Symbol list as stored in checkpoint manifests.
const std::array<std::string, kSize>& symbols();

inline bool is_amino_acid(int token) { return token >= 0 && token < kNumAminoAcids; }

/// Token for a one-letter code (case-insensitive), or kUnk.
int token_of(char letter);
/// One-letter code; 'X' for UNK, '#' for MASK, '.' for PAD, '/' for CHAINBREAK.
char letter_of(int token);

/// Tokenizes `seq`; unknown letters become kUnk and increment *unknown.
std::vector<int> tokenize(std::string_view seq, std::size_t* unknown = nullptr);
std::string detokenize(std::span<const int> tokens);

}  // namespace seqdesign::vocab
