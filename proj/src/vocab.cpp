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

#include "seqdesign/vocab.hpp"

#include <cctype>

namespace seqdesign::vocab {

const std::array<std::string, kSize>& symbols() {
  static const std::array<std::string, kSize> kSymbols = [] {
    std::array<std::string, kSize> s;
    for (int i = 0; i < kNumAminoAcids; ++i) s[i] = std::string(1, kAminoAcids[i]);
    s[kMask] = "<mask>";
    s[kPad] = "<pad>";
    s[kUnk] = "<unk>";
    s[kChainBreak] = "<cb>";
    return s;
  }();
  return kSymbols;
}

int token_of(char letter) {
  const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(letter)));
  const auto pos = kAminoAcids.find(up);
  return pos == std::string_view::npos ? kUnk : static_cast<int>(pos);
}

char letter_of(int token) {
  if (is_amino_acid(token)) return kAminoAcids[token];
  switch (token) {
    case kMask: return '#';
    case kPad: return '.';
    case kChainBreak: return '/';
    default: return 'X';
  }
}

std::vector<int> tokenize(std::string_view seq, std::size_t* unknown) {
  std::vector<int> out;
  out.reserve(seq.size());
  for (char ch : seq) {
    const int t = token_of(ch);
    if (t == kUnk && unknown != nullptr) ++*unknown;
    out.push_back(t);
  }
  return out;
}

std::string detokenize(std::span<const int> tokens) {
  std::string s;
  s.reserve(tokens.size());
  for (int t : tokens) s.push_back(letter_of(t));
  return s;
}

}  // namespace seqdesign::vocab
