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

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <utility>
#include <vector>

namespace seqdesign {

/// Counter-based random stream.
///
/// Draw n of a stream with key K is splitmix64(K + (n + 1) * 0x9E3779B97F4A7C15).
/// Streams are addressed by a path of integers (seed, record index, purpose, ...)
/// so any record can be regenerated without replaying the others, and serial
/// and parallel producers agree bitwise.
///
///   uniform()   = (u64 >> 11) * 2^-53            in [0, 1)
///   uniform_pos = 1 - uniform()                  in (0, 1]
///   below(n)    = floor(uniform() * n)
///   normal()    = sqrt(-2 ln uniform_pos) * cos(2 pi uniform())   (two draws)
class CounterRng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit CounterRng(std::uint64_t key = 0) : key_(key) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Key for the stream addressed by `path`.
  static std::uint64_t derive_key(std::initializer_list<std::uint64_t> path) {
    std::uint64_t k = 0x5EED5EED5EED5EEDULL;
    for (std::uint64_t p : path) k = mix(k ^ mix(p + kGamma));
    return k;
  }
  static CounterRng stream(std::initializer_list<std::uint64_t> path) {
    return CounterRng(derive_key(path));
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(key_ + counter_ * kGamma);
  }
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform_pos() { return 1.0 - uniform(); }
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  }
  double normal() {
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    return r * std::cos(2.0 * std::numbers::pi * uniform());
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace seqdesign
