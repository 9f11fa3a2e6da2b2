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

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "seqdesign/rng.hpp"
#include "seqdesign/tensor.hpp"

namespace seqdesign {

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;
};

/// Named, shaped parameter map. Insertion order is the canonical order used by
/// checkpoints and optimizers. Param addresses are stable for the lifetime of
/// the store.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore& other);
  ParamStore& operator=(const ParamStore& other);
  ParamStore(ParamStore&&) noexcept = default;
  ParamStore& operator=(ParamStore&&) noexcept = default;

  Param& add(const std::string& name, std::size_t rows, std::size_t cols);
  Param& add(const std::string& name, Matrix value);

  bool contains(std::string_view name) const;
  Param& at(std::string_view name);
  const Param& at(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  Param& operator[](std::size_t i) { return *params_[i]; }
  const Param& operator[](std::size_t i) const { return *params_[i]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t total_count() const;
  std::size_t trainable_count() const;
  std::size_t count_with_prefix(std::string_view prefix) const;

  void zero_grad();
  void set_trainable(bool trainable);
  void set_trainable_prefix(std::string_view prefix, bool trainable);

  /// Copies every tensor whose name starts with `prefix` from `src`.
  void copy_prefix_from(const ParamStore& src, std::string_view prefix);

 private:
  std::vector<std::unique_ptr<Param>> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Fills a weight matrix with N(0, std^2) draws from `rng`.
void init_normal(Matrix& m, double std, CounterRng& rng);

}  // namespace seqdesign
