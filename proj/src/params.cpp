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

#include "seqdesign/params.hpp"

#include <stdexcept>

namespace seqdesign {

ParamStore::ParamStore(const ParamStore& other) { *this = other; }

ParamStore& ParamStore::operator=(const ParamStore& other) {
  if (this == &other) return *this;
  params_.clear();
  index_.clear();
  for (const auto& p : other.params_) {
    Param& q = add(p->name, p->value);
    q.grad = p->grad;
    q.trainable = p->trainable;
  }
  return *this;
}

Param& ParamStore::add(const std::string& name, std::size_t rows, std::size_t cols) {
  return add(name, Matrix(rows, cols));
}

Param& ParamStore::add(const std::string& name, Matrix value) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->grad = Matrix(value.rows(), value.cols());
  p->value = std::move(value);
  index_.emplace(name, params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

bool ParamStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

Param& ParamStore::at(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return *params_[it->second];
}

const Param& ParamStore::at(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return *params_[it->second];
}

std::size_t ParamStore::total_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

std::size_t ParamStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p->trainable) n += p->value.size();
  return n;
}

std::size_t ParamStore::count_with_prefix(std::string_view prefix) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p->name.starts_with(prefix)) n += p->value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->grad.fill(0.0);
}

void ParamStore::set_trainable(bool trainable) {
  for (auto& p : params_) p->trainable = trainable;
}

void ParamStore::set_trainable_prefix(std::string_view prefix, bool trainable) {
  for (auto& p : params_)
    if (p->name.starts_with(prefix)) p->trainable = trainable;
}

void ParamStore::copy_prefix_from(const ParamStore& src, std::string_view prefix) {
  for (const auto& p : src) {
    if (!p->name.starts_with(prefix)) continue;
    Param& dst = at(p->name);
    if (!dst.value.same_shape(p->value)) {
      throw std::invalid_argument("parameter " + p->name + ": expected shape " +
                                  dst.value.shape_string() + ", got " + p->value.shape_string());
    }
    dst.value = p->value;
  }
}

void init_normal(Matrix& m, double std, CounterRng& rng) {
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = std * rng.normal();
}

}  // namespace seqdesign
