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

// Checkpoint directory: manifest.json + tensors.bin (little-endian raw values
// in manifest order).

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "seqdesign/params.hpp"

namespace seqdesign {

inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr const char* kArtifactVersion = "0.1.0";

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Precision { kF64, kF32 };
Precision precision_from_string(const std::string& s);
std::string to_string(Precision p);

/// Rounds every value through f32. Used so that f32 storage round-trips exactly.
void quantize_f32(Matrix& m);

struct Checkpoint {
  ParamStore params;
  nlohmann::json model_config = nlohmann::json::object();
  std::uint64_t step = 0;
  /// Free-form RNG position (stream keys and counters) for resumption.
  nlohmann::json rng_state = nlohmann::json::object();
  Precision precision = Precision::kF64;
};

/// Writes `dir`/manifest.json and `dir`/tensors.bin; creates `dir` if needed.
/// With f32 precision the stored values are the f32 roundings of the params.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);

/// Throws CheckpointError on a missing directory/file, version mismatch,
/// malformed manifest, or a tensor file of the wrong size. Trainability flags
/// are not stored; every loaded tensor is marked trainable.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Copies every tensor of `dst` from `src` by name. Throws CheckpointError
/// naming the first tensor that is missing from `src` or has another shape.
void restore_params(ParamStore& dst, const ParamStore& src);

}  // namespace seqdesign
