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

// Command-line driver. One binary with subcommands; every run resolves a
// single JSON configuration (defaults <- --config file <- --set overrides <-
// command flags), rejects unknown keys and logs the result.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace seqdesign::cli {

enum ExitCode : int {
  kOk = 0,
  kRuntimeError = 1,
  kUsageError = 2,
  kConfigError = 3,
  kMissingCheckpoint = 4,
  kDataError = 5,
  kDivergence = 6,
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingCheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every accepted key with its default value.
nlohmann::json default_config();

/// Overlays `user` on the defaults. Throws ConfigError naming the dotted path
/// of the first unknown key or mistyped value.
nlohmann::json resolve_config(const nlohmann::json& user);

/// Applies "a.b.c=value" to `user`; the value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(nlohmann::json& user, const std::string& assignment);

/// Runs the CLI; returns the process exit code. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace seqdesign::cli
