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

// JSONL structure datasets. One protein per line:
//   {"id": str, "chains": [{"chain_id": str, "seq": str,
//     "coords": {"N": [[x,y,z],...], "CA": [...], "C": [...], "O": [...] | null}}]}

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "seqdesign/structure.hpp"

namespace seqdesign {

class DataError : public std::runtime_error {
 public:
  DataError(const std::string& msg, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Record {
  BackboneStructure structure;
  /// Native tokens, all observed; fully masked when the record has no sequence.
  SequenceState sequence;
};

struct ParsedDataset {
  std::vector<Record> records;
  /// Residues whose letter was not one of the 20 amino acids (mapped to UNK).
  std::size_t unknown_residues = 0;
};

/// Parses one JSON object into a record. `line` only decorates errors.
Record record_from_json(const nlohmann::json& j, std::size_t line, std::size_t* unknown);
nlohmann::json record_to_json(const BackboneStructure& s);

ParsedDataset parse_dataset(const std::filesystem::path& path);
ParsedDataset parse_dataset_string(const std::string& text);
void write_dataset(const std::filesystem::path& path, const std::vector<Record>& records);

}  // namespace seqdesign
