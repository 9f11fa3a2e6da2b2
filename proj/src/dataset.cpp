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

#include "seqdesign/dataset.hpp"

#include <fstream>
#include <sstream>

#include "seqdesign/vocab.hpp"

namespace seqdesign {

using nlohmann::json;

namespace {

std::vector<Vec3> parse_coords(const json& arr, const std::string& what, std::size_t line) {
  if (!arr.is_array()) throw DataError(what + " must be an array of [x,y,z]", line);
  std::vector<Vec3> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& p = arr[i];
    if (!p.is_array() || p.size() != 3)
      throw DataError(what + "[" + std::to_string(i) + "] must have exactly 3 coordinates", line);
    Vec3 v{};
    for (int k = 0; k < 3; ++k) {
      if (!p[k].is_number())
        throw DataError(what + "[" + std::to_string(i) + "] has a non-numeric coordinate", line);
      v[k] = p[k].get<double>();
    }
    out.push_back(v);
  }
  return out;
}

json coords_to_json(const std::vector<Vec3>& v) {
  json arr = json::array();
  for (const auto& p : v) arr.push_back({p[0], p[1], p[2]});
  return arr;
}

}  // namespace

Record record_from_json(const json& j, std::size_t line, std::size_t* unknown) {
  if (!j.is_object()) throw DataError("record must be a JSON object", line);
  Record rec;
  rec.structure.id = j.value("id", std::string());
  if (!j.contains("chains") || !j["chains"].is_array() || j["chains"].empty())
    throw DataError("record needs a non-empty \"chains\" array", line);
  std::vector<int> native;
  bool has_seq = true;
  for (const json& cj : j["chains"]) {
    if (!cj.is_object() || !cj.contains("coords") || !cj["coords"].is_object())
      throw DataError("chain needs a \"coords\" object", line);
    Chain chain;
    chain.chain_id = cj.value("chain_id", std::string());
    const json& cc = cj["coords"];
    for (const char* atom : {"N", "CA", "C"})
      if (!cc.contains(atom)) throw DataError(std::string("coords missing ") + atom, line);
    const auto n = parse_coords(cc["N"], "N", line);
    const auto ca = parse_coords(cc["CA"], "CA", line);
    const auto c = parse_coords(cc["C"], "C", line);
    std::vector<Vec3> o;
    const bool has_o = cc.contains("O") && !cc["O"].is_null();
    if (has_o) o = parse_coords(cc["O"], "O", line);
    if (n.size() != ca.size() || c.size() != ca.size() || (has_o && o.size() != ca.size()))
      throw DataError("chain '" + chain.chain_id + "' has atom arrays of different lengths", line);
    if (ca.empty()) throw DataError("chain '" + chain.chain_id + "' has no residues", line);
    chain.residues.resize(ca.size());
    for (std::size_t i = 0; i < ca.size(); ++i) {
      chain.residues[i].n = n[i];
      chain.residues[i].ca = ca[i];
      chain.residues[i].c = c[i];
      if (has_o) chain.residues[i].o = o[i];
    }
    if (cj.contains("seq") && cj["seq"].is_string() && !cj["seq"].get<std::string>().empty()) {
      const std::string seq = cj["seq"].get<std::string>();
      if (seq.size() != ca.size())
        throw DataError("chain '" + chain.chain_id + "' sequence length " +
                            std::to_string(seq.size()) + " != residue count " +
                            std::to_string(ca.size()),
                        line);
      const auto toks = vocab::tokenize(seq, unknown);
      native.insert(native.end(), toks.begin(), toks.end());
    } else {
      has_seq = false;
    }
    rec.structure.chains.push_back(std::move(chain));
  }
  flag_gaps(rec.structure);
  if (has_seq) {
    rec.structure.native_sequence = native;
    rec.sequence = SequenceState::fully_observed(std::move(native));
  } else {
    rec.sequence = SequenceState::fully_masked(rec.structure.residue_count());
  }
  try {
    rec.structure.validate();
  } catch (const StructureError& e) {
    throw DataError(e.what(), line);
  }
  return rec;
}

json record_to_json(const BackboneStructure& s) {
  json j;
  j["id"] = s.id;
  j["chains"] = json::array();
  std::size_t flat = 0;
  for (const auto& c : s.chains) {
    json cj;
    cj["chain_id"] = c.chain_id;
    std::string seq;
    std::vector<Vec3> n, ca, cc, o;
    bool has_o = true;
    for (const auto& r : c.residues) {
      n.push_back(r.n);
      ca.push_back(r.ca);
      cc.push_back(r.c);
      if (r.o) o.push_back(*r.o);
      else has_o = false;
      if (s.native_sequence) seq.push_back(vocab::letter_of((*s.native_sequence)[flat]));
      ++flat;
    }
    cj["seq"] = seq;
    cj["coords"] = {{"N", coords_to_json(n)},
                    {"CA", coords_to_json(ca)},
                    {"C", coords_to_json(cc)},
                    {"O", has_o ? coords_to_json(o) : json(nullptr)}};
    j["chains"].push_back(std::move(cj));
  }
  return j;
}

namespace {

ParsedDataset parse_stream(std::istream& in) {
  ParsedDataset out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw DataError(std::string("malformed JSON: ") + e.what(), line);
    }
    try {
      out.records.push_back(record_from_json(j, line, &out.unknown_residues));
    } catch (const json::exception& e) {
      throw DataError(std::string("schema error: ") + e.what(), line);
    }
  }
  return out;
}

}  // namespace

ParsedDataset parse_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string(), 0);
  return parse_stream(in);
}

ParsedDataset parse_dataset_string(const std::string& text) {
  std::istringstream in(text);
  return parse_stream(in);
}

void write_dataset(const std::filesystem::path& path, const std::vector<Record>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset " + path.string(), 0);
  for (const auto& r : records) out << record_to_json(r.structure).dump() << '\n';
  if (!out) throw DataError("write failed for " + path.string(), 0);
}

}  // namespace seqdesign
