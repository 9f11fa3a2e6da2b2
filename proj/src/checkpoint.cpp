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

#include "seqdesign/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "seqdesign/vocab.hpp"

namespace seqdesign {

using nlohmann::json;
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

namespace {

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U r = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) r = (r << 8) | ((v >> (8 * i)) & 0xFF);
    return r;
  }
  return v;
}

void append_value(std::vector<char>& buf, double v, Precision p) {
  if (p == Precision::kF64) {
    const auto u = to_little(std::bit_cast<std::uint64_t>(v));
    const char* b = reinterpret_cast<const char*>(&u);
    buf.insert(buf.end(), b, b + 8);
  } else {
    const auto u = to_little(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    const char* b = reinterpret_cast<const char*>(&u);
    buf.insert(buf.end(), b, b + 4);
  }
}

double read_value(const char* p, Precision prec) {
  if (prec == Precision::kF64) {
    std::uint64_t u;
    std::memcpy(&u, p, 8);
    return std::bit_cast<double>(to_little(u));
  }
  std::uint32_t u;
  std::memcpy(&u, p, 4);
  return static_cast<double>(std::bit_cast<float>(to_little(u)));
}

std::size_t width(Precision p) { return p == Precision::kF64 ? 8 : 4; }

void write_file(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

Precision precision_from_string(const std::string& s) {
  if (s == "f64") return Precision::kF64;
  if (s == "f32") return Precision::kF32;
  throw std::invalid_argument("precision must be f32 or f64, got '" + s + "'");
}

std::string to_string(Precision p) { return p == Precision::kF64 ? "f64" : "f32"; }

void quantize_f32(Matrix& m) {
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<double>(static_cast<float>(m[i]));
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CheckpointError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["artifact_version"] = kArtifactVersion;
  manifest["vocab"] = vocab::symbols();
  manifest["model_config"] = ckpt.model_config;
  manifest["step"] = ckpt.step;
  manifest["rng_state"] = ckpt.rng_state;
  manifest["precision"] = to_string(ckpt.precision);
  json tensors = json::array();
  std::vector<char> buf;
  for (const auto& p : ckpt.params) {
    tensors.push_back({{"name", p->name},
                       {"shape", {p->value.rows(), p->value.cols()}},
                       {"dtype", to_string(ckpt.precision)},
                       {"offset", buf.size()}});
    for (std::size_t i = 0; i < p->value.size(); ++i) append_value(buf, p->value[i], ckpt.precision);
  }
  manifest["tensors"] = std::move(tensors);
  manifest["tensors_bytes"] = buf.size();
  write_file(dir / "tensors.bin", std::string(buf.begin(), buf.end()));
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  const fs::path tpath = dir / "tensors.bin";
  if (!fs::is_regular_file(mpath)) throw CheckpointError("checkpoint manifest not found: " + mpath.string());
  if (!fs::is_regular_file(tpath)) throw CheckpointError("checkpoint tensors not found: " + tpath.string());
  json manifest;
  try {
    std::ifstream in(mpath);
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint manifest " + mpath.string() + ": " + e.what());
  }
  Checkpoint out;
  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion)
      throw CheckpointError("checkpoint format version " + std::to_string(version) +
                            " is not supported (this build reads version " +
                            std::to_string(kCheckpointFormatVersion) + ")");
    const auto symbols = manifest.at("vocab").get<std::vector<std::string>>();
    const auto& expected = vocab::symbols();
    if (!std::equal(symbols.begin(), symbols.end(), expected.begin(), expected.end()))
      throw CheckpointError("checkpoint vocabulary differs from this build's vocabulary");
    out.model_config = manifest.at("model_config");
    out.step = manifest.at("step").get<std::uint64_t>();
    out.rng_state = manifest.value("rng_state", json::object());
    out.precision = precision_from_string(manifest.at("precision").get<std::string>());

    std::ifstream in(tpath, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t declared = manifest.at("tensors_bytes").get<std::size_t>();
    if (bytes.size() != declared)
      throw CheckpointError("tensors.bin has " + std::to_string(bytes.size()) + " bytes, manifest declares " +
                            std::to_string(declared) + " (truncated or corrupt checkpoint)");
    for (const json& t : manifest.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto shape = t.at("shape").get<std::vector<std::size_t>>();
      const Precision dtype = precision_from_string(t.at("dtype").get<std::string>());
      const std::size_t offset = t.at("offset").get<std::size_t>();
      if (shape.size() != 2) throw CheckpointError("tensor '" + name + "' has a non-2D shape");
      const std::size_t count = shape[0] * shape[1];
      const std::size_t w = width(dtype);
      if (offset > bytes.size() || count > (bytes.size() - offset) / w)
        throw CheckpointError("tensor '" + name + "' extends past the end of tensors.bin");
      if (out.params.contains(name)) throw CheckpointError("tensor '" + name + "' appears twice");
      Matrix m(shape[0], shape[1]);
      for (std::size_t i = 0; i < count; ++i) m[i] = read_value(bytes.data() + offset + i * w, dtype);
      out.params.add(name, std::move(m));
    }
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint manifest " + mpath.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  return out;
}

void restore_params(ParamStore& dst, const ParamStore& src) {
  for (auto& p : dst) {
    if (!src.contains(p->name)) throw CheckpointError("checkpoint is missing tensor '" + p->name + "'");
    const Param& s = src.at(p->name);
    if (!s.value.same_shape(p->value))
      throw CheckpointError("checkpoint tensor '" + p->name + "' has shape " + s.value.shape_string() +
                            ", model expects " + p->value.shape_string());
    p->value = s.value;
  }
}

}  // namespace seqdesign
