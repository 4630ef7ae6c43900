// Copyright 2026 The chanalloc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Parameter checkpoint container.
//
//   bytes 0..3   "CMGR"
//   u16 LE       format version
//   u32 LE       header length H
//   H bytes      JSON architecture header (carries a "kind" tag)
//   f64 LE * P   parameters in the model's canonical flat order
//
// The payload must contain exactly the number of values the header implies.

#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chanalloc/errors.hpp"
#include "chanalloc/gnn.hpp"

namespace chanalloc {

inline constexpr std::string_view kCheckpointMagic = "CMGR";
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointBlob {
  nlohmann::json header;
  std::vector<double> values;
};

namespace detail {

inline void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

inline std::uint64_t get_le(std::string_view in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
  }
  return v;
}

}  // namespace detail

inline std::string encode_checkpoint(const nlohmann::ordered_json& header, const Vector& values) {
  const std::string head = header.dump();
  std::string out(kCheckpointMagic);
  detail::put_le(out, kCheckpointVersion, 2);
  detail::put_le(out, head.size(), 4);
  out += head;
  out.reserve(out.size() + static_cast<std::size_t>(values.size()) * 8);
  for (Eigen::Index i = 0; i < values.size(); ++i) detail::put_le(out, std::bit_cast<std::uint64_t>(values[i]), 8);
  return out;
}

/// Splits a container into header and payload; the caller checks the count.
inline CheckpointBlob decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 10 || bytes.substr(0, 4) != kCheckpointMagic) throw LoadError("checkpoint: bad magic");
  const auto version = static_cast<std::uint16_t>(detail::get_le(bytes, 4, 2));
  if (version != kCheckpointVersion) throw LoadError("checkpoint: unsupported format version " + std::to_string(version));
  const auto head_len = static_cast<std::size_t>(detail::get_le(bytes, 6, 4));
  if (bytes.size() < 10 + head_len) throw LoadError("checkpoint: truncated header");
  CheckpointBlob blob;
  try {
    blob.header = nlohmann::json::parse(bytes.substr(10, head_len));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("checkpoint: header is not JSON: ") + e.what());
  }
  const std::size_t payload = bytes.size() - 10 - head_len;
  if (payload % 8 != 0) throw LoadError("checkpoint: truncated payload");
  blob.values.resize(payload / 8);
  for (std::size_t i = 0; i < blob.values.size(); ++i) {
    blob.values[i] = std::bit_cast<double>(detail::get_le(bytes, 10 + head_len + 8 * i, 8));
  }
  return blob;
}

inline Vector payload_vector(const CheckpointBlob& blob, std::size_t expected) {
  if (blob.values.size() < expected) throw LoadError("checkpoint: payload truncated relative to header shape");
  if (blob.values.size() > expected) throw LoadError("checkpoint: payload larger than header shape");
  return Eigen::Map<const Vector>(blob.values.data(), static_cast<Eigen::Index>(expected));
}

inline std::string serialize_params(const GnnParams& params) {
  params.check_shapes();
  return encode_checkpoint(arch_to_json(params.arch), params.flatten());
}

inline GnnParams deserialize_params(std::string_view bytes) {
  const CheckpointBlob blob = decode_checkpoint(bytes);
  if (blob.header.value("kind", std::string("gnn")) != "gnn") throw LoadError("checkpoint: not a GNN checkpoint");
  GnnArch arch;
  try {
    arch = arch_from_json(blob.header);
  } catch (const ConfigError& e) {
    throw LoadError(e.what());
  }
  GnnParams params = GnnParams::zeros(arch);
  params.unflatten(payload_vector(blob, arch.parameter_count()));
  return params;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace chanalloc
