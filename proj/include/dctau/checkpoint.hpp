/*
 * Copyright 2026 The dctau Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Binary checkpoint:
//
//   "DCTAUCKP"              8 bytes magic
//   version                 u32
//   input_dim               u64
//   tensor count N          u32
//   N x { name_len u32, name bytes, rows u64, cols u64 }   shape manifest
//   N x rows*cols f64       parameter blocks, row-major
//
// All integers and floats are little-endian.

#ifndef DCTAU_CHECKPOINT_HPP_
#define DCTAU_CHECKPOINT_HPP_

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dctau/common.hpp"
#include "dctau/model.hpp"

namespace dctau {

inline constexpr char kCheckpointMagic[8] = {'D', 'C', 'T', 'A', 'U', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void put_le(std::ostream& out, T value) {
  std::uint64_t bits = 0;
  if constexpr (std::is_floating_point_v<T>) {
    bits = std::bit_cast<std::uint64_t>(value);
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xff));
}

template <class T>
T get_le(std::istream& in) {
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw IoError("checkpoint: truncated file");
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  if constexpr (std::is_floating_point_v<T>) {
    return std::bit_cast<T>(bits);
  } else {
    return static_cast<T>(bits);
  }
}

struct ManifestEntry {
  std::string name;
  std::uint64_t rows, cols;
};

// Parses "<part>.<layer>.<weight|bias>".
inline void place_tensor(ModelParams& p, const ManifestEntry& e, const std::vector<double>& data) {
  const auto d1 = e.name.find('.');
  const auto d2 = e.name.rfind('.');
  if (d1 == std::string::npos || d1 == d2) throw IoError("checkpoint: bad tensor name " + e.name);
  const std::string part = e.name.substr(0, d1);
  const std::string kind = e.name.substr(d2 + 1);
  const auto layer = static_cast<std::size_t>(std::stoul(e.name.substr(d1 + 1, d2 - d1 - 1)));
  Mlp* mlp = part == "encoder" ? &p.encoder : part == "projection" ? &p.projection
                                            : part == "classifier" ? &p.classifier : nullptr;
  if (!mlp) throw IoError("checkpoint: unknown part in " + e.name);
  if (mlp->layers.size() <= layer) mlp->layers.resize(layer + 1);
  const auto rows = static_cast<Eigen::Index>(e.rows);
  const auto cols = static_cast<Eigen::Index>(e.cols);
  if (kind == "weight") {
    mlp->layers[layer].weight = Eigen::Map<const Matrix>(data.data(), rows, cols);
  } else if (kind == "bias") {
    if (rows != 1) throw IoError("checkpoint: bias must have one row: " + e.name);
    mlp->layers[layer].bias = Eigen::Map<const RowVector>(data.data(), cols);
  } else {
    throw IoError("checkpoint: unknown tensor kind in " + e.name);
  }
}

}  // namespace detail

inline void save_checkpoint(std::ostream& out, const ModelParams& params) {
  ModelParams copy = params;
  const auto views = tensors(copy);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(params.input_dim));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(views.size()));
  for (const auto& v : views) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v.name.size()));
    out.write(v.name.data(), static_cast<std::streamsize>(v.name.size()));
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(v.rows));
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(v.cols));
  }
  for (const auto& v : views) {
    for (Eigen::Index i = 0; i < v.size(); ++i) detail::put_le<double>(out, v.data[i]);
  }
}

inline ModelParams load_checkpoint(std::istream& in) {
  char magic[sizeof(kCheckpointMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw IoError("checkpoint: bad magic");
  }
  const auto version = detail::get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  ModelParams p;
  p.input_dim = static_cast<Eigen::Index>(detail::get_le<std::uint64_t>(in));
  const auto count = detail::get_le<std::uint32_t>(in);
  std::vector<detail::ManifestEntry> manifest;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto len = detail::get_le<std::uint32_t>(in);
    if (len > 256) throw IoError("checkpoint: implausible tensor name length");
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rows = detail::get_le<std::uint64_t>(in);
    const auto cols = detail::get_le<std::uint64_t>(in);
    if (rows * cols > (1ULL << 28)) throw IoError("checkpoint: implausible tensor shape");
    manifest.push_back({std::move(name), rows, cols});
  }
  for (const auto& e : manifest) {
    std::vector<double> data(e.rows * e.cols);
    for (auto& x : data) x = detail::get_le<double>(in);
    detail::place_tensor(p, e, data);
  }
  if (p.projection.empty() || p.classifier.empty()) throw IoError("checkpoint: missing projection or classifier");
  return p;
}

inline void save_checkpoint_file(const std::string& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  save_checkpoint(out, params);
  if (!out) throw IoError("write failed: " + path);
}

inline ModelParams load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  return load_checkpoint(in);
}

}  // namespace dctau

#endif  // DCTAU_CHECKPOINT_HPP_
