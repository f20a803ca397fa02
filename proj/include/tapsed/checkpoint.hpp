// Copyright 2026 The tapsed Authors
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

// Checkpoint container, version 1: a flat list of named tensors plus the
// serialized run config.
//
//   "TAPSEDC1"                     8-byte magic
//   u32 version (= 1)
//   u64 config length, config text (the flat key = value form)
//   u64 tensor count
//   per tensor: u32 name length, name bytes,
//               u8 kind (0 parameter, 1 stat buffer),
//               u32 rank, u64 extents[rank],
//               f64 data, little-endian
//
// Values are stored as 64-bit floats regardless of the in-memory precision.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "tapsed/model.hpp"

namespace tapsed {

struct CheckpointTensor {
  uint8_t kind = 0;
  std::vector<int64_t> shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::string config_text;
  std::map<std::string, CheckpointTensor> tensors;
};

namespace detail_ckpt {

inline void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}
inline void put_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<char*>(b), 8);
}
inline uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<uint32_t>(b[3]) << 24);
}
inline uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
inline void put_f64(std::ostream& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}
inline double get_f64(std::istream& in) {
  const uint64_t bits = get_u64(in);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace detail_ckpt

template <class T>
void save_checkpoint(const std::string& path, SedModel<T>& model,
                     const std::string& config_text) {
  using namespace detail_ckpt;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  std::vector<std::pair<std::string, CheckpointTensor>> entries;
  model.visit_params([&](Parameter<T>& p) {
    CheckpointTensor t;
    t.kind = 0;
    t.shape = p.tensor.shape();
    t.values.assign(p.tensor.data().begin(), p.tensor.data().end());
    entries.push_back({p.name, std::move(t)});
  });
  model.visit_buffers([&](const StatBuffer& b) {
    CheckpointTensor t;
    t.kind = 1;
    t.shape = {static_cast<int64_t>(b.values->size())};
    t.values = *b.values;
    entries.push_back({b.name, std::move(t)});
  });
  out.write("TAPSEDC1", 8);
  put_u32(out, 1);
  put_u64(out, config_text.size());
  out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
  put_u64(out, entries.size());
  for (const auto& [name, t] : entries) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    out.put(static_cast<char>(t.kind));
    put_u32(out, static_cast<uint32_t>(t.shape.size()));
    for (int64_t e : t.shape) put_u64(out, static_cast<uint64_t>(e));
    for (double v : t.values) put_f64(out, v);
  }
  if (!out) throw std::runtime_error("checkpoint: failed writing " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  using namespace detail_ckpt;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (std::memcmp(magic, "TAPSEDC1", 8) != 0)
    throw std::runtime_error("checkpoint: " + path + " has wrong magic");
  const uint32_t version = get_u32(in);
  if (version != 1)
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version));
  Checkpoint ck;
  const uint64_t cfg_len = get_u64(in);
  ck.config_text.resize(cfg_len);
  in.read(ck.config_text.data(), static_cast<std::streamsize>(cfg_len));
  const uint64_t count = get_u64(in);
  for (uint64_t i = 0; i < count; ++i) {
    const uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    CheckpointTensor t;
    t.kind = static_cast<uint8_t>(in.get());
    const uint32_t rank = get_u32(in);
    int64_t numel = 1;
    for (uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(static_cast<int64_t>(get_u64(in)));
      numel *= t.shape.back();
    }
    t.values.resize(numel);
    for (int64_t j = 0; j < numel; ++j) t.values[j] = get_f64(in);
    ck.tensors[name] = std::move(t);
  }
  if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
  return ck;
}

template <class T>
void restore_model(SedModel<T>& model, const Checkpoint& ck) {
  size_t restored = 0;
  model.visit_params([&](Parameter<T>& p) {
    auto it = ck.tensors.find(p.name);
    TAPSED_CHECK(it != ck.tensors.end(),
                 "checkpoint: parameter '" + p.name + "' not found");
    TAPSED_CHECK(it->second.shape == p.tensor.shape(),
                 "checkpoint: shape mismatch for '" + p.name + "'");
    auto& dst = p.tensor.data();
    for (size_t i = 0; i < dst.size(); ++i)
      dst[i] = static_cast<T>(it->second.values[i]);
    ++restored;
  });
  model.visit_buffers([&](const StatBuffer& b) {
    auto it = ck.tensors.find(b.name);
    TAPSED_CHECK(it != ck.tensors.end(),
                 "checkpoint: buffer '" + b.name + "' not found");
    *b.values = it->second.values;
    ++restored;
  });
  (void)restored;
}

}  // namespace tapsed
