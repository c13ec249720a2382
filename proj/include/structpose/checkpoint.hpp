// Copyright 2026 The StructPose Authors.
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

// Binary model checkpoint:
//
//   magic "SPNETCK\0" | u32 version | architecture header | u64 seed |
//   u32 tensor count | tensors... | u64 FNV-1a of all preceding bytes
//
// Each tensor is: u32 name length, name bytes, u32 rank, u64 dims[rank],
// f64 values[product(dims)]. Integers and doubles are little-endian. Every
// layer contributes a weight tensor ("<layer>.weight") and a bias tensor
// ("<layer>.bias"); absent layers are written with rank 1 and zero length.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "structpose/hash.hpp"
#include "structpose/network.hpp"

namespace structpose {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::array<char, 8> kCheckpointMagic = {'S', 'P', 'N', 'E', 'T', 'C', 'K', '\0'};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<unsigned char>& b, std::size_t limit) : bytes_(b), limit_(limit) {}
  void raw(void* p, std::size_t n) {
    if (pos_ + n > limit_) throw CheckpointError("checkpoint: truncated file");
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  double f64() {
    double v;
    raw(&v, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > 256) throw CheckpointError("checkpoint: implausible name length");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  std::size_t position() const { return pos_; }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

inline void write_tensor(ByteWriter& w, const std::string& name, const Shape& shape, std::span<const double> values) {
  w.str(name);
  w.u32(static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) w.u64(d);
  for (double v : values) w.f64(v);
}

inline std::vector<double> read_tensor(ByteReader& r, const std::string& expect_name, Shape& shape) {
  const std::string name = r.str();
  if (name != expect_name) throw CheckpointError("checkpoint: expected tensor '" + expect_name + "', found '" + name + "'");
  const std::uint32_t rank = r.u32();
  if (rank > 8) throw CheckpointError("checkpoint: implausible rank for " + name);
  shape.assign(rank, 0);
  std::size_t volume = 1;
  for (auto& d : shape) {
    d = r.u64();
    volume *= d;
  }
  if (volume > (std::size_t{1} << 32)) throw CheckpointError("checkpoint: implausible size for " + name);
  std::vector<double> values(volume);
  for (auto& v : values) v = r.f64();
  return values;
}

}  // namespace detail

inline std::vector<unsigned char> serialize_network(const ScoreNetwork& net) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic.data(), kCheckpointMagic.size());
  w.u32(kCheckpointVersion);
  const auto& a = net.architecture();
  w.u64(a.channels);
  w.u64(a.height);
  w.u64(a.width);
  for (const auto& s : a.stages) {
    w.u64(s.kernel);
    w.u64(s.filters);
    w.u64(s.pool);
  }
  w.u64(a.fc1);
  w.u64(a.fc2);
  w.u64(a.fc3);
  w.u64(a.embedding_dim);
  w.u64(a.fc5);
  w.u32(a.pose_embedding == PoseEmbedding::raw ? 1 : 0);
  w.f64(a.dropout_rate);
  w.f64(a.pose_scale_mm);
  w.u64(net.seed());
  w.u32(20);
  net.parameters().for_each([&](const char* name, const LayerParams& l) {
    const Shape ws = l.weights.rank() == 0 ? Shape{0} : l.weights.shape();
    detail::write_tensor(w, std::string(name) + ".weight", ws, l.weights.span());
    detail::write_tensor(w, std::string(name) + ".bias", {l.bias.size()}, l.bias);
  });
  Fnv1a h;
  h.update(w.bytes().data(), w.bytes().size());
  w.u64(h.digest());
  return std::move(w.bytes());
}

inline ScoreNetwork deserialize_network(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < kCheckpointMagic.size() + 12) throw CheckpointError("checkpoint: truncated file");
  if (std::memcmp(bytes.data(), kCheckpointMagic.data(), kCheckpointMagic.size()) != 0) {
    throw CheckpointError("checkpoint: bad magic");
  }
  const std::size_t body = bytes.size() - 8;
  detail::ByteReader r(bytes, body);
  std::array<char, 8> magic{};
  r.raw(magic.data(), magic.size());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  Fnv1a h;
  h.update(bytes.data(), body);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (stored != h.digest()) throw CheckpointError("checkpoint: checksum mismatch");

  NetworkArchitecture a;
  a.channels = r.u64();
  a.height = r.u64();
  a.width = r.u64();
  for (auto& s : a.stages) {
    s.kernel = r.u64();
    s.filters = r.u64();
    s.pool = r.u64();
  }
  a.fc1 = r.u64();
  a.fc2 = r.u64();
  a.fc3 = r.u64();
  a.embedding_dim = r.u64();
  a.fc5 = r.u64();
  a.pose_embedding = r.u32() == 1 ? PoseEmbedding::raw : PoseEmbedding::two_layer;
  a.dropout_rate = r.f64();
  a.pose_scale_mm = r.f64();
  const std::uint64_t seed = r.u64();
  if (r.u32() != 20) throw CheckpointError("checkpoint: unexpected tensor count");
  Parameters p;
  p.for_each([&](const char* name, LayerParams& l) {
    Shape ws, bs;
    auto wv = detail::read_tensor(r, std::string(name) + ".weight", ws);
    auto bv = detail::read_tensor(r, std::string(name) + ".bias", bs);
    l.weights = wv.empty() ? Tensor() : Tensor(ws, std::move(wv));
    l.bias = std::move(bv);
  });
  if (r.position() != body) throw CheckpointError("checkpoint: trailing bytes");
  try {
    return ScoreNetwork(a, std::move(p), seed);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const ScoreNetwork& net, const std::string& path) {
  const auto bytes = serialize_network(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path);
}

inline ScoreNetwork load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_network(bytes);
}

}  // namespace structpose
