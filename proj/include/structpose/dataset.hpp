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

// Synthetic dataset construction and its on-disk layout.
//
// A dataset directory holds:
//   manifest.json   sample count, geometry, pose scale, splits, format version
//   skeleton.json   the kinematic template used for generation
//   poses.txt       one row per sample: id, 51 joint coordinates (mm), 48 joint
//                   angles (rad), whitespace separated, %.17g
//   images.bin      sample-major raw little-endian float32, [N, C, H, W]
//   checksums.txt   "<16 hex digit FNV-1a 64> <file name>" for the four files above

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "structpose/data.hpp"
#include "structpose/hash.hpp"

namespace structpose {

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

class DatasetError : public std::runtime_error {
 public:
  enum class Kind { io, version_mismatch, truncated, checksum_mismatch, inconsistent, parse };
  DatasetError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct DatasetManifest {
  std::uint32_t format_version = kDatasetFormatVersion;
  std::size_t sample_count = 0;
  std::size_t channels = 1;
  std::size_t height = 80;
  std::size_t width = 80;
  double pose_scale_mm = 1000.0;
  std::string skeleton_file = "skeleton.json";
  std::vector<std::size_t> train, val, test;
  std::uint64_t seed = 0;

  std::size_t image_volume() const { return channels * height * width; }
};

struct Dataset {
  DatasetManifest manifest;
  SkeletonTemplate skeleton = SkeletonTemplate::standard();
  std::vector<Pose> poses;
  std::vector<JointAngles> angles;
  std::vector<float> images;  // [N, C, H, W]

  ImagePatch image(std::size_t i) const {
    const std::size_t vol = manifest.image_volume();
    ImagePatch out(manifest.channels, manifest.height, manifest.width);
    for (std::size_t k = 0; k < vol; ++k) out.pixels[k] = static_cast<double>(images.at(i * vol + k));
    return out;
  }

  const std::vector<std::size_t>& split(const std::string& name) const {
    if (name == "train") return manifest.train;
    if (name == "val") return manifest.val;
    if (name == "test") return manifest.test;
    throw std::invalid_argument("unknown split '" + name + "' (expected train, val or test)");
  }
};

struct GenerateConfig {
  std::size_t train = 500;
  std::size_t val = 0;
  std::size_t test = 200;
  SceneConfig scene;
  SamplerRanges ranges = SamplerRanges::standard();
  double pose_scale_mm = 1000.0;
  std::uint64_t seed = 1;
  std::size_t max_attempts = 1000;  // per sample, before giving up on rejections

  std::size_t total() const { return train + val + test; }
};

// Sample i is drawn from its own stream seeded by (seed, i), so the result does
// not depend on generation order. Unrenderable poses are redrawn.
inline Dataset generate_dataset(const GenerateConfig& cfg, const SkeletonTemplate& skeleton = SkeletonTemplate::standard()) {
  if (cfg.total() == 0) throw std::invalid_argument("generate: requested 0 samples");
  cfg.scene.validate();
  cfg.ranges.validate();
  skeleton.validate();
  Dataset ds;
  ds.skeleton = skeleton;
  auto& m = ds.manifest;
  m.sample_count = cfg.total();
  m.channels = 1;
  m.height = cfg.scene.render_height;
  m.width = cfg.scene.render_width;
  m.pose_scale_mm = cfg.pose_scale_mm;
  m.seed = cfg.seed;
  ds.images.reserve(m.sample_count * m.image_volume());
  for (std::size_t i = 0; i < m.sample_count; ++i) {
    std::mt19937_64 rng(derive_seed(cfg.seed, {i}));
    bool done = false;
    for (std::size_t attempt = 0; attempt < cfg.max_attempts && !done; ++attempt) {
      GeneratedPose g = generate_pose(skeleton, cfg.ranges, rng);
      try {
        const ImagePatch img = render_pose(g.pose, cfg.scene, skeleton);
        for (double v : img.pixels.values()) ds.images.push_back(static_cast<float>(v));
        ds.poses.push_back(g.pose);
        ds.angles.push_back(g.angles);
        done = true;
      } catch (const RenderError&) {
      }
    }
    if (!done) throw std::runtime_error("generate: sample " + std::to_string(i) + " could not be rendered");
  }
  for (std::size_t i = 0; i < cfg.train; ++i) m.train.push_back(i);
  for (std::size_t i = 0; i < cfg.val; ++i) m.val.push_back(cfg.train + i);
  for (std::size_t i = 0; i < cfg.test; ++i) m.test.push_back(cfg.train + cfg.val + i);
  return ds;
}

// ---------------------------------------------------------------------------
// Persistence.

namespace detail {

inline std::string read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DatasetError(DatasetError::Kind::io, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError(DatasetError::Kind::io, "cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DatasetError(DatasetError::Kind::io, "failed writing " + p.string());
}

inline std::string hex_digest(const std::string& bytes) {
  Fnv1a h;
  h.update(bytes.data(), bytes.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h.digest()));
  return buf;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["format"] = "structpose-dataset";
  j["format_version"] = m.format_version;
  j["sample_count"] = m.sample_count;
  j["image"] = {{"channels", m.channels}, {"height", m.height}, {"width", m.width}, {"dtype", "float32-le"}};
  j["pose_scale_mm"] = m.pose_scale_mm;
  j["skeleton_file"] = m.skeleton_file;
  j["splits"] = {{"train", m.train}, {"val", m.val}, {"test", m.test}};
  j["seed"] = m.seed;
  return j;
}

inline void require_keys(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw DatasetError(DatasetError::Kind::parse, where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw DatasetError(DatasetError::Kind::parse, where + ": unknown key '" + key + "'");
  }
  for (const char* k : keys) {
    if (!j.contains(k)) throw DatasetError(DatasetError::Kind::parse, where + ": missing key '" + std::string(k) + "'");
  }
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  try {
    require_keys(j, {"format", "format_version", "sample_count", "image", "pose_scale_mm", "skeleton_file", "splits", "seed"},
                 "manifest");
    if (j.at("format") != "structpose-dataset") throw DatasetError(DatasetError::Kind::parse, "manifest: wrong format tag");
    DatasetManifest m;
    m.format_version = j.at("format_version").get<std::uint32_t>();
    if (m.format_version != kDatasetFormatVersion) {
      throw DatasetError(DatasetError::Kind::version_mismatch,
                         "manifest: format version " + std::to_string(m.format_version) + ", this build reads " +
                             std::to_string(kDatasetFormatVersion));
    }
    m.sample_count = j.at("sample_count").get<std::size_t>();
    const auto& img = j.at("image");
    require_keys(img, {"channels", "height", "width", "dtype"}, "manifest.image");
    if (img.at("dtype") != "float32-le") throw DatasetError(DatasetError::Kind::parse, "manifest: unsupported dtype");
    m.channels = img.at("channels").get<std::size_t>();
    m.height = img.at("height").get<std::size_t>();
    m.width = img.at("width").get<std::size_t>();
    m.pose_scale_mm = j.at("pose_scale_mm").get<double>();
    m.skeleton_file = j.at("skeleton_file").get<std::string>();
    const auto& s = j.at("splits");
    require_keys(s, {"train", "val", "test"}, "manifest.splits");
    m.train = s.at("train").get<std::vector<std::size_t>>();
    m.val = s.at("val").get<std::vector<std::size_t>>();
    m.test = s.at("test").get<std::vector<std::size_t>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(DatasetError::Kind::parse, std::string("manifest: ") + e.what());
  }
}

inline void check_manifest(const DatasetManifest& m) {
  using K = DatasetError::Kind;
  if (m.sample_count == 0) throw DatasetError(K::inconsistent, "manifest: sample count is zero");
  if (m.channels == 0 || m.height == 0 || m.width == 0) throw DatasetError(K::inconsistent, "manifest: empty image geometry");
  if (!(m.pose_scale_mm > 0.0)) throw DatasetError(K::inconsistent, "manifest: pose scale must be positive");
  std::set<std::size_t> seen;
  for (const auto* split : {&m.train, &m.val, &m.test}) {
    for (std::size_t id : *split) {
      if (id >= m.sample_count) throw DatasetError(K::inconsistent, "manifest: split id " + std::to_string(id) + " out of range");
      if (!seen.insert(id).second) throw DatasetError(K::inconsistent, "manifest: sample " + std::to_string(id) + " in two splits");
    }
  }
}

}  // namespace detail

inline void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  const auto& m = ds.manifest;
  if (ds.poses.size() != m.sample_count || ds.angles.size() != m.sample_count ||
      ds.images.size() != m.sample_count * m.image_volume()) {
    throw DatasetError(DatasetError::Kind::inconsistent, "write_dataset: arrays do not match the manifest");
  }
  detail::check_manifest(m);
  std::filesystem::create_directories(dir);

  std::map<std::string, std::string> files;
  files["manifest.json"] = detail::manifest_to_json(m).dump(2) + "\n";
  files[m.skeleton_file] = skeleton_to_json(ds.skeleton).dump(2) + "\n";
  std::string rows = "# id x0 y0 z0 ... x16 y16 z16 (mm) a0 ... a47 (rad, per bone z y x)\n";
  for (std::size_t i = 0; i < m.sample_count; ++i) {
    rows += std::to_string(i);
    for (double v : ds.poses[i].flat()) rows += ' ' + detail::format_double(v);
    for (double v : ds.angles[i].flat()) rows += ' ' + detail::format_double(v);
    rows += '\n';
  }
  files["poses.txt"] = std::move(rows);
  std::string blob(ds.images.size() * sizeof(float), '\0');
  std::memcpy(blob.data(), ds.images.data(), blob.size());
  files["images.bin"] = std::move(blob);

  std::string sums;
  for (const auto& [name, bytes] : files) {
    detail::write_file_bytes(dir / name, bytes);
    sums += detail::hex_digest(bytes) + ' ' + name + '\n';
  }
  detail::write_file_bytes(dir / "checksums.txt", sums);
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  using K = DatasetError::Kind;
  std::map<std::string, std::string> expected;
  {
    std::istringstream in(detail::read_file_bytes(dir / "checksums.txt"));
    std::string digest, name;
    while (in >> digest >> name) expected[name] = digest;
  }
  auto load_checked = [&](const std::string& name) {
    const std::string bytes = detail::read_file_bytes(dir / name);
    const auto it = expected.find(name);
    if (it == expected.end()) throw DatasetError(K::checksum_mismatch, "checksums.txt has no entry for " + name);
    if (it->second != detail::hex_digest(bytes)) throw DatasetError(K::checksum_mismatch, "checksum mismatch in " + name);
    return bytes;
  };

  Dataset ds;
  nlohmann::json mj;
  {
    const std::string text = load_checked("manifest.json");
    try {
      mj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(K::parse, std::string("manifest.json: ") + e.what());
    }
  }
  ds.manifest = detail::manifest_from_json(mj);
  const auto& m = ds.manifest;
  detail::check_manifest(m);

  try {
    ds.skeleton = skeleton_from_json(nlohmann::json::parse(load_checked(m.skeleton_file)));
  } catch (const DatasetError&) {
    throw;
  } catch (const std::exception& e) {
    throw DatasetError(K::parse, std::string("skeleton: ") + e.what());
  }

  const std::string blob = load_checked("images.bin");
  if (blob.size() != m.sample_count * m.image_volume() * sizeof(float)) {
    throw DatasetError(blob.size() < m.sample_count * m.image_volume() * sizeof(float) ? K::truncated : K::inconsistent,
                       "images.bin holds " + std::to_string(blob.size()) + " bytes, manifest declares " +
                           std::to_string(m.sample_count) + " images of " + std::to_string(m.image_volume()) + " floats");
  }
  ds.images.resize(m.sample_count * m.image_volume());
  std::memcpy(ds.images.data(), blob.data(), blob.size());

  std::istringstream rows(load_checked("poses.txt"));
  std::string line;
  std::size_t row = 0;
  while (std::getline(rows, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::size_t id = 0;
    std::vector<double> values;
    std::string tok;
    if (!(ls >> id) || id != row) throw DatasetError(K::inconsistent, "poses.txt: row " + std::to_string(row) + " has wrong id");
    while (ls >> tok) {
      char* end = nullptr;
      values.push_back(std::strtod(tok.c_str(), &end));
      if (end == tok.c_str() || *end != '\0') throw DatasetError(K::parse, "poses.txt: bad number '" + tok + "'");
    }
    if (values.size() != kPoseDim + 3 * kBoneCount) {
      throw DatasetError(K::inconsistent, "poses.txt: row " + std::to_string(row) + " has " +
                                              std::to_string(values.size()) + " values, expected 99");
    }
    ds.poses.push_back(Pose::from_flat(std::span<const double>(values).first(kPoseDim)));
    ds.angles.push_back(JointAngles::from_flat(std::span<const double>(values).subspan(kPoseDim)));
    ++row;
  }
  if (row != m.sample_count) {
    throw DatasetError(K::inconsistent, "poses.txt has " + std::to_string(row) + " rows, manifest declares " +
                                            std::to_string(m.sample_count));
  }
  return ds;
}

}  // namespace structpose
