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

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "structpose/pose.hpp"

namespace structpose {

// Rooted kinematic tree. Joints are stored in topological order: the root is
// joint 0 with parent -1 and every other joint's parent has a smaller index.
// Bone b connects joint b+1 to its parent.
struct SkeletonTemplate {
  std::array<std::string, kJointCount> names{};
  std::array<int, kJointCount> parent{};
  std::array<double, kBoneCount> bone_lengths{};
  std::array<Eigen::Vector3d, kBoneCount> rest_directions{};

  void validate() const {
    if (parent[0] != -1) throw std::invalid_argument("SkeletonTemplate: joint 0 must be the root (parent -1)");
    for (std::size_t j = 1; j < kJointCount; ++j) {
      if (parent[j] < 0 || static_cast<std::size_t>(parent[j]) >= j) {
        throw std::invalid_argument("SkeletonTemplate: joint " + std::to_string(j) + " has parent " +
                                    std::to_string(parent[j]) + "; parents must precede children");
      }
    }
    for (std::size_t b = 0; b < kBoneCount; ++b) {
      if (!(bone_lengths[b] > 0.0) || !std::isfinite(bone_lengths[b])) {
        throw std::invalid_argument("SkeletonTemplate: bone " + std::to_string(b) + " length must be positive");
      }
      if (std::abs(rest_directions[b].norm() - 1.0) > 1e-9) {
        throw std::invalid_argument("SkeletonTemplate: rest direction " + std::to_string(b) + " is not unit norm");
      }
    }
  }

  // pelvis -> {spine -> neck -> head -> nose, hips -> knees -> ankles,
  // neck -> shoulders -> elbows -> wrists}. Z is up, the body faces -Y and
  // its left side is +X. Arms are horizontal (T pose).
  static SkeletonTemplate standard() {
    SkeletonTemplate t;
    t.names = {"pelvis",  "spine",   "neck",    "head",       "nose",    "l_hip",
               "l_knee",  "l_ankle", "r_hip",   "r_knee",     "r_ankle", "l_shoulder",
               "l_elbow", "l_wrist", "r_shoulder", "r_elbow", "r_wrist"};
    t.parent = {-1, 0, 1, 2, 3, 0, 5, 6, 0, 8, 9, 2, 11, 12, 2, 14, 15};
    t.bone_lengths = {240, 260, 120, 100, 130, 450, 440, 130, 450, 440, 150, 280, 250, 150, 280, 250};
    const Eigen::Vector3d up{0, 0, 1}, down{0, 0, -1}, left{1, 0, 0}, right{-1, 0, 0}, forward{0, -1, 0};
    t.rest_directions = {up, up, up, forward, left, down, down, right, down, down, left, left, left, right, right, right};
    return t;
  }

  bool is_left(std::size_t joint) const { return names[joint].starts_with("l_"); }
  bool is_right(std::size_t joint) const { return names[joint].starts_with("r_"); }
};

// Per-bone Z-Y-X intrinsic Euler angles (radians): R = Rz(z) * Ry(y) * Rx(x).
struct JointAngles {
  std::array<Eigen::Vector3d, kBoneCount> bones{};

  JointAngles() {
    for (auto& b : bones) b.setZero();
  }

  static JointAngles from_flat(std::span<const double> flat) {
    if (flat.size() != kBoneCount * 3) {
      throw std::invalid_argument("JointAngles: expected 48 values, got " + std::to_string(flat.size()));
    }
    JointAngles a;
    for (std::size_t b = 0; b < kBoneCount; ++b) a.bones[b] = {flat[3 * b], flat[3 * b + 1], flat[3 * b + 2]};
    return a;
  }

  std::array<double, kBoneCount * 3> flat() const {
    std::array<double, kBoneCount * 3> out{};
    for (std::size_t b = 0; b < kBoneCount; ++b) {
      for (int k = 0; k < 3; ++k) out[3 * b + k] = bones[b][k];
    }
    return out;
  }

  bool valid() const {
    for (const auto& b : bones) {
      for (int k = 0; k < 3; ++k) {
        if (!(std::abs(b[k]) <= std::numbers::pi)) return false;
      }
    }
    return true;
  }

  friend bool operator==(const JointAngles& a, const JointAngles& b) { return a.bones == b.bones; }
};

inline double wrap_angle(double a) {
  if (a >= -std::numbers::pi && a <= std::numbers::pi) return a;
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a;
}

inline Eigen::Matrix3d euler_zyx(const Eigen::Vector3d& zyx) {
  return (Eigen::AngleAxisd(zyx[0], Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(zyx[1], Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(zyx[2], Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

inline Pose forward_kinematics(const SkeletonTemplate& skeleton, const JointAngles& angles) {
  Pose pose;
  std::array<Eigen::Matrix3d, kJointCount> frame{};
  frame[0].setIdentity();
  pose.joints[0].setZero();
  for (std::size_t j = 1; j < kJointCount; ++j) {
    const std::size_t b = j - 1;
    const auto p = static_cast<std::size_t>(skeleton.parent[j]);
    frame[j] = frame[p] * euler_zyx(angles.bones[b]);
    pose.joints[j] = pose.joints[p] + frame[j] * (skeleton.bone_lengths[b] * skeleton.rest_directions[b]);
  }
  return pose;
}

struct PoseError {
  double mpjpe = 0.0;
  std::array<double, kJointCount> per_joint{};
};

inline PoseError pose_error(const Pose& a, const Pose& b) {
  PoseError e;
  double sum = 0.0;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    e.per_joint[j] = (a.joints[j] - b.joints[j]).norm();
    sum += e.per_joint[j];
  }
  e.mpjpe = sum / static_cast<double>(kJointCount);
  return e;
}

// Mean per-joint Euclidean distance in mm, no alignment.
inline double mpjpe(const Pose& a, const Pose& b) { return pose_error(a, b).mpjpe; }

inline Pose root_center(const Pose& p) {
  Pose out = p;
  const Eigen::Vector3d root = p.joints[0];
  for (auto& j : out.joints) j -= root;
  return out;
}

// Segment length of each bone in a posed skeleton.
inline std::array<double, kBoneCount> bone_lengths(const SkeletonTemplate& skeleton, const Pose& pose) {
  std::array<double, kBoneCount> out{};
  for (std::size_t j = 1; j < kJointCount; ++j) {
    out[j - 1] = (pose.joints[j] - pose.joints[static_cast<std::size_t>(skeleton.parent[j])]).norm();
  }
  return out;
}

inline double max_bone_length_error(const SkeletonTemplate& skeleton, const Pose& pose) {
  const auto lengths = bone_lengths(skeleton, pose);
  double worst = 0.0;
  for (std::size_t b = 0; b < kBoneCount; ++b) {
    worst = std::max(worst, std::abs(lengths[b] - skeleton.bone_lengths[b]) / skeleton.bone_lengths[b]);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Skeleton definition file.

inline nlohmann::json skeleton_to_json(const SkeletonTemplate& s) {
  nlohmann::json j;
  j["format"] = "structpose-skeleton";
  j["version"] = 1;
  j["joint_names"] = s.names;
  j["parents"] = s.parent;
  j["bone_lengths_mm"] = s.bone_lengths;
  auto dirs = nlohmann::json::array();
  for (const auto& d : s.rest_directions) dirs.push_back({d[0], d[1], d[2]});
  j["rest_directions"] = dirs;
  return j;
}

inline SkeletonTemplate skeleton_from_json(const nlohmann::json& j) {
  static const std::array<const char*, 6> known = {"format", "version", "joint_names", "parents", "bone_lengths_mm",
                                                   "rest_directions"};
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end()) {
      throw std::invalid_argument("skeleton file: unknown key '" + key + "'");
    }
  }
  if (j.at("format") != "structpose-skeleton" || j.at("version") != 1) {
    throw std::invalid_argument("skeleton file: unsupported format or version");
  }
  SkeletonTemplate s;
  const auto names = j.at("joint_names").get<std::vector<std::string>>();
  const auto parents = j.at("parents").get<std::vector<int>>();
  const auto lengths = j.at("bone_lengths_mm").get<std::vector<double>>();
  const auto dirs = j.at("rest_directions").get<std::vector<std::vector<double>>>();
  if (names.size() != kJointCount || parents.size() != kJointCount || lengths.size() != kBoneCount ||
      dirs.size() != kBoneCount) {
    throw std::invalid_argument("skeleton file: expected 17 joints and 16 bones");
  }
  for (std::size_t i = 0; i < kJointCount; ++i) {
    s.names[i] = names[i];
    s.parent[i] = parents[i];
  }
  for (std::size_t b = 0; b < kBoneCount; ++b) {
    if (dirs[b].size() != 3) throw std::invalid_argument("skeleton file: rest direction needs 3 components");
    s.bone_lengths[b] = lengths[b];
    s.rest_directions[b] = {dirs[b][0], dirs[b][1], dirs[b][2]};
  }
  s.validate();
  return s;
}

inline SkeletonTemplate load_skeleton(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open skeleton file " + path);
  return skeleton_from_json(nlohmann::json::parse(in));
}

inline void save_skeleton(const SkeletonTemplate& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write skeleton file " + path);
  out << skeleton_to_json(s).dump(2) << '\n';
}

}  // namespace structpose
