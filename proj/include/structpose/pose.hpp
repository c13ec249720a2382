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
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "structpose/tensor.hpp"

namespace structpose {

inline constexpr std::size_t kJointCount = 17;
inline constexpr std::size_t kBoneCount = kJointCount - 1;
inline constexpr std::size_t kPoseDim = kJointCount * 3;
inline constexpr double kMaxCoordinateMm = 2000.0;

// 17 body joints in millimeters, root (pelvis) first.
struct Pose {
  std::array<Eigen::Vector3d, kJointCount> joints{};

  Pose() {
    for (auto& j : joints) j.setZero();
  }

  static Pose from_flat(std::span<const double> flat) {
    if (flat.size() != kPoseDim) {
      throw std::invalid_argument("Pose: expected " + std::to_string(kPoseDim) + " coordinates, got " +
                                  std::to_string(flat.size()));
    }
    Pose p;
    for (std::size_t j = 0; j < kJointCount; ++j) p.joints[j] = {flat[3 * j], flat[3 * j + 1], flat[3 * j + 2]};
    return p;
  }

  std::array<double, kPoseDim> flat() const {
    std::array<double, kPoseDim> out{};
    for (std::size_t j = 0; j < kJointCount; ++j) {
      for (int k = 0; k < 3; ++k) out[3 * j + k] = joints[j][k];
    }
    return out;
  }

  bool valid() const {
    for (const auto& j : joints) {
      for (int k = 0; k < 3; ++k) {
        if (!std::isfinite(j[k]) || std::abs(j[k]) > kMaxCoordinateMm) return false;
      }
    }
    return true;
  }

  void validate() const {
    if (!valid()) throw std::invalid_argument("Pose: coordinates must be finite and within 2000 mm");
  }

  friend bool operator==(const Pose& a, const Pose& b) { return a.joints == b.joints; }
};

// Single- or multi-channel raster, [C, H, W].
struct ImagePatch {
  Tensor pixels;

  ImagePatch() = default;
  explicit ImagePatch(Tensor t) : pixels(std::move(t)) {
    if (pixels.rank() != 3) throw std::invalid_argument("ImagePatch: expected [C,H,W], got " + shape_string(pixels.shape()));
  }
  ImagePatch(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0)
      : pixels(Shape{channels, height, width}, fill) {}

  std::size_t channels() const { return pixels.dim(0); }
  std::size_t height() const { return pixels.dim(1); }
  std::size_t width() const { return pixels.dim(2); }
  double& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height() + y) * width() + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const { return pixels[(c * height() + y) * width() + x]; }

  friend bool operator==(const ImagePatch&, const ImagePatch&) = default;
};

}  // namespace structpose
