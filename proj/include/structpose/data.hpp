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

// Synthetic pose/image generation and training-time augmentation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "structpose/kinematics.hpp"
#include "structpose/layers.hpp"
#include "structpose/pose.hpp"

namespace structpose {

class RenderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Uniform integer in [0, n) without modulo bias.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return static_cast<std::size_t>(r % bound);
}

inline double uniform_between(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); }

// Box-Muller; standard normal.
inline double standard_normal(std::mt19937_64& rng) {
  double u1 = unit_uniform(rng);
  while (u1 <= 0.0) u1 = unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// ---------------------------------------------------------------------------
// Pose sampling.

struct SamplerRanges {
  std::array<Eigen::Vector3d, kBoneCount> low{};
  std::array<Eigen::Vector3d, kBoneCount> high{};
  double yaw_low = -std::numbers::pi;
  double yaw_high = std::numbers::pi;

  // Bones whose Z angle carries the global body yaw (children of the root).
  static constexpr std::array<std::size_t, 3> kRootBones = {0, 4, 7};

  static SamplerRanges zero() {
    SamplerRanges r;
    for (std::size_t b = 0; b < kBoneCount; ++b) r.low[b] = r.high[b] = Eigen::Vector3d::Zero();
    r.yaw_low = r.yaw_high = 0.0;
    return r;
  }

  // Symmetric per-bone limits (Z, Y, X half widths) for the standard skeleton.
  static SamplerRanges standard() {
    SamplerRanges r;
    const std::array<Eigen::Vector3d, kBoneCount> half = {
        Eigen::Vector3d{0.3, 0.25, 0.3},  // spine
        Eigen::Vector3d{0.3, 0.2, 0.2},   // neck
        Eigen::Vector3d{0.5, 0.3, 0.3},   // head
        Eigen::Vector3d{0.1, 0.1, 0.1},   // nose
        Eigen::Vector3d{0.2, 0.4, 0.5},   // l_hip
        Eigen::Vector3d{0.2, 0.3, 0.8},   // l_knee
        Eigen::Vector3d{0.2, 0.2, 0.5},   // l_ankle
        Eigen::Vector3d{0.2, 0.4, 0.5},   // r_hip
        Eigen::Vector3d{0.2, 0.3, 0.8},   // r_knee
        Eigen::Vector3d{0.2, 0.2, 0.5},   // r_ankle
        Eigen::Vector3d{0.3, 0.4, 0.3},   // l_shoulder
        Eigen::Vector3d{0.9, 0.9, 0.6},   // l_elbow
        Eigen::Vector3d{0.6, 0.6, 0.4},   // l_wrist
        Eigen::Vector3d{0.3, 0.4, 0.3},   // r_shoulder
        Eigen::Vector3d{0.9, 0.9, 0.6},   // r_elbow
        Eigen::Vector3d{0.6, 0.6, 0.4},   // r_wrist
    };
    for (std::size_t b = 0; b < kBoneCount; ++b) {
      r.low[b] = -half[b];
      r.high[b] = half[b];
    }
    return r;
  }

  void validate() const {
    auto in_range = [](double a) { return std::abs(a) <= std::numbers::pi; };
    for (std::size_t b = 0; b < kBoneCount; ++b) {
      for (int k = 0; k < 3; ++k) {
        if (!in_range(low[b][k]) || !in_range(high[b][k]) || low[b][k] > high[b][k]) {
          throw std::invalid_argument("sampler ranges: bone " + std::to_string(b) + " axis " + std::to_string(k) +
                                      " must satisfy -pi <= low <= high <= pi");
        }
      }
    }
    if (!in_range(yaw_low) || !in_range(yaw_high) || yaw_low > yaw_high) {
      throw std::invalid_argument("sampler ranges: yaw must satisfy -pi <= low <= high <= pi");
    }
  }
};

struct GeneratedPose {
  JointAngles angles;
  Pose pose;
  double yaw = 0.0;
};

inline GeneratedPose generate_pose(const SkeletonTemplate& skeleton, const SamplerRanges& ranges, std::mt19937_64& rng) {
  GeneratedPose g;
  for (std::size_t b = 0; b < kBoneCount; ++b) {
    for (int k = 0; k < 3; ++k) g.angles.bones[b][k] = uniform_between(rng, ranges.low[b][k], ranges.high[b][k]);
  }
  g.yaw = uniform_between(rng, ranges.yaw_low, ranges.yaw_high);
  for (std::size_t b : SamplerRanges::kRootBones) g.angles.bones[b][0] = wrap_angle(g.angles.bones[b][0] + g.yaw);
  g.pose = forward_kinematics(skeleton, g.angles);
  return g;
}

// ---------------------------------------------------------------------------
// Stick-figure rasterization.

enum class Projection { perspective, orthographic };

struct SceneConfig {
  std::size_t render_height = 80;
  std::size_t render_width = 80;
  std::size_t crop_height = 64;
  std::size_t crop_width = 64;
  Projection projection = Projection::perspective;
  double focal_px = 140.0;             // perspective
  double camera_distance_mm = 5000.0;  // camera sits at y = -distance looking along +y
  double ortho_px_per_mm = 0.028;      // orthographic
  double look_at_z_mm = -150.0;        // world height mapped to the image centre row
  double stroke_width_px = 2.0;
  double background = 0.0;
  double center_intensity = 0.6;
  double left_intensity = 1.0;
  double right_intensity = 0.35;
  double depth_shading = 0.3;  // fractional dimming per metre of depth behind the root

  void validate() const {
    if (crop_height >= render_height || crop_width >= render_width || crop_height == 0 || crop_width == 0) {
      throw std::invalid_argument("scene: crop size must be positive and smaller than the render size");
    }
    if (!(stroke_width_px > 0.0)) throw std::invalid_argument("scene: stroke width must be positive");
    if (projection == Projection::perspective && !(focal_px > 0.0 && camera_distance_mm > 0.0)) {
      throw std::invalid_argument("scene: perspective camera needs positive focal length and distance");
    }
    if (projection == Projection::orthographic && !(ortho_px_per_mm > 0.0)) {
      throw std::invalid_argument("scene: orthographic scale must be positive");
    }
    if (background < 0.0 || background > 1.0) throw std::invalid_argument("scene: background must be in [0,1]");
  }
};

// Image-plane position of a joint; x right, y down, in pixels.
inline Eigen::Vector2d project_joint(const Eigen::Vector3d& p, const SceneConfig& scene) {
  const double cx = 0.5 * static_cast<double>(scene.render_width);
  const double cy = 0.5 * static_cast<double>(scene.render_height);
  if (scene.projection == Projection::orthographic) {
    return {cx + scene.ortho_px_per_mm * p.x(), cy - scene.ortho_px_per_mm * (p.z() - scene.look_at_z_mm)};
  }
  const double depth = scene.camera_distance_mm + p.y();
  return {cx + scene.focal_px * p.x() / depth, cy - scene.focal_px * (p.z() - scene.look_at_z_mm) / depth};
}

inline double segment_distance(const Eigen::Vector2d& q, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (q - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (q - (a + t * ab)).norm();
}

// Rejects poses that are degenerate (all joints within 1 mm of the root) or
// whose joints leave the canvas. Pixel values are rounded to float precision.
inline ImagePatch render_pose(const Pose& pose, const SceneConfig& scene,
                              const SkeletonTemplate& skeleton = SkeletonTemplate::standard()) {
  scene.validate();
  if (!pose.valid()) throw RenderError("render_pose: pose has non-finite or out-of-range coordinates");
  double extent = 0.0;
  for (const auto& j : pose.joints) extent = std::max(extent, (j - pose.joints[0]).norm());
  if (extent < 1.0) throw RenderError("render_pose: degenerate pose (all joints at one point)");

  std::array<Eigen::Vector2d, kJointCount> px{};
  for (std::size_t j = 0; j < kJointCount; ++j) {
    if (scene.projection == Projection::perspective && scene.camera_distance_mm + pose.joints[j].y() < 1.0) {
      throw RenderError("render_pose: joint " + skeleton.names[j] + " is behind the camera");
    }
    px[j] = project_joint(pose.joints[j], scene);
    if (px[j].x() < 0.0 || px[j].y() < 0.0 || px[j].x() >= static_cast<double>(scene.render_width) ||
        px[j].y() >= static_cast<double>(scene.render_height)) {
      throw RenderError("render_pose: joint " + skeleton.names[j] + " projects outside the " +
                        std::to_string(scene.render_width) + "x" + std::to_string(scene.render_height) + " view");
    }
  }

  ImagePatch image(1, scene.render_height, scene.render_width, scene.background);
  const double half = 0.5 * scene.stroke_width_px;
  for (std::size_t j = 1; j < kJointCount; ++j) {
    const auto p = static_cast<std::size_t>(skeleton.parent[j]);
    double value = skeleton.is_left(j) ? scene.left_intensity
                                       : skeleton.is_right(j) ? scene.right_intensity : scene.center_intensity;
    const double mid_depth = 0.5 * (pose.joints[j].y() + pose.joints[p].y());
    value *= std::clamp(1.0 - scene.depth_shading * mid_depth / 1000.0, 0.1, 1.0);
    const Eigen::Vector2d& a = px[p];
    const Eigen::Vector2d& b = px[j];
    const double margin = half + 1.0;
    const auto y0 = static_cast<long>(std::floor(std::min(a.y(), b.y()) - margin));
    const auto y1 = static_cast<long>(std::ceil(std::max(a.y(), b.y()) + margin));
    const auto x0 = static_cast<long>(std::floor(std::min(a.x(), b.x()) - margin));
    const auto x1 = static_cast<long>(std::ceil(std::max(a.x(), b.x()) + margin));
    for (long y = std::max(0L, y0); y <= std::min<long>(y1, static_cast<long>(scene.render_height) - 1); ++y) {
      for (long x = std::max(0L, x0); x <= std::min<long>(x1, static_cast<long>(scene.render_width) - 1); ++x) {
        const Eigen::Vector2d centre{static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5};
        const double coverage = std::clamp(half + 0.5 - segment_distance(centre, a, b), 0.0, 1.0);
        double& pix = image.at(0, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        pix = std::max(pix, value * coverage);
      }
    }
  }
  for (double& v : image.pixels.values()) v = static_cast<double>(static_cast<float>(std::clamp(v, 0.0, 1.0)));
  return image;
}

// ---------------------------------------------------------------------------
// Augmentation: random crop plus correlated per-pixel channel noise.

struct AugmentationConfig {
  bool random_crop = true;
  std::size_t crop_height = 64;
  std::size_t crop_width = 64;
  Eigen::MatrixXd covariance = Eigen::MatrixXd::Identity(1, 1);  // channel x channel
  double noise_magnitude = 0.02;

  void validate(std::size_t channels) const {
    if (covariance.rows() != static_cast<Eigen::Index>(channels) || covariance.cols() != covariance.rows()) {
      throw std::invalid_argument("augmentation: covariance must be " + std::to_string(channels) + "x" +
                                  std::to_string(channels));
    }
    if (!covariance.isApprox(covariance.transpose(), 1e-12)) {
      throw std::invalid_argument("augmentation: covariance must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
    if (es.eigenvalues().minCoeff() < -1e-12) throw std::invalid_argument("augmentation: covariance must be PSD");
    if (!(noise_magnitude >= 0.0)) throw std::invalid_argument("augmentation: noise magnitude must be >= 0");
  }
};

// Symmetric square root of a PSD matrix.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

inline ImagePatch crop(const ImagePatch& image, std::size_t top, std::size_t left, std::size_t height,
                       std::size_t width) {
  if (top + height > image.height() || left + width > image.width()) {
    throw std::invalid_argument("crop: window exceeds image bounds");
  }
  ImagePatch out(image.channels(), height, width);
  for (std::size_t c = 0; c < image.channels(); ++c) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) out.at(c, y, x) = image.at(c, top + y, left + x);
    }
  }
  return out;
}

inline ImagePatch center_crop(const ImagePatch& image, std::size_t height, std::size_t width) {
  if (height > image.height() || width > image.width()) throw std::invalid_argument("center_crop: crop exceeds image");
  return crop(image, (image.height() - height) / 2, (image.width() - width) / 2, height, width);
}

inline ImagePatch augment(const ImagePatch& image, const AugmentationConfig& aug, std::mt19937_64& rng) {
  aug.validate(image.channels());
  ImagePatch out = image;
  if (aug.random_crop) {
    if (aug.crop_height > image.height() || aug.crop_width > image.width()) {
      throw std::invalid_argument("augment: crop size exceeds image size");
    }
    const std::size_t top = uniform_index(rng, image.height() - aug.crop_height + 1);
    const std::size_t left = uniform_index(rng, image.width() - aug.crop_width + 1);
    out = crop(image, top, left, aug.crop_height, aug.crop_width);
  }
  if (aug.noise_magnitude > 0.0) {
    const Eigen::MatrixXd root = psd_sqrt(aug.covariance);
    const std::size_t c = out.channels();
    Eigen::VectorXd z(static_cast<Eigen::Index>(c));
    for (std::size_t y = 0; y < out.height(); ++y) {
      for (std::size_t x = 0; x < out.width(); ++x) {
        for (std::size_t k = 0; k < c; ++k) z[static_cast<Eigen::Index>(k)] = standard_normal(rng);
        const Eigen::VectorXd n = aug.noise_magnitude * (root * z);
        for (std::size_t k = 0; k < c; ++k) {
          double& v = out.at(k, y, x);
          v = std::clamp(v + n[static_cast<Eigen::Index>(k)], 0.0, 1.0);
        }
      }
    }
  }
  return out;
}

}  // namespace structpose
