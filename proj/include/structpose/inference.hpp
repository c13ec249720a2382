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

// Test-time pose estimation over a fixed library of candidate poses, plus
// annealed particle filtering to pull an averaged pose back onto the skeleton.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "structpose/data.hpp"
#include "structpose/kinematics.hpp"
#include "structpose/network.hpp"

namespace structpose {

class StaleLibraryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Candidate poses with embeddings computed once for one parameter version.
struct PoseLibrary {
  std::vector<Pose> poses;
  std::vector<JointAngles> angles;  // optional; when present, seeds the APF fit stage
  std::vector<EmbeddingVector> embeddings;
  std::uint64_t version = 0;  // ScoreNetwork::checksum() at precompute time

  std::size_t size() const { return poses.size(); }
};

inline PoseLibrary precompute_library(const ScoreNetwork& net, std::span<const Pose> pool,
                                      std::span<const JointAngles> angles = {}) {
  if (!angles.empty() && angles.size() != pool.size()) {
    throw std::invalid_argument("precompute_library: angles must match the pose pool in length");
  }
  PoseLibrary lib;
  lib.poses.assign(pool.begin(), pool.end());
  lib.angles.assign(angles.begin(), angles.end());
  lib.embeddings.reserve(pool.size());
  for (const Pose& p : pool) lib.embeddings.push_back(embed_pose(net, p));
  lib.version = net.checksum();
  return lib;
}

inline void check_library(const ScoreNetwork& net, const PoseLibrary& lib) {
  if (lib.size() == 0) throw std::invalid_argument("pose library is empty");
  if (lib.embeddings.size() != lib.poses.size()) throw std::invalid_argument("pose library: embeddings/poses mismatch");
  if (!lib.angles.empty() && lib.angles.size() != lib.poses.size()) {
    throw std::invalid_argument("pose library: angles/poses mismatch");
  }
  if (lib.version != net.checksum()) {
    throw StaleLibraryError("pose library was computed for different network parameters; recompute it");
  }
}

// <f_I(x), f_J(y_i)> for every library pose.
inline std::vector<double> score_library(const ScoreNetwork& net, const EmbeddingVector& image_embedding,
                                         const PoseLibrary& lib) {
  check_library(net, lib);
  std::vector<double> scores(lib.size());
  for (std::size_t i = 0; i < lib.size(); ++i) scores[i] = score_embeddings(image_embedding, lib.embeddings[i]);
  return scores;
}

// Indices of the A highest scores, best first; ties by ascending index.
inline std::vector<std::size_t> top_indices(std::span<const double> scores, std::size_t a) {
  if (a == 0 || a > scores.size()) {
    throw std::invalid_argument("top-A: A must be in [1, " + std::to_string(scores.size()) + "], got " + std::to_string(a));
  }
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto better = [&](std::size_t x, std::size_t y) { return scores[x] != scores[y] ? scores[x] > scores[y] : x < y; };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(a), idx.end(), better);
  idx.resize(a);
  return idx;
}

inline Pose mean_pose(std::span<const Pose> poses, std::span<const std::size_t> which) {
  Pose m;
  for (std::size_t i : which) {
    for (std::size_t j = 0; j < kJointCount; ++j) m.joints[j] += poses[i].joints[j];
  }
  for (auto& j : m.joints) j /= static_cast<double>(which.size());
  return m;
}

struct LibraryEstimate {
  Pose pose;
  std::vector<std::size_t> top;  // library indices used, best first
  double score = 0.0;            // best library score
};

inline LibraryEstimate estimate_from_scores(const PoseLibrary& lib, std::span<const double> scores, std::size_t a) {
  LibraryEstimate e;
  e.top = top_indices(scores, a);
  e.pose = a == 1 ? lib.poses[e.top[0]] : mean_pose(lib.poses, e.top);
  e.score = scores[e.top[0]];
  return e;
}

// Joint-wise mean of the A best-scoring library poses.
inline Pose infer_avg(const ScoreNetwork& net, const ImagePatch& image, const PoseLibrary& lib, std::size_t a) {
  const auto scores = score_library(net, embed_image(net, image), lib);
  return estimate_from_scores(lib, scores, a).pose;
}

inline Pose infer_max(const ScoreNetwork& net, const ImagePatch& image, const PoseLibrary& lib) {
  return infer_avg(net, image, lib, 1);
}

// ---------------------------------------------------------------------------
// Annealed particle filter over joint angles.

struct APFConfig {
  std::size_t particles = 100;
  std::size_t layers = 8;
  double initial_noise = 0.3;  // radians
  double noise_decay = 0.7;
  double survival = 0.5;
  double beta0 = 0.05;  // per mm; doubles every layer
  std::uint64_t seed = 1;

  void validate() const {
    if (particles < 2) throw std::invalid_argument("apf: need at least 2 particles");
    if (!(initial_noise > 0.0)) throw std::invalid_argument("apf: initial noise must be positive");
    if (!(noise_decay > 0.0 && noise_decay < 1.0)) throw std::invalid_argument("apf: noise decay must be in (0,1)");
    if (!(survival > 0.0 && survival <= 1.0)) throw std::invalid_argument("apf: survival fraction must be in (0,1]");
    if (!(beta0 > 0.0)) throw std::invalid_argument("apf: beta0 must be positive");
  }
};

struct APFResult {
  Pose pose;
  JointAngles angles;
  double error = 0.0;          // mpjpe(pose, target)
  double initial_error = 0.0;  // mpjpe(FK(init), target)
};

// Layer l perturbs every particle but the incumbent best with N(0, (s0 g^l)^2)
// angle noise, weights by exp(-beta0 2^l mpjpe), keeps the best survival*P and
// refills by weight-proportional resampling. The incumbent is never perturbed,
// so the result is never worse than the initialization.
inline APFResult apf_refine(const Pose& target, const SkeletonTemplate& skeleton, const JointAngles& init,
                            const APFConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  struct Particle {
    JointAngles angles;
    double error;
  };
  auto evaluate = [&](const JointAngles& a) { return mpjpe(forward_kinematics(skeleton, a), target); };

  Particle best{init, evaluate(init)};
  const double initial_error = best.error;
  std::vector<Particle> particles(cfg.particles, best);
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(cfg.survival * static_cast<double>(cfg.particles))));

  for (std::size_t layer = 0; layer < cfg.layers; ++layer) {
    const double sigma = cfg.initial_noise * std::pow(cfg.noise_decay, static_cast<double>(layer));
    const double beta = cfg.beta0 * std::pow(2.0, static_cast<double>(layer));
    particles[0] = best;
    for (std::size_t p = 1; p < particles.size(); ++p) {
      for (auto& bone : particles[p].angles.bones) {
        for (int k = 0; k < 3; ++k) bone[k] = wrap_angle(bone[k] + sigma * standard_normal(rng));
      }
      particles[p].error = evaluate(particles[p].angles);
    }
    // Stable sort keeps the incumbent ahead of equal-error perturbations.
    std::stable_sort(particles.begin(), particles.end(),
                     [](const Particle& a, const Particle& b) { return a.error < b.error; });
    if (particles[0].error < best.error) best = particles[0];
    const double e0 = particles[0].error;
    std::vector<double> cumulative(keep);
    double total = 0.0;
    for (std::size_t i = 0; i < keep; ++i) {
      total += std::exp(-beta * (particles[i].error - e0));
      cumulative[i] = total;
    }
    std::vector<Particle> next;
    next.reserve(cfg.particles);
    next.push_back(best);
    while (next.size() < cfg.particles) {
      const double u = unit_uniform(rng) * total;
      const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      next.push_back(particles[std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), keep - 1)]);
    }
    particles = std::move(next);
  }
  return {forward_kinematics(skeleton, best.angles), best.angles, best.error, initial_error};
}

struct FullInferenceConfig {
  std::size_t average = 20;  // A
  APFConfig fit;             // stage 1: fit angles to the top-1 library pose
  APFConfig refine;          // stage 2: refine towards the top-A average
  JointAngles start;         // stage-1 initialization when the library has no angles
};

struct FullEstimate {
  Pose pose;        // FK-valid output
  JointAngles angles;
  Pose average;     // top-A mean used as the refinement target
  Pose top1;
  double score = 0.0;
};

inline FullEstimate infer_full_from_scores(const PoseLibrary& lib, std::span<const double> scores,
                                           const SkeletonTemplate& skeleton, const FullInferenceConfig& cfg) {
  const LibraryEstimate avg = estimate_from_scores(lib, scores, cfg.average);
  FullEstimate out;
  out.average = avg.pose;
  out.top1 = lib.poses[avg.top[0]];
  out.score = avg.score;
  const JointAngles& init = lib.angles.empty() ? cfg.start : lib.angles[avg.top[0]];
  const APFResult fit = apf_refine(out.top1, skeleton, init, cfg.fit);
  const APFResult refined = apf_refine(out.average, skeleton, fit.angles, cfg.refine);
  out.pose = refined.pose;
  out.angles = refined.angles;
  return out;
}

inline FullEstimate infer_full(const ScoreNetwork& net, const ImagePatch& image, const PoseLibrary& lib,
                               const SkeletonTemplate& skeleton, const FullInferenceConfig& cfg) {
  const auto scores = score_library(net, embed_image(net, image), lib);
  return infer_full_from_scores(lib, scores, skeleton, cfg);
}

}  // namespace structpose
