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

// Random inputs, tiny architectures and independent reference
// implementations shared by the unit and acceptance tests. The oracles are
// written as plain nested loops and deliberately share no code with the
// library beyond its data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <vector>

#include "structpose/structpose.hpp"

namespace sp_test {

using namespace structpose;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = uniform(rng, lo, hi);
  return t;
}

inline LayerParams random_fc(std::size_t out, std::size_t in, std::mt19937_64& rng) {
  LayerParams p{random_tensor({out, in}, rng), std::vector<double>(out)};
  for (double& b : p.bias) b = uniform(rng, -0.5, 0.5);
  return p;
}

inline LayerParams random_filters(std::size_t out, std::size_t in, std::size_t k, std::mt19937_64& rng) {
  LayerParams p{random_tensor({out, in, k, k}, rng), std::vector<double>(out)};
  for (double& b : p.bias) b = uniform(rng, -0.5, 0.5);
  return p;
}

inline Pose random_pose(std::mt19937_64& rng, double extent = 800.0) {
  Pose p;
  for (auto& j : p.joints) j = {uniform(rng, -extent, extent), uniform(rng, -extent, extent), uniform(rng, -extent, extent)};
  return p;
}

inline JointAngles random_angles(std::mt19937_64& rng, double half_width = 1.0) {
  JointAngles a;
  for (auto& b : a.bones) b = {uniform(rng, -half_width, half_width), uniform(rng, -half_width, half_width),
                               uniform(rng, -half_width, half_width)};
  return a;
}

// 1x16x16 input; stage outputs 2x7x7, 3x3x3, 2x1x1.
inline NetworkArchitecture tiny_architecture(PoseEmbedding emb = PoseEmbedding::two_layer) {
  NetworkArchitecture a;
  a.channels = 1;
  a.height = 16;
  a.width = 16;
  a.stages = {{{3, 2, 2}, {2, 3, 2}, {2, 2, 2}}};
  a.fc1 = 5;
  a.fc2 = 4;
  a.fc3 = 6;
  a.embedding_dim = emb == PoseEmbedding::raw ? kPoseDim : 4;
  a.fc5 = 5;
  a.pose_embedding = emb;
  a.dropout_rate = 0.5;
  return a;
}

inline ImagePatch random_image(const NetworkArchitecture& a, std::mt19937_64& rng) {
  return ImagePatch(random_tensor({a.channels, a.height, a.width}, rng, 0.0, 1.0));
}

// ---------------------------------------------------------------------------
// Oracles.

inline double oracle_act(double z, Activation act) {
  if (act == Activation::relu) return z > 0.0 ? z : 0.0;
  if (act == Activation::tanh) return std::tanh(z);
  return z;
}

inline std::vector<double> oracle_fc(std::span<const double> in, const LayerParams& p, Activation act) {
  const std::size_t out = p.weights.dim(0), n = p.weights.dim(1);
  std::vector<double> y(out);
  for (std::size_t j = 0; j < out; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += p.weights[j * n + k] * in[k];
    y[j] = oracle_act(s + p.bias[j], act);
  }
  return y;
}

// Valid cross-correlation of a [C,H,W] input, summing channel, row, column in
// that order and adding the bias first (the library's accumulation order).
inline Tensor oracle_conv(const Tensor& x, const LayerParams& f, std::size_t stride) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oc = f.weights.dim(0), k = f.weights.dim(2);
  const std::size_t oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
  Tensor y({oc, oh, ow});
  for (std::size_t o = 0; o < oc; ++o) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double s = f.bias[o];
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = 0; b < k; ++b) {
              s += x[(ch * h + i * stride + a) * w + j * stride + b] * f.weights[((o * c + ch) * k + a) * k + b];
            }
          }
        }
        y[(o * oh + i) * ow + j] = s;
      }
    }
  }
  return y;
}

inline Tensor oracle_pool(const Tensor& x, std::size_t win, std::vector<std::size_t>* argmax = nullptr) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor y({c, h / win, w / win});
  if (argmax) argmax->clear();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < h / win; ++i) {
      for (std::size_t j = 0; j < w / win; ++j) {
        std::size_t best = (ch * h + i * win) * w + j * win;
        for (std::size_t a = 0; a < win; ++a) {
          for (std::size_t b = 0; b < win; ++b) {
            const std::size_t idx = (ch * h + i * win + a) * w + j * win + b;
            if (x[idx] > x[best]) best = idx;
          }
        }
        y[(ch * (h / win) + i) * (w / win) + j] = x[best];
        if (argmax) argmax->push_back(best);
      }
    }
  }
  return y;
}

inline double oracle_mpjpe(const Pose& a, const Pose& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const double dx = a.joints[j].x() - b.joints[j].x();
    const double dy = a.joints[j].y() - b.joints[j].y();
    const double dz = a.joints[j].z() - b.joints[j].z();
    s += std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return s / static_cast<double>(kJointCount);
}

inline double oracle_dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Exhaustive argmax with lowest-index ties.
inline std::size_t oracle_argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// Full stable sort by descending value, then slice.
inline std::vector<std::size_t> oracle_top(const std::vector<double>& v, std::size_t a) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] > v[y]; });
  idx.resize(a);
  return idx;
}

// Symmetric relative error with a small absolute floor.
inline double rel_error(double analytic, double numeric, double floor = 1e-7) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central difference of f around x[i], restoring x[i].
template <class F>
double central_difference(double& xi, F&& f, double h = 1e-5) {
  const double keep = xi;
  xi = keep + h;
  const double up = f();
  xi = keep - h;
  const double down = f();
  xi = keep;
  return (up - down) / (2.0 * h);
}

}  // namespace sp_test
