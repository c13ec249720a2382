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

// Seeded check cases used by both the unit suites and the acceptance binary.
// Gradient cases return the worst relative error between analytic and
// central-difference derivatives; oracle cases return whether the library
// agrees exactly with a brute-force reference.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "support.hpp"

namespace sp_test {

// Scalar probe L = sum_i r_i out_i so that dL/dout = r.
inline double probe(const Tensor& out, const Tensor& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * r[i];
  return s;
}

inline double fd_fully_connected(std::uint64_t seed, Activation act) {
  std::mt19937_64 rng(seed);
  const std::size_t n = uniform_int(rng, 1, 3), in = uniform_int(rng, 1, 7), out = uniform_int(rng, 1, 6);
  Tensor x = random_tensor({n, in}, rng);
  LayerParams p = random_fc(out, in, rng);
  const Tensor r = random_tensor({n, out}, rng);
  const Tensor y = fully_connected(x, p, act);
  const GradientBundle g = fully_connected_backward(x, y, p, act, r);
  auto loss = [&] { return probe(fully_connected(x, p, act), r); };
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, rel_error(g.input[i], central_difference(x[i], loss)));
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    worst = std::max(worst, rel_error(g.params.weights[i], central_difference(p.weights[i], loss)));
  }
  for (std::size_t i = 0; i < p.bias.size(); ++i) {
    worst = std::max(worst, rel_error(g.params.bias[i], central_difference(p.bias[i], loss)));
  }
  return worst;
}

inline double fd_conv2d(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t n = uniform_int(rng, 1, 2), c = uniform_int(rng, 1, 3), k = uniform_int(rng, 1, 3);
  const std::size_t stride = uniform_int(rng, 1, 2);
  const std::size_t h = k + uniform_int(rng, 0, 5), w = k + uniform_int(rng, 0, 5);
  Tensor x = random_tensor({n, c, h, w}, rng);
  LayerParams f = random_filters(uniform_int(rng, 1, 3), c, k, rng);
  const Tensor y = conv2d(x, f, stride);
  const Tensor r = random_tensor(y.shape(), rng);
  const GradientBundle g = conv2d_backward(x, f, stride, r);
  auto loss = [&] { return probe(conv2d(x, f, stride), r); };
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, rel_error(g.input[i], central_difference(x[i], loss)));
  for (std::size_t i = 0; i < f.weights.size(); ++i) {
    worst = std::max(worst, rel_error(g.params.weights[i], central_difference(f.weights[i], loss)));
  }
  for (std::size_t i = 0; i < f.bias.size(); ++i) {
    worst = std::max(worst, rel_error(g.params.bias[i], central_difference(f.bias[i], loss)));
  }
  return worst;
}

inline double fd_maxpool2d(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t win = uniform_int(rng, 1, 3);
  Tensor x = random_tensor({uniform_int(rng, 1, 3), win * uniform_int(rng, 1, 4), win * uniform_int(rng, 1, 4)}, rng);
  const PoolResult pr = maxpool2d(x, win);
  const Tensor r = random_tensor(pr.output.shape(), rng);
  const Tensor g = maxpool2d_backward(x.shape(), pr.argmax, r);
  auto loss = [&] { return probe(maxpool2d(x, win).output, r); };
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, rel_error(g[i], central_difference(x[i], loss)));
  return worst;
}

// Mask drawn once and replayed, as in training.
inline double fd_dropout(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor x = random_tensor({uniform_int(rng, 1, 4), uniform_int(rng, 1, 9)}, rng);
  const double rate = uniform(rng, 0.0, 0.9);
  const DropoutResult d = dropout(x, rate, Mode::train, rng);
  const Tensor r = random_tensor(x.shape(), rng);
  const Tensor g = dropout_backward(d.mask, r);
  auto loss = [&] { return probe(apply_mask(x, d.mask), r); };
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, rel_error(g[i], central_difference(x[i], loss)));
  return worst;
}

// A frozen training batch on a tiny network: train-mode masks, fixed
// violators, random images and poses.
struct CostCase {
  ScoreNetwork net;
  FrozenBatch batch;
  TrainingConfig cfg;
};

inline CostCase make_cost_case(std::uint64_t seed, PoseEmbedding emb = PoseEmbedding::two_layer) {
  std::mt19937_64 rng(seed);
  CostCase c{ScoreNetwork(tiny_architecture(emb), seed), {}, {}};
  // Larger biases keep most ReLUs active so every layer sees gradient.
  c.net.parameters().for_each([&](const char*, LayerParams& l) {
    for (double& b : l.bias) b = uniform(rng, 0.0, 0.3);
  });
  const std::size_t n = uniform_int(rng, 1, 4);
  std::vector<ImagePatch> imgs;
  for (std::size_t i = 0; i < n; ++i) {
    imgs.push_back(random_image(c.net.architecture(), rng));
    c.batch.gt.push_back(random_pose(rng, 600.0));
    c.batch.violators.push_back(random_pose(rng, 600.0));
  }
  c.batch.images = stack_images(imgs);
  ImagePass pass;
  pass.forward(c.net, c.batch.images, Mode::train, &rng);
  c.batch.masks = pass.masks();
  c.cfg.aux_weight = uniform(rng, 0.5, 2.0);
  c.cfg.reg_weight = uniform(rng, 1e-3, 1e-2);
  c.cfg.margin_scale = uniform(rng, 1e-4, 2e-3);
  return c;
}

// Largest relative error over every parameter of the network. Also reports
// the smallest |hinge argument| so callers can confirm the case sits away
// from the kink.
// Magnitude floor for the relative error: central differences on an O(1)
// cost carry roughly 1e-11 of roundoff.
inline constexpr double kFdFloor = 1e-6;

struct CostFdResult {
  double worst = 0.0;
  double min_slack = 0.0;
  std::size_t checked = 0;
};

inline CostFdResult fd_global_cost(std::uint64_t seed, PoseEmbedding emb = PoseEmbedding::two_layer) {
  CostCase c = make_cost_case(seed, emb);
  Parameters grad;
  batch_cost(c.net, c.batch, c.cfg, &grad);
  CostFdResult res;
  res.min_slack = std::numeric_limits<double>::infinity();
  const auto& d = c.net.architecture().embedding_dim;
  {
    ImagePass ip;
    ip.forward(c.net, c.batch.images, Mode::train, nullptr, &*c.batch.masks);
    std::vector<Pose> both = c.batch.gt;
    both.insert(both.end(), c.batch.violators.begin(), c.batch.violators.end());
    PosePass pp;
    pp.forward(c.net, stack_poses(both, c.net.architecture().pose_scale_mm));
    const std::size_t n = c.batch.size();
    for (std::size_t i = 0; i < n; ++i) {
      double sg = 0.0, sh = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        sg += ip.embedding()[i * d + k] * pp.embedding()[i * d + k];
        sh += ip.embedding()[i * d + k] * pp.embedding()[(n + i) * d + k];
      }
      const double slack = sh + c.cfg.margin_scale * oracle_mpjpe(c.batch.gt[i], c.batch.violators[i]) - sg;
      res.min_slack = std::min(res.min_slack, std::abs(slack));
    }
  }
  auto loss = [&] { return batch_cost(c.net, c.batch, c.cfg).total; };
  auto& params = c.net.parameters();
  for (std::size_t l = 0; l < 10; ++l) {
    LayerParams& p = l < 3 ? params.conv[l] : params.fc[l - 3];
    const LayerParams& g = l < 3 ? grad.conv[l] : grad.fc[l - 3];
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
      res.worst = std::max(res.worst, rel_error(g.weights[i], central_difference(p.weights[i], loss), kFdFloor));
      ++res.checked;
    }
    for (std::size_t i = 0; i < p.bias.size(); ++i) {
      res.worst = std::max(res.worst, rel_error(g.bias[i], central_difference(p.bias[i], loss), kFdFloor));
      ++res.checked;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Brute-force oracle cases; each returns true on an exact match.

inline bool conv_matches_oracle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t c = uniform_int(rng, 1, 3), k = uniform_int(rng, 1, 5), stride = uniform_int(rng, 1, 2);
  const std::size_t h = k + uniform_int(rng, 0, 16 - k), w = k + uniform_int(rng, 0, 16 - k);
  const Tensor x = random_tensor({c, h, w}, rng);
  const LayerParams f = random_filters(uniform_int(rng, 1, 9), c, k, rng);
  return conv2d(x, f, stride) == oracle_conv(x, f, stride);
}

inline bool pool_matches_oracle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t win = uniform_int(rng, 1, 4);
  Tensor x = random_tensor({uniform_int(rng, 1, 3), win * uniform_int(rng, 1, 16 / win), win * uniform_int(rng, 1, 16 / win)}, rng);
  // Quantize so ties are common.
  for (double& v : x.values()) v = std::round(v * 2.0) / 2.0;
  std::vector<std::size_t> argmax;
  const Tensor expect = oracle_pool(x, win, &argmax);
  const PoolResult got = maxpool2d(x, win);
  return got.output == expect && got.argmax == argmax;
}

// Embeddings through the oracle layer composition.
inline EmbeddingVector oracle_embed_pose(const ScoreNetwork& net, const Pose& pose) {
  const auto& a = net.architecture();
  const auto f = pose.flat();
  std::vector<double> x(f.begin(), f.end());
  for (double& v : x) v /= a.pose_scale_mm;
  if (a.pose_embedding == PoseEmbedding::two_layer) {
    x = oracle_fc(oracle_fc(x, net.parameters().fc[kFc5], Activation::relu), net.parameters().fc[kFc6], Activation::relu);
  }
  return Eigen::Map<EmbeddingVector>(x.data(), static_cast<Eigen::Index>(x.size()));
}

struct OracleImagePass {
  Tensor conv2, conv3;
  std::vector<double> h3, embedding, prediction;
};

inline OracleImagePass oracle_image_pass(const ScoreNetwork& net, const ImagePatch& image) {
  const auto& a = net.architecture();
  const auto& p = net.parameters();
  OracleImagePass o;
  Tensor x = image.pixels;
  for (std::size_t s = 0; s < 3; ++s) {
    Tensor z = oracle_conv(x, p.conv[s], 1);
    if (s < 2) {
      for (double& v : z.values()) v = oracle_act(v, Activation::relu);
    }
    x = oracle_pool(z, a.stages[s].pool);
    if (s == 1) o.conv2 = x;
  }
  o.conv3 = x;
  std::vector<double> h1 = oracle_fc(o.conv2.values(), p.fc[kFc1], Activation::relu);
  const std::vector<double> h2 = oracle_fc(o.conv3.values(), p.fc[kFc2], Activation::relu);
  h1.insert(h1.end(), h2.begin(), h2.end());
  o.h3 = oracle_fc(h1, p.fc[kFc3], Activation::relu);
  o.embedding = oracle_fc(o.h3, p.fc[kFc4], Activation::relu);
  o.prediction = oracle_fc(o.h3, p.fc[kFc7], Activation::tanh);
  return o;
}

inline EmbeddingVector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const EmbeddingVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Loss-augmented argmax over 1..60 candidates (some duplicated to force ties).
inline bool most_violated_matches_oracle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const ScoreNetwork net(tiny_architecture(), seed);
  const ImagePatch img = random_image(net.architecture(), rng);
  const Pose gt = random_pose(rng);
  CandidateSet cands;
  const std::size_t m = uniform_int(rng, 1, 60);
  for (std::size_t i = 0; i < m; ++i) {
    cands.ids.push_back(i);
    const bool dup = i > 0 && uniform(rng, 0.0, 1.0) < 0.2;
    cands.poses.push_back(dup ? cands.poses[uniform_int(rng, 0, i - 1)] : random_pose(rng));
  }
  const double ms = uniform(rng, 0.0, 2e-3);
  const EmbeddingVector fi = to_vector(oracle_image_pass(net, img).embedding);
  std::vector<double> value(m);
  for (std::size_t i = 0; i < m; ++i) {
    value[i] = oracle_dot(fi, oracle_embed_pose(net, cands.poses[i])) + ms * oracle_mpjpe(gt, cands.poses[i]);
  }
  const std::size_t expect = oracle_argmax(value);
  const ViolatedPose got = find_most_violated(net, img, gt, cands, ms);
  return got.index == expect && got.pose == cands.poses[expect];
}

// The cached library path against direct per-pose scoring.
inline bool infer_max_matches_oracle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const ScoreNetwork net(tiny_architecture(), seed);
  const ImagePatch img = random_image(net.architecture(), rng);
  std::vector<Pose> pool;
  const std::size_t m = uniform_int(rng, 1, 40);
  for (std::size_t i = 0; i < m; ++i) {
    const bool dup = i > 0 && uniform(rng, 0.0, 1.0) < 0.2;
    pool.push_back(dup ? pool[uniform_int(rng, 0, i - 1)] : random_pose(rng));
  }
  const PoseLibrary lib = precompute_library(net, pool);
  std::vector<double> direct(m);
  for (std::size_t i = 0; i < m; ++i) direct[i] = score(net, img, pool[i]);
  return infer_max(net, img, lib) == pool[oracle_argmax(direct)] &&
         score_library(net, embed_image(net, img), lib) == direct;
}

// top-A selection and the resulting average against sort-then-slice.
inline bool top_a_matches_oracle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t m = uniform_int(rng, 1, 80);
  std::vector<double> scores(m);
  for (double& s : scores) s = std::round(uniform(rng, -5.0, 5.0) * 2.0) / 2.0;
  const std::size_t a = uniform_int(rng, 1, m);
  const std::vector<std::size_t> expect = oracle_top(scores, a);
  if (top_indices(scores, a) != expect) return false;
  PoseLibrary lib;
  for (std::size_t i = 0; i < m; ++i) lib.poses.push_back(random_pose(rng));
  Pose mean;
  for (std::size_t i : expect) {
    for (std::size_t j = 0; j < kJointCount; ++j) mean.joints[j] += lib.poses[i].joints[j];
  }
  for (auto& j : mean.joints) j /= static_cast<double>(a);
  return estimate_from_scores(lib, scores, a).pose == (a == 1 ? lib.poses[expect[0]] : mean);
}

}  // namespace sp_test
