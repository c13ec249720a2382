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

// The score network: a three-stage CNN feeding a two-branch image embedding,
// a two-layer pose embedding, a dot-product score and an auxiliary tanh pose
// regressor hanging off the penultimate image layer.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "structpose/hash.hpp"
#include "structpose/layers.hpp"
#include "structpose/pose.hpp"
#include "structpose/tensor.hpp"

namespace structpose {

using EmbeddingVector = Eigen::VectorXd;

enum class PoseEmbedding { two_layer, raw };

inline const char* to_string(PoseEmbedding e) { return e == PoseEmbedding::raw ? "raw" : "two_layer"; }

inline PoseEmbedding pose_embedding_from_string(const std::string& s) {
  if (s == "two_layer") return PoseEmbedding::two_layer;
  if (s == "raw") return PoseEmbedding::raw;
  throw std::invalid_argument("unknown pose embedding '" + s + "' (expected two_layer or raw)");
}

struct ConvStageSpec {
  std::size_t kernel = 5;
  std::size_t filters = 8;
  std::size_t pool = 2;
  friend bool operator==(const ConvStageSpec&, const ConvStageSpec&) = default;
};

// Indices into Parameters::fc.
enum FcLayer : std::size_t { kFc1 = 0, kFc2, kFc3, kFc4, kFc5, kFc6, kFc7 };

struct NetworkArchitecture {
  std::size_t channels = 1;
  std::size_t height = 64;
  std::size_t width = 64;
  std::array<ConvStageSpec, 3> stages{{{5, 8, 2}, {3, 16, 2}, {3, 32, 2}}};
  std::size_t fc1 = 512;
  std::size_t fc2 = 512;
  std::size_t fc3 = 1024;
  std::size_t embedding_dim = 1024;
  std::size_t fc5 = 512;
  PoseEmbedding pose_embedding = PoseEmbedding::two_layer;
  double dropout_rate = 0.75;
  double pose_scale_mm = 1000.0;  // poses enter the network divided by this

  // Post-pooling [C, H, W] after stage i.
  Shape stage_shape(std::size_t i) const {
    std::size_t c = channels, h = height, w = width;
    for (std::size_t s = 0; s <= i; ++s) {
      const auto& st = stages.at(s);
      if (st.kernel == 0 || st.filters == 0 || st.pool == 0) {
        throw std::invalid_argument("architecture: stage " + std::to_string(s + 1) + " has a zero size");
      }
      if (st.kernel > h || st.kernel > w) {
        throw std::invalid_argument("architecture: stage " + std::to_string(s + 1) + " kernel " +
                                    std::to_string(st.kernel) + " exceeds its " + std::to_string(h) + "x" +
                                    std::to_string(w) + " input");
      }
      h = h - st.kernel + 1;
      w = w - st.kernel + 1;
      if (h % st.pool != 0 || w % st.pool != 0) {
        throw std::invalid_argument("architecture: stage " + std::to_string(s + 1) + " conv output " +
                                    std::to_string(h) + "x" + std::to_string(w) + " not divisible by pool " +
                                    std::to_string(st.pool));
      }
      h /= st.pool;
      w /= st.pool;
      c = st.filters;
    }
    return {c, h, w};
  }

  std::size_t stage_volume(std::size_t i) const { return shape_volume(stage_shape(i)); }

  // {out, in} per FC layer; {0, 0} for layers absent under raw pose embedding.
  std::array<std::pair<std::size_t, std::size_t>, 7> fc_shapes() const {
    const bool raw = pose_embedding == PoseEmbedding::raw;
    return {{{fc1, stage_volume(1)},
             {fc2, stage_volume(2)},
             {fc3, fc1 + fc2},
             {embedding_dim, fc3},
             raw ? std::pair<std::size_t, std::size_t>{0, 0} : std::pair{fc5, kPoseDim},
             raw ? std::pair<std::size_t, std::size_t>{0, 0} : std::pair{embedding_dim, fc5},
             {kPoseDim, fc3}}};
  }

  void validate() const {
    if (channels == 0 || height == 0 || width == 0) throw std::invalid_argument("architecture: empty input geometry");
    (void)stage_shape(2);
    if (fc1 == 0 || fc2 == 0 || fc3 == 0 || embedding_dim == 0 || (pose_embedding == PoseEmbedding::two_layer && fc5 == 0)) {
      throw std::invalid_argument("architecture: fully connected widths must be positive");
    }
    if (pose_embedding == PoseEmbedding::raw && embedding_dim != kPoseDim) {
      throw std::invalid_argument("architecture: raw pose embedding requires embedding_dim = 51, got " +
                                  std::to_string(embedding_dim));
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw std::invalid_argument("architecture: dropout rate must be in [0,1)");
    if (!(pose_scale_mm > 0.0)) throw std::invalid_argument("architecture: pose scale must be positive");
  }

  friend bool operator==(const NetworkArchitecture&, const NetworkArchitecture&) = default;
};

inline void accumulate(LayerParams& into, const LayerParams& g) {
  for (std::size_t i = 0; i < into.weights.size(); ++i) into.weights[i] += g.weights[i];
  for (std::size_t i = 0; i < into.bias.size(); ++i) into.bias[i] += g.bias[i];
}

// All learnable weights and biases.
struct Parameters {
  std::array<LayerParams, 3> conv;
  std::array<LayerParams, 7> fc;

  static constexpr std::array<const char*, 10> kNames = {"conv1", "conv2", "conv3", "fc1", "fc2",
                                                         "fc3",   "fc4",   "fc5",   "fc6", "fc7"};

  template <class F>
  void for_each(F&& f) {
    for (std::size_t i = 0; i < 3; ++i) f(kNames[i], conv[i]);
    for (std::size_t i = 0; i < 7; ++i) f(kNames[3 + i], fc[i]);
  }
  template <class F>
  void for_each(F&& f) const {
    for (std::size_t i = 0; i < 3; ++i) f(kNames[i], conv[i]);
    for (std::size_t i = 0; i < 7; ++i) f(kNames[3 + i], fc[i]);
  }

  static Parameters zeros_like(const Parameters& p) {
    Parameters z;
    for (std::size_t i = 0; i < 3; ++i) z.conv[i] = LayerParams::zeros_like(p.conv[i]);
    for (std::size_t i = 0; i < 7; ++i) z.fc[i] = LayerParams::zeros_like(p.fc[i]);
    return z;
  }

  // this += a * x
  void axpy(double a, const Parameters& x) {
    auto apply = [a](LayerParams& dst, const LayerParams& src) {
      for (std::size_t i = 0; i < dst.weights.size(); ++i) dst.weights[i] += a * src.weights[i];
      for (std::size_t i = 0; i < dst.bias.size(); ++i) dst.bias[i] += a * src.bias[i];
    };
    for (std::size_t i = 0; i < 3; ++i) apply(conv[i], x.conv[i]);
    for (std::size_t i = 0; i < 7; ++i) apply(fc[i], x.fc[i]);
  }

  // this = base + a * x, reusing this object's storage; shapes must agree.
  void assign_axpy(const Parameters& base, double a, const Parameters& x) {
    auto apply = [a](LayerParams& dst, const LayerParams& b, const LayerParams& src) {
      for (std::size_t i = 0; i < dst.weights.size(); ++i) dst.weights[i] = b.weights[i] + a * src.weights[i];
      for (std::size_t i = 0; i < dst.bias.size(); ++i) dst.bias[i] = b.bias[i] + a * src.bias[i];
    };
    for (std::size_t i = 0; i < 3; ++i) apply(conv[i], base.conv[i], x.conv[i]);
    for (std::size_t i = 0; i < 7; ++i) apply(fc[i], base.fc[i], x.fc[i]);
  }

  // Sum of squared Frobenius norms of the FC weight matrices (biases and conv
  // filters excluded).
  double fc_weight_sq_norm() const {
    double s = 0.0;
    for (const auto& l : fc) s += l.weights.squared_norm();
    return s;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for_each([&](const char*, const LayerParams& l) { n += l.weights.size() + l.bias.size(); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](const char*, const LayerParams& l) {
      ok = ok && l.weights.all_finite();
      for (double b : l.bias) ok = ok && std::isfinite(b);
    });
    return ok;
  }

  double squared_norm() const {
    double s = 0.0;
    for_each([&](const char*, const LayerParams& l) {
      s += l.weights.squared_norm();
      for (double b : l.bias) s += b * b;
    });
    return s;
  }

  friend bool operator==(const Parameters&, const Parameters&) = default;
};

inline Shape conv_filter_shape(const NetworkArchitecture& arch, std::size_t stage) {
  const std::size_t in_c = stage == 0 ? arch.channels : arch.stages[stage - 1].filters;
  const auto& st = arch.stages[stage];
  return {st.filters, in_c, st.kernel, st.kernel};
}

inline void check_parameter_shapes(const NetworkArchitecture& arch, const Parameters& p) {
  for (std::size_t i = 0; i < 3; ++i) {
    const Shape want = conv_filter_shape(arch, i);
    if (p.conv[i].weights.shape() != want || p.conv[i].bias.size() != want[0]) {
      throw std::invalid_argument(std::string("parameters: ") + Parameters::kNames[i] + " has shape " +
                                  shape_string(p.conv[i].weights.shape()) + ", expected " + shape_string(want));
    }
  }
  const auto shapes = arch.fc_shapes();
  for (std::size_t i = 0; i < 7; ++i) {
    const auto [out, in] = shapes[i];
    const bool ok = out == 0 ? p.fc[i].empty()
                             : p.fc[i].weights.shape() == Shape{out, in} && p.fc[i].bias.size() == out;
    if (!ok) {
      throw std::invalid_argument(std::string("parameters: ") + Parameters::kNames[3 + i] + " has shape " +
                                  shape_string(p.fc[i].weights.shape()) + ", expected " +
                                  shape_string(Shape{out, in}));
    }
  }
}

class ScoreNetwork {
 public:
  // Uniform Glorot initialization, zero biases.
  ScoreNetwork(NetworkArchitecture arch, std::uint64_t seed) : arch_(std::move(arch)), seed_(seed) {
    arch_.validate();
    std::mt19937_64 rng(seed);
    auto init = [&rng](Shape shape, std::size_t fan_in, std::size_t fan_out) {
      LayerParams l{Tensor(shape), std::vector<double>(shape[0], 0.0)};
      const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (double& w : l.weights.values()) w = (2.0 * unit_uniform(rng) - 1.0) * r;
      return l;
    };
    for (std::size_t i = 0; i < 3; ++i) {
      const Shape s = conv_filter_shape(arch_, i);
      const std::size_t taps = s[2] * s[3];
      params_.conv[i] = init(s, s[1] * taps, s[0] * taps);
    }
    const auto shapes = arch_.fc_shapes();
    for (std::size_t i = 0; i < 7; ++i) {
      const auto [out, in] = shapes[i];
      if (out != 0) params_.fc[i] = init({out, in}, in, out);
    }
  }

  ScoreNetwork(NetworkArchitecture arch, Parameters params, std::uint64_t seed)
      : arch_(std::move(arch)), params_(std::move(params)), seed_(seed) {
    arch_.validate();
    check_parameter_shapes(arch_, params_);
  }

  const NetworkArchitecture& architecture() const { return arch_; }
  const Parameters& parameters() const { return params_; }
  Parameters& parameters() { return params_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t parameter_count() const { return params_.count(); }

  // Identifies the exact parameter values (word-wise FNV-1a over every double).
  std::uint64_t checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::span<const double> v) {
      for (double d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, sizeof bits);
        h = (h ^ bits) * 0x100000001b3ULL;
      }
      h = (h ^ v.size()) * 0x100000001b3ULL;
    };
    params_.for_each([&](const char*, const LayerParams& l) {
      mix(l.weights.span());
      mix(l.bias);
    });
    return h;
  }

 private:
  NetworkArchitecture arch_;
  Parameters params_;
  std::uint64_t seed_ = 0;
};

// ---------------------------------------------------------------------------
// Input packing.

inline Tensor stack_images(std::span<const ImagePatch> images) {
  if (images.empty()) throw std::invalid_argument("stack_images: empty batch");
  const Shape s = images[0].pixels.shape();
  Tensor out(Shape{images.size(), s[0], s[1], s[2]});
  const std::size_t vol = shape_volume(s);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].pixels.shape() != s) throw std::invalid_argument("stack_images: mixed image geometry");
    std::copy(images[i].pixels.values().begin(), images[i].pixels.values().end(), out.data() + i * vol);
  }
  return out;
}

inline Tensor stack_poses(std::span<const Pose> poses, double scale_mm) {
  Tensor out(Shape{poses.size(), kPoseDim});
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto f = poses[i].flat();
    for (std::size_t k = 0; k < kPoseDim; ++k) out[i * kPoseDim + k] = f[k] / scale_mm;
  }
  return out;
}

inline void check_image_geometry(const NetworkArchitecture& arch, const Shape& image_shape) {
  if (image_shape != Shape{arch.channels, arch.height, arch.width}) {
    throw std::invalid_argument("image geometry " + shape_string(image_shape) + " does not match network input " +
                                shape_string({arch.channels, arch.height, arch.width}));
  }
}

struct DropoutMasks {
  Tensor h1, h2;
};

// ---------------------------------------------------------------------------
// Batched passes with cached activations.

class ImagePass {
 public:
  // images: [N, C, H, W]. In train mode dropout masks are replayed from
  // `masks` when given, otherwise drawn from `rng`.
  void forward(const ScoreNetwork& net, const Tensor& images, Mode mode, std::mt19937_64* rng = nullptr,
               const DropoutMasks* masks = nullptr) {
    const auto& arch = net.architecture();
    const auto& p = net.parameters();
    if (images.rank() != 4) throw std::invalid_argument("ImagePass: expected [N,C,H,W], got " + shape_string(images.shape()));
    check_image_geometry(arch, {images.dim(1), images.dim(2), images.dim(3)});
    n_ = images.dim(0);
    const Tensor* x = &images;
    for (std::size_t s = 0; s < 3; ++s) {
      const Tensor& a = conv_[s].forward(*x, p.conv[s], 1, s < 2 ? Activation::relu : Activation::linear);
      x = &pool_[s].forward(a, arch.stages[s].pool);
    }
    const Tensor& f1 =
        fc_[0].forward(pool_[1].output().reshaped({n_, arch.stage_volume(1)}), p.fc[kFc1], Activation::relu);
    const Tensor& f2 =
        fc_[1].forward(pool_[2].output().reshaped({n_, arch.stage_volume(2)}), p.fc[kFc2], Activation::relu);
    if (mode == Mode::train && masks != nullptr) {
      drop_[0].forward_with_mask(f1, masks->h1);
      drop_[1].forward_with_mask(f2, masks->h2);
    } else {
      std::mt19937_64 fallback(0);
      std::mt19937_64& r = rng != nullptr ? *rng : fallback;
      if (mode == Mode::train && rng == nullptr && arch.dropout_rate > 0.0) {
        throw std::invalid_argument("ImagePass: train mode needs an rng or frozen dropout masks");
      }
      drop_[0].forward(f1, arch.dropout_rate, mode, r);
      drop_[1].forward(f2, arch.dropout_rate, mode, r);
    }
    const Tensor& d1 = drop_[0].output();
    const Tensor& d2 = drop_[1].output();
    Tensor joined(Shape{n_, arch.fc1 + arch.fc2});
    for (std::size_t i = 0; i < n_; ++i) {
      std::copy_n(d1.data() + i * arch.fc1, arch.fc1, joined.data() + i * (arch.fc1 + arch.fc2));
      std::copy_n(d2.data() + i * arch.fc2, arch.fc2, joined.data() + i * (arch.fc1 + arch.fc2) + arch.fc1);
    }
    const Tensor& h3 = fc_[2].forward(joined, p.fc[kFc3], Activation::relu);
    fc_[3].forward(h3, p.fc[kFc4], Activation::relu);
    fc_[4].forward(h3, p.fc[kFc7], Activation::tanh);
    fc1_ = arch.fc1;
    fc2_ = arch.fc2;
    ran_ = true;
  }

  std::size_t batch() const { return n_; }
  const Tensor& embedding() const { return fc_[3].output(); }   // [N, D]
  const Tensor& prediction() const { return fc_[4].output(); }  // [N, 51], scaled pose space
  const Tensor& penultimate() const { return fc_[2].output(); }
  const Tensor& conv2_features() const { return pool_[1].output(); }  // [N, C, H, W] after pooling
  const Tensor& conv3_features() const { return pool_[2].output(); }
  DropoutMasks masks() const { return {drop_[0].mask(), drop_[1].mask()}; }

  // Accumulates parameter gradients into `grads`. d_prediction may be empty.
  void backward(const Tensor& d_embedding, const Tensor& d_prediction, Parameters& grads) const {
    if (!ran_) throw std::logic_error("ImagePass: backward called before forward");
    auto g4 = fc_[3].backward(d_embedding);
    accumulate(grads.fc[kFc4], g4.params);
    Tensor dh3 = std::move(g4.input);
    if (!d_prediction.empty()) {
      auto g7 = fc_[4].backward(d_prediction);
      accumulate(grads.fc[kFc7], g7.params);
      for (std::size_t i = 0; i < dh3.size(); ++i) dh3[i] += g7.input[i];
    }
    auto g3 = fc_[2].backward(dh3);
    accumulate(grads.fc[kFc3], g3.params);
    Tensor dd1(Shape{n_, fc1_}), dd2(Shape{n_, fc2_});
    for (std::size_t i = 0; i < n_; ++i) {
      std::copy_n(g3.input.data() + i * (fc1_ + fc2_), fc1_, dd1.data() + i * fc1_);
      std::copy_n(g3.input.data() + i * (fc1_ + fc2_) + fc1_, fc2_, dd2.data() + i * fc2_);
    }
    auto g1 = fc_[0].backward(drop_[0].backward(dd1));
    accumulate(grads.fc[kFc1], g1.params);
    auto g2 = fc_[1].backward(drop_[1].backward(dd2));
    accumulate(grads.fc[kFc2], g2.params);

    Tensor dp3 = g2.input.reshaped(conv3_features().shape());
    auto gc3 = conv_[2].backward(pool_[2].backward(dp3));
    accumulate(grads.conv[2], gc3.params);
    Tensor dp2 = std::move(gc3.input);
    for (std::size_t i = 0; i < dp2.size(); ++i) dp2[i] += g1.input[i];
    auto gc2 = conv_[1].backward(pool_[1].backward(dp2));
    accumulate(grads.conv[1], gc2.params);
    auto gc1 = conv_[0].backward(pool_[0].backward(gc2.input), false);
    accumulate(grads.conv[0], gc1.params);
  }

 private:
  std::array<ConvOp, 3> conv_;
  std::array<MaxPoolOp, 3> pool_;
  std::array<FullyConnectedOp, 5> fc_;  // FC1, FC2, FC3, FC4, FC7
  std::array<DropoutOp, 2> drop_;
  std::size_t n_ = 0, fc1_ = 0, fc2_ = 0;
  bool ran_ = false;
};


// Pose branch over [M, 51] scaled poses. Under raw embedding the scaled
// coordinates are the embedding.
class PosePass {
 public:
  void forward(const ScoreNetwork& net, const Tensor& poses) {
    if (poses.rank() != 2 || poses.dim(1) != kPoseDim) {
      throw std::invalid_argument("PosePass: expected [M,51], got " + shape_string(poses.shape()));
    }
    raw_ = net.architecture().pose_embedding == PoseEmbedding::raw;
    if (raw_) {
      raw_output_ = poses;
    } else {
      const Tensor& h5 = fc_[0].forward(poses, net.parameters().fc[kFc5], Activation::relu);
      fc_[1].forward(h5, net.parameters().fc[kFc6], Activation::relu);
    }
    ran_ = true;
  }

  const Tensor& embedding() const { return raw_ ? raw_output_ : fc_[1].output(); }

  void backward(const Tensor& d_embedding, Parameters& grads) const {
    if (!ran_) throw std::logic_error("PosePass: backward called before forward");
    if (raw_) return;
    auto g6 = fc_[1].backward(d_embedding);
    accumulate(grads.fc[kFc6], g6.params);
    auto g5 = fc_[0].backward(g6.input);
    accumulate(grads.fc[kFc5], g5.params);
  }

 private:
  std::array<FullyConnectedOp, 2> fc_;  // FC5, FC6
  Tensor raw_output_;
  bool raw_ = false;
  bool ran_ = false;
};

// ---------------------------------------------------------------------------
// Single-sample operations.

struct ImageFeatures {
  Tensor conv2;  // post-pooling stage-2 maps [C, H, W]
  Tensor conv3;  // post-pooling stage-3 maps [C, H, W]
};

inline Tensor single_batch(const ImagePatch& image) {
  const Shape s = image.pixels.shape();
  return image.pixels.reshaped({1, s[0], s[1], s[2]});
}

inline ImageFeatures extract_image_features(const ScoreNetwork& net, const ImagePatch& image) {
  ImagePass pass;
  pass.forward(net, single_batch(image), Mode::eval);
  const Shape s2 = net.architecture().stage_shape(1), s3 = net.architecture().stage_shape(2);
  return {pass.conv2_features().reshaped(s2), pass.conv3_features().reshaped(s3)};
}

inline EmbeddingVector row_vector(const Tensor& t, std::size_t row) {
  const std::size_t cols = t.dim(1);
  EmbeddingVector v(static_cast<Eigen::Index>(cols));
  for (std::size_t k = 0; k < cols; ++k) v[static_cast<Eigen::Index>(k)] = t[row * cols + k];
  return v;
}

inline EmbeddingVector embed_image(const ScoreNetwork& net, const ImagePatch& image, Mode mode = Mode::eval,
                                   std::mt19937_64* rng = nullptr) {
  ImagePass pass;
  pass.forward(net, single_batch(image), mode, rng);
  return row_vector(pass.embedding(), 0);
}

inline EmbeddingVector embed_pose(const ScoreNetwork& net, const Pose& pose) {
  PosePass pass;
  pass.forward(net, stack_poses(std::span<const Pose>(&pose, 1), net.architecture().pose_scale_mm));
  return row_vector(pass.embedding(), 0);
}

// Sequential dot product; every score in the library goes through here so that
// different call paths agree bitwise.
inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline std::span<const double> as_span(const EmbeddingVector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

inline double score_embeddings(const EmbeddingVector& image_embedding, const EmbeddingVector& pose_embedding) {
  return dot(as_span(image_embedding), as_span(pose_embedding));
}

inline double score(const ScoreNetwork& net, const ImagePatch& image, const Pose& pose, Mode mode = Mode::eval,
                    std::mt19937_64* rng = nullptr) {
  return score_embeddings(embed_image(net, image, mode, rng), embed_pose(net, pose));
}

// <w, f_I(x) o f_J(y)>: the same score read as a linear model on the
// element-wise product of the embeddings. w = 1 reproduces score().
inline double score_ssvm_form(const ScoreNetwork& net, const ImagePatch& image, const Pose& pose,
                              std::span<const double> w, Mode mode = Mode::eval, std::mt19937_64* rng = nullptr) {
  if (w.size() != net.architecture().embedding_dim) {
    throw std::invalid_argument("score_ssvm_form: weight vector has length " + std::to_string(w.size()) +
                                ", embedding dimension is " + std::to_string(net.architecture().embedding_dim));
  }
  const EmbeddingVector fi = embed_image(net, image, mode, rng);
  const EmbeddingVector fj = embed_pose(net, pose);
  double s = 0.0;
  for (std::size_t d = 0; d < w.size(); ++d) {
    const auto i = static_cast<Eigen::Index>(d);
    s += w[d] * (fi[i] * fj[i]);
  }
  return s;
}

// Auxiliary regressor output in scaled pose space (each coordinate in (-1, 1)).
inline Pose predict_pose_auxiliary(const ScoreNetwork& net, const ImagePatch& image, Mode mode = Mode::eval,
                                   std::mt19937_64* rng = nullptr) {
  ImagePass pass;
  pass.forward(net, single_batch(image), mode, rng);
  return Pose::from_flat(pass.prediction().span());
}

inline Pose scale_pose(const Pose& p, double factor) {
  Pose out = p;
  for (auto& j : out.joints) j *= factor;
  return out;
}

}  // namespace structpose
