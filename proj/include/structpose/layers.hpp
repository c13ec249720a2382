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

// Forward and backward implementations of the layer types used by the score
// network. Free functions are stateless; the *Op classes cache what their
// backward pass needs and refuse to run backward before forward.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "structpose/tensor.hpp"

namespace structpose {

enum class Activation { relu, tanh, linear };
enum class Mode { train, eval };

inline double activate_scalar(double z, Activation act) {
  switch (act) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
    case Activation::linear: return z;
  }
  return z;
}

// Derivative expressed through the activation output.
inline double activation_slope(double out, Activation act) {
  switch (act) {
    case Activation::relu: return out > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - out * out;
    case Activation::linear: return 1.0;
  }
  return 1.0;
}

inline Tensor activate(Tensor t, Activation act) {
  if (act == Activation::linear) return t;
  for (double& v : t.values()) v = activate_scalar(v, act);
  return t;
}

inline Tensor activation_backward(const Tensor& output, const Tensor& upstream, Activation act) {
  if (output.shape() != upstream.shape()) {
    throw std::invalid_argument("activation_backward: upstream " + shape_string(upstream.shape()) +
                                " vs output " + shape_string(output.shape()));
  }
  Tensor grad = upstream;
  if (act == Activation::linear) return grad;
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= activation_slope(output[i], act);
  return grad;
}

// ---------------------------------------------------------------------------
// Fully connected: out_j = act(sum_k W_jk in_k + b_j). Input is [in] or [N, in].

namespace detail {

inline std::size_t fc_rows(const Tensor& input, const LayerParams& p) {
  if (p.weights.rank() != 2 || p.bias.size() != p.weights.dim(0)) {
    throw std::invalid_argument("fully_connected: weights " + shape_string(p.weights.shape()) + " with bias length " +
                                std::to_string(p.bias.size()));
  }
  const std::size_t in = p.weights.dim(1);
  if (input.rank() == 1 && input.dim(0) == in) return 1;
  if (input.rank() == 2 && input.dim(1) == in) return input.dim(0);
  throw std::invalid_argument("fully_connected: input " + shape_string(input.shape()) + " does not match weights " +
                              shape_string(p.weights.shape()) + " (input dimension " + std::to_string(in) + ")");
}

}  // namespace detail

inline Tensor fully_connected(const Tensor& input, const LayerParams& p, Activation act) {
  const std::size_t rows = detail::fc_rows(input, p);
  const std::size_t in = p.weights.dim(1);
  const std::size_t out = p.weights.dim(0);
  Tensor result(input.rank() == 1 ? Shape{out} : Shape{rows, out});
  auto y = result.matrix(rows, out);
  y.noalias() = input.matrix(rows, in) * p.weights.matrix(out, in).transpose();
  const Eigen::RowVectorXd b = Eigen::Map<const Eigen::RowVectorXd>(p.bias.data(), static_cast<Eigen::Index>(out));
  y.rowwise() += b;
  return activate(std::move(result), act);
}

inline GradientBundle fully_connected_backward(const Tensor& input, const Tensor& output, const LayerParams& p,
                                               Activation act, const Tensor& upstream) {
  const std::size_t rows = detail::fc_rows(input, p);
  const std::size_t in = p.weights.dim(1);
  const std::size_t out = p.weights.dim(0);
  const Tensor dz = activation_backward(output, upstream, act);
  GradientBundle g;
  g.input = Tensor(input.shape());
  g.params = LayerParams::zeros_like(p);
  const auto dzm = dz.matrix(rows, out);
  g.params.weights.matrix(out, in).noalias() = dzm.transpose() * input.matrix(rows, in);
  const Eigen::RowVectorXd db = dzm.colwise().sum();
  std::copy(db.data(), db.data() + out, g.params.bias.begin());
  g.input.matrix(rows, in).noalias() = dzm * p.weights.matrix(out, in);
  return g;
}

// ---------------------------------------------------------------------------
// Valid-mode cross-correlation. Input is [C, H, W] or [N, C, H, W]; filters are
// [O, C, k, k]. Each output accumulates its bias first, then taps in
// (channel, row, column) order.

struct ConvGeometry {
  std::size_t batch, channels, height, width;
  std::size_t out_channels, kernel, stride, out_height, out_width;
  bool batched;
};

inline ConvGeometry conv_geometry(const Shape& input, const LayerParams& filters, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
  if (filters.weights.rank() != 4 || filters.weights.dim(2) != filters.weights.dim(3)) {
    throw std::invalid_argument("conv2d: filters must be [O, C, k, k], got " + shape_string(filters.weights.shape()));
  }
  if (filters.bias.size() != filters.weights.dim(0)) {
    throw std::invalid_argument("conv2d: bias length " + std::to_string(filters.bias.size()) + " != " +
                                std::to_string(filters.weights.dim(0)) + " output channels");
  }
  ConvGeometry g{};
  if (input.size() == 3) {
    g = {1, input[0], input[1], input[2], 0, 0, 0, 0, 0, false};
  } else if (input.size() == 4) {
    g = {input[0], input[1], input[2], input[3], 0, 0, 0, 0, 0, true};
  } else {
    throw std::invalid_argument("conv2d: input must be [C,H,W] or [N,C,H,W], got " + shape_string(input));
  }
  if (filters.weights.dim(1) != g.channels) {
    throw std::invalid_argument("conv2d: input has " + std::to_string(g.channels) + " channels, filters expect " +
                                std::to_string(filters.weights.dim(1)));
  }
  g.out_channels = filters.weights.dim(0);
  g.kernel = filters.weights.dim(2);
  g.stride = stride;
  if (g.kernel > g.height || g.kernel > g.width) {
    throw std::invalid_argument("conv2d: filter " + std::to_string(g.kernel) + "x" + std::to_string(g.kernel) +
                                " larger than input " + std::to_string(g.height) + "x" + std::to_string(g.width));
  }
  g.out_height = (g.height - g.kernel) / stride + 1;
  g.out_width = (g.width - g.kernel) / stride + 1;
  return g;
}

namespace detail {

// acc[o] = bias[o] + sum_t patch[t] * wt[t * out + o], t ascending, for a
// block of kBlock output channels starting at o0.
template <std::size_t kBlock>
inline void conv_block(const double* __restrict patch, const double* __restrict wt, const double* __restrict bias,
                       std::size_t taps, std::size_t out, std::size_t o0, double* __restrict acc) {
  double a[kBlock];
  for (std::size_t q = 0; q < kBlock; ++q) a[q] = bias[o0 + q];
  for (std::size_t t = 0; t < taps; ++t) {
    const double p = patch[t];
    const double* w = wt + t * out + o0;
    for (std::size_t q = 0; q < kBlock; ++q) a[q] += p * w[q];
  }
  for (std::size_t q = 0; q < kBlock; ++q) acc[o0 + q] = a[q];
}

// Unit stride: one output row at a time, vectorized across columns. Each
// output still accumulates bias, then taps in (c, ki, kj) order.
inline void conv_rows_unit_stride(const ConvGeometry& g, const double* __restrict x, const double* __restrict w,
                                  const double* __restrict bias, double* __restrict y) {
  const std::size_t in_plane = g.height * g.width;
  const std::size_t out_plane = g.out_height * g.out_width;
  const std::size_t ow = g.out_width;
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    const double* wo = w + o * g.channels * g.kernel * g.kernel;
    for (std::size_t r = 0; r < g.out_height; ++r) {
      double* __restrict yr = y + o * out_plane + r * ow;
      for (std::size_t col = 0; col < ow; ++col) yr[col] = bias[o];
      const double* wt = wo;
      for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ki = 0; ki < g.kernel; ++ki) {
          const double* xr = x + c * in_plane + (r + ki) * g.width;
          for (std::size_t kj = 0; kj < g.kernel; ++kj) {
            const double wv = *wt++;
            const double* __restrict xs = xr + kj;
            for (std::size_t col = 0; col < ow; ++col) yr[col] += wv * xs[col];
          }
        }
      }
    }
  }
}

}  // namespace detail

// Each output is bias + sum over (c, ki, kj) in that order, the same
// accumulation a naive triple loop performs.
inline Tensor conv2d(const Tensor& input, const LayerParams& filters, std::size_t stride = 1) {
  const ConvGeometry g = conv_geometry(input.shape(), filters, stride);
  Tensor out(g.batched ? Shape{g.batch, g.out_channels, g.out_height, g.out_width}
                       : Shape{g.out_channels, g.out_height, g.out_width});
  if (stride == 1) {
    const std::size_t in_vol = g.channels * g.height * g.width;
    const std::size_t out_vol = g.out_channels * g.out_height * g.out_width;
    for (std::size_t n = 0; n < g.batch; ++n) {
      detail::conv_rows_unit_stride(g, input.data() + n * in_vol, filters.weights.data(), filters.bias.data(),
                                    out.data() + n * out_vol);
    }
    return out;
  }
  const std::size_t in_plane = g.height * g.width;
  const std::size_t out_plane = g.out_height * g.out_width;
  const std::size_t taps = g.channels * g.kernel * g.kernel;
  const std::size_t oc = g.out_channels;
  std::vector<double> wt(taps * oc);
  const double* w = filters.weights.data();
  for (std::size_t o = 0; o < oc; ++o) {
    for (std::size_t t = 0; t < taps; ++t) wt[t * oc + o] = w[o * taps + t];
  }
  std::vector<double> patch(taps), acc(oc);
  for (std::size_t n = 0; n < g.batch; ++n) {
    const double* x = input.data() + n * g.channels * in_plane;
    double* y = out.data() + n * oc * out_plane;
    for (std::size_t r = 0; r < g.out_height; ++r) {
      for (std::size_t col = 0; col < g.out_width; ++col) {
        std::size_t t = 0;
        for (std::size_t c = 0; c < g.channels; ++c) {
          for (std::size_t ki = 0; ki < g.kernel; ++ki) {
            const double* xr = x + c * in_plane + (r * g.stride + ki) * g.width + col * g.stride;
            for (std::size_t kj = 0; kj < g.kernel; ++kj) patch[t++] = xr[kj];
          }
        }
        std::size_t o0 = 0;
        for (; o0 + 8 <= oc; o0 += 8) detail::conv_block<8>(patch.data(), wt.data(), filters.bias.data(), taps, oc, o0, acc.data());
        for (; o0 < oc; ++o0) detail::conv_block<1>(patch.data(), wt.data(), filters.bias.data(), taps, oc, o0, acc.data());
        const std::size_t pos = r * g.out_width + col;
        for (std::size_t o = 0; o < oc; ++o) y[o * out_plane + pos] = acc[o];
      }
    }
  }
  return out;
}

inline GradientBundle conv2d_backward(const Tensor& input, const LayerParams& filters, std::size_t stride,
                                      const Tensor& upstream, bool need_input_grad = true) {
  const ConvGeometry g = conv_geometry(input.shape(), filters, stride);
  const Shape expected = g.batched ? Shape{g.batch, g.out_channels, g.out_height, g.out_width}
                                   : Shape{g.out_channels, g.out_height, g.out_width};
  if (upstream.shape() != expected) {
    throw std::invalid_argument("conv2d_backward: upstream " + shape_string(upstream.shape()) + ", expected " +
                                shape_string(expected));
  }
  GradientBundle grad;
  if (need_input_grad) grad.input = Tensor(input.shape());
  grad.params = LayerParams::zeros_like(filters);
  const std::size_t in_plane = g.height * g.width;
  const std::size_t out_plane = g.out_height * g.out_width;
  const double* w = filters.weights.data();
  double* dw = grad.params.weights.data();
  for (std::size_t n = 0; n < g.batch; ++n) {
    const double* x = input.data() + n * g.channels * in_plane;
    double* dx = need_input_grad ? grad.input.data() + n * g.channels * in_plane : nullptr;
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      const double* dy = upstream.data() + (n * g.out_channels + o) * out_plane;
      double bsum = 0.0;
      for (std::size_t i = 0; i < out_plane; ++i) bsum += dy[i];
      grad.params.bias[o] += bsum;
      for (std::size_t c = 0; c < g.channels; ++c) {
        const double* xc = x + c * in_plane;
        for (std::size_t ki = 0; ki < g.kernel; ++ki) {
          for (std::size_t kj = 0; kj < g.kernel; ++kj) {
            const std::size_t widx = ((o * g.channels + c) * g.kernel + ki) * g.kernel + kj;
            const double wv = w[widx];
            double acc = 0.0;
            for (std::size_t r = 0; r < g.out_height; ++r) {
              const double* xr = xc + (r * g.stride + ki) * g.width + kj;
              const double* dyr = dy + r * g.out_width;
              for (std::size_t col = 0; col < g.out_width; ++col) acc += dyr[col] * xr[col * g.stride];
              if (dx != nullptr) {
                double* dxr = dx + c * in_plane + (r * g.stride + ki) * g.width + kj;
                for (std::size_t col = 0; col < g.out_width; ++col) dxr[col * g.stride] += wv * dyr[col];
              }
            }
            dw[widx] += acc;
          }
        }
      }
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Non-overlapping max pooling. Spatial dims must be divisible by the window;
// ties resolve to the first element in row-major window order.

struct PoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

inline PoolResult maxpool2d(const Tensor& input, std::size_t window) {
  if (window == 0) throw std::invalid_argument("maxpool2d: window must be positive");
  if (input.rank() < 2) throw std::invalid_argument("maxpool2d: input must have spatial dims");
  const std::size_t h = input.dim(input.rank() - 2);
  const std::size_t w = input.dim(input.rank() - 1);
  if (h % window != 0 || w % window != 0) {
    throw std::invalid_argument("maxpool2d: spatial dims " + std::to_string(h) + "x" + std::to_string(w) +
                                " not divisible by window " + std::to_string(window));
  }
  const std::size_t planes = input.size() / (h * w);
  const std::size_t oh = h / window, ow = w / window;
  Shape out_shape = input.shape();
  out_shape[out_shape.size() - 2] = oh;
  out_shape[out_shape.size() - 1] = ow;
  PoolResult r{Tensor(out_shape), std::vector<std::size_t>(planes * oh * ow)};
  for (std::size_t p = 0; p < planes; ++p) {
    const std::size_t base = p * h * w;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = base + (i * window) * w + j * window;
        double best_v = input[best];
        for (std::size_t di = 0; di < window; ++di) {
          for (std::size_t dj = 0; dj < window; ++dj) {
            const std::size_t idx = base + (i * window + di) * w + j * window + dj;
            if (input[idx] > best_v) {
              best_v = input[idx];
              best = idx;
            }
          }
        }
        const std::size_t o = (p * oh + i) * ow + j;
        r.output[o] = best_v;
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

inline Tensor maxpool2d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                                 const Tensor& upstream) {
  if (upstream.size() != argmax.size()) {
    throw std::invalid_argument("maxpool2d_backward: upstream has " + std::to_string(upstream.size()) +
                                " elements, argmax " + std::to_string(argmax.size()));
  }
  Tensor grad(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) grad[argmax.at(o)] += upstream[o];
  return grad;
}

// ---------------------------------------------------------------------------
// Inverted dropout: survivors are scaled by 1/(1-rate) so eval is the identity.

// Uniform double in [0, 1) from the top 53 bits.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct DropoutResult {
  Tensor output;
  Tensor mask;  // per-element multiplier: 0 or 1/(1-rate)
};

inline void check_drop_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
}

inline Tensor dropout_mask(const Shape& shape, double rate, std::mt19937_64& rng) {
  check_drop_rate(rate);
  Tensor mask(shape, 1.0);
  if (rate == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask.values()) m = unit_uniform(rng) < rate ? 0.0 : keep_scale;
  return mask;
}

inline Tensor apply_mask(const Tensor& input, const Tensor& mask) {
  if (input.shape() != mask.shape()) {
    throw std::invalid_argument("dropout: mask " + shape_string(mask.shape()) + " vs input " +
                                shape_string(input.shape()));
  }
  Tensor out = input;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return out;
}

inline DropoutResult dropout(const Tensor& input, double rate, Mode mode, std::mt19937_64& rng) {
  check_drop_rate(rate);
  if (mode == Mode::eval || rate == 0.0) return {input, Tensor(input.shape(), 1.0)};
  Tensor mask = dropout_mask(input.shape(), rate, rng);
  Tensor out = apply_mask(input, mask);
  return {std::move(out), std::move(mask)};
}

inline Tensor dropout_backward(const Tensor& mask, const Tensor& upstream) { return apply_mask(upstream, mask); }

// ---------------------------------------------------------------------------
// Cached ops.

namespace detail {
inline void require_forward(bool ran, const char* op) {
  if (!ran) throw std::logic_error(std::string(op) + ": backward called before forward");
}
}  // namespace detail

// Holds a pointer to the parameters seen in forward(); they must outlive backward().
class FullyConnectedOp {
 public:
  const Tensor& forward(const Tensor& input, const LayerParams& params, Activation act) {
    params_ = &params;
    act_ = act;
    input_ = input;
    output_ = fully_connected(input, params, act);
    return output_;
  }
  GradientBundle backward(const Tensor& upstream) const {
    detail::require_forward(params_ != nullptr, "FullyConnectedOp");
    return fully_connected_backward(input_, output_, *params_, act_, upstream);
  }
  const Tensor& output() const { return output_; }

 private:
  const LayerParams* params_ = nullptr;
  Activation act_ = Activation::linear;
  Tensor input_, output_;
};

// Convolution followed by an element-wise activation.
class ConvOp {
 public:
  const Tensor& forward(const Tensor& input, const LayerParams& filters, std::size_t stride, Activation act) {
    params_ = &filters;
    stride_ = stride;
    act_ = act;
    input_ = input;
    output_ = activate(conv2d(input, filters, stride), act);
    return output_;
  }
  GradientBundle backward(const Tensor& upstream, bool need_input_grad = true) const {
    detail::require_forward(params_ != nullptr, "ConvOp");
    return conv2d_backward(input_, *params_, stride_, activation_backward(output_, upstream, act_), need_input_grad);
  }
  const Tensor& output() const { return output_; }

 private:
  const LayerParams* params_ = nullptr;
  std::size_t stride_ = 1;
  Activation act_ = Activation::linear;
  Tensor input_, output_;
};

class MaxPoolOp {
 public:
  const Tensor& forward(const Tensor& input, std::size_t window) {
    input_shape_ = input.shape();
    result_ = maxpool2d(input, window);
    ran_ = true;
    return result_.output;
  }
  Tensor backward(const Tensor& upstream) const {
    detail::require_forward(ran_, "MaxPoolOp");
    return maxpool2d_backward(input_shape_, result_.argmax, upstream);
  }
  const Tensor& output() const { return result_.output; }

 private:
  bool ran_ = false;
  Shape input_shape_;
  PoolResult result_;
};

class DropoutOp {
 public:
  const Tensor& forward(const Tensor& input, double rate, Mode mode, std::mt19937_64& rng) {
    auto r = dropout(input, rate, mode, rng);
    output_ = std::move(r.output);
    mask_ = std::move(r.mask);
    return output_;
  }
  // Replays a previously drawn mask.
  const Tensor& forward_with_mask(const Tensor& input, const Tensor& mask) {
    output_ = apply_mask(input, mask);
    mask_ = mask;
    return output_;
  }
  Tensor backward(const Tensor& upstream) const {
    detail::require_forward(!mask_.empty(), "DropoutOp");
    return dropout_backward(mask_, upstream);
  }
  const Tensor& mask() const { return mask_; }
  const Tensor& output() const { return output_; }

 private:
  Tensor output_, mask_;
};

}  // namespace structpose
