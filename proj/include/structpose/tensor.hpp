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

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace structpose {

using Shape = std::vector<std::size_t>;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_volume(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// Dense row-major array of doubles. Storage is aligned to the widest SIMD
// width so vectorized kernels take the same path regardless of where the
// allocator places the buffer.
class Tensor {
 public:
  using Storage = std::vector<double, Eigen::aligned_allocator<double>>;

  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), values_(shape_volume(shape_), fill) {}
  Tensor(Shape shape, const std::vector<double>& values)
      : Tensor(std::move(shape), Storage(values.begin(), values.end()), 0) {}
  template <class It>
  Tensor(Shape shape, It first, It last) : Tensor(std::move(shape), Storage(first, last), 0) {}

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  Storage& values() { return values_; }
  const Storage& values() const { return values_; }
  std::vector<double> to_vector() const { return {values_.begin(), values_.end()}; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> span() { return values_; }
  std::span<const double> span() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // Same values, new shape of equal volume.
  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), values_, 0); }
  void reshape(Shape shape) {
    if (shape_volume(shape) != values_.size()) {
      throw std::invalid_argument("Tensor::reshape: " + shape_string(shape_) + " -> " + shape_string(shape));
    }
    shape_ = std::move(shape);
  }

  // Views as a matrix whose last dimension is the column count.
  MatrixMap matrix(std::size_t rows, std::size_t cols) {
    check_volume(rows, cols);
    return MatrixMap(values_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  }
  ConstMatrixMap matrix(std::size_t rows, std::size_t cols) const {
    check_volume(rows, cols);
    return ConstMatrixMap(values_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  }

  bool all_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  double squared_norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return s;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Tensor(Shape shape, Storage values, int) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_volume(shape_)) {
      throw std::invalid_argument("Tensor: shape " + shape_string(shape_) + " needs " +
                                  std::to_string(shape_volume(shape_)) + " values, got " +
                                  std::to_string(values_.size()));
    }
  }

  void check_volume(std::size_t rows, std::size_t cols) const {
    if (rows * cols != values_.size()) {
      throw std::invalid_argument("Tensor::matrix: " + std::to_string(rows) + "x" + std::to_string(cols) +
                                  " view of " + shape_string(shape_));
    }
  }

  Shape shape_;
  Storage values_;
};

// Weight matrix or filter bank plus one bias per output unit/channel.
// Fully connected weights are [out, in]; convolution filters are [out_c, in_c, k, k].
struct LayerParams {
  Tensor weights;
  std::vector<double> bias;

  std::size_t output_count() const { return weights.rank() == 0 ? 0 : weights.dim(0); }
  bool empty() const { return weights.empty() && bias.empty(); }

  void validate() const {
    if (weights.rank() != 2 && weights.rank() != 4) {
      throw std::invalid_argument("LayerParams: weights must be rank 2 or 4, got " + shape_string(weights.shape()));
    }
    if (bias.size() != weights.dim(0)) {
      throw std::invalid_argument("LayerParams: bias length " + std::to_string(bias.size()) +
                                  " != output count " + std::to_string(weights.dim(0)));
    }
  }

  static LayerParams zeros_like(const LayerParams& p) {
    return LayerParams{Tensor(p.weights.shape()), std::vector<double>(p.bias.size(), 0.0)};
  }

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

// Result of one backward step: gradient w.r.t. the op input and, for parametric
// ops, w.r.t. its weights and bias.
struct GradientBundle {
  Tensor input;
  LayerParams params;
};

}  // namespace structpose
