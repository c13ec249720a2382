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

// Two-dimensional views of a set of embedding vectors: the two raw
// dimensions with the largest sample variance, and the projection onto the
// top two principal components.

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace structpose {

using EmbeddingMatrix = Eigen::MatrixXd;  // one sample per row

struct VarianceDims {
  std::size_t first = 0;
  std::size_t second = 0;
  double first_variance = 0.0;
  double second_variance = 0.0;
  Eigen::MatrixXd values;  // [N, 2]
};

struct PcaProjection {
  Eigen::Vector2d eigenvalues = Eigen::Vector2d::Zero();  // descending
  Eigen::MatrixXd components;                             // [D, 2], unit columns
  Eigen::VectorXd mean;                                   // [D]
  Eigen::MatrixXd coords;                                 // [N, 2]
};

struct EmbeddingExport {
  VarianceDims dims;
  PcaProjection pca;
  bool zero_variance = false;  // every sample identical
};

inline void require_export_samples(const EmbeddingMatrix& m) {
  if (m.rows() < 3) {
    throw std::invalid_argument("export: need at least 3 samples for PCA, got " + std::to_string(m.rows()));
  }
  if (m.cols() < 2) throw std::invalid_argument("export: need at least 2 embedding dimensions");
  if (!m.allFinite()) throw std::invalid_argument("export: embeddings contain non-finite values");
}

// Unbiased per-column variance.
inline Eigen::VectorXd column_variance(const EmbeddingMatrix& m) {
  const Eigen::RowVectorXd mean = m.colwise().mean();
  const Eigen::MatrixXd c = m.rowwise() - mean;
  return c.colwise().squaredNorm().transpose() / static_cast<double>(m.rows() - 1);
}

// Ties go to the lower dimension index.
inline VarianceDims top_variance_dims(const EmbeddingMatrix& m) {
  require_export_samples(m);
  const Eigen::VectorXd var = column_variance(m);
  VarianceDims out;
  std::size_t a = 0, b = 1;
  if (var(1) > var(0)) std::swap(a, b);
  for (Eigen::Index k = 2; k < var.size(); ++k) {
    const auto i = static_cast<std::size_t>(k);
    if (var(k) > var(static_cast<Eigen::Index>(a))) {
      b = a;
      a = i;
    } else if (var(k) > var(static_cast<Eigen::Index>(b))) {
      b = i;
    }
  }
  out.first = a;
  out.second = b;
  out.first_variance = var(static_cast<Eigen::Index>(a));
  out.second_variance = var(static_cast<Eigen::Index>(b));
  out.values.resize(m.rows(), 2);
  out.values.col(0) = m.col(static_cast<Eigen::Index>(a));
  out.values.col(1) = m.col(static_cast<Eigen::Index>(b));
  return out;
}

// Flips v so its largest-magnitude entry (lowest index on ties) is positive.
inline void canonical_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v(i)) > std::abs(v(best))) best = i;
  }
  if (v(best) < 0.0) v = -v;
}

// PCA through the eigendecomposition of the sample covariance.
inline PcaProjection pca_2d(const EmbeddingMatrix& m) {
  require_export_samples(m);
  PcaProjection out;
  out.mean = m.colwise().mean().transpose();
  const Eigen::MatrixXd c = m.rowwise() - out.mean.transpose();
  const Eigen::MatrixXd cov = (c.transpose() * c) / static_cast<double>(m.rows() - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("export: covariance eigendecomposition failed");
  const Eigen::Index d = cov.rows();
  out.components.resize(d, 2);
  for (Eigen::Index k = 0; k < 2; ++k) {
    // Eigen returns ascending eigenvalues.
    out.eigenvalues(k) = std::max(0.0, eig.eigenvalues()(d - 1 - k));
    out.components.col(k) = eig.eigenvectors().col(d - 1 - k);
    canonical_sign(out.components.col(k));
  }
  out.coords = c * out.components;
  return out;
}

inline EmbeddingExport export_embedding(const EmbeddingMatrix& m) {
  EmbeddingExport e;
  e.dims = top_variance_dims(m);
  e.pca = pca_2d(m);
  e.zero_variance = e.dims.first_variance == 0.0;
  if (e.zero_variance) e.pca.coords.setZero();
  return e;
}

// Whitespace-separated table with a header line; ids label the rows.
inline void write_export_table(std::ostream& os, const std::vector<std::size_t>& ids, const EmbeddingExport& e) {
  if (ids.size() != static_cast<std::size_t>(e.pca.coords.rows())) {
    throw std::invalid_argument("export: id count does not match sample count");
  }
  os << "# id dim" << e.dims.first << " dim" << e.dims.second << " pc1 pc2\n";
  char buf[160];
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    std::snprintf(buf, sizeof buf, "%zu %.17g %.17g %.17g %.17g\n", ids[i], e.dims.values(r, 0), e.dims.values(r, 1),
                  e.pca.coords(r, 0), e.pca.coords(r, 1));
    os << buf;
  }
}

}  // namespace structpose
