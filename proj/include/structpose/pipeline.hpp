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

// Glue between a stored dataset and the training / inference routines.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "structpose/data.hpp"
#include "structpose/dataset.hpp"
#include "structpose/export.hpp"
#include "structpose/inference.hpp"
#include "structpose/network.hpp"
#include "structpose/report.hpp"
#include "structpose/training.hpp"

namespace structpose {

inline TrainingData make_training_data(const Dataset& ds) {
  TrainingData td;
  for (std::size_t i : ds.manifest.train) {
    td.images.push_back(ds.image(i));
    td.poses.push_back(ds.poses[i]);
  }
  if (td.images.empty()) throw std::invalid_argument("dataset has no training samples");
  return td;
}

// The candidate library is the training pose pool.
inline PoseLibrary make_library(const ScoreNetwork& net, const Dataset& ds) {
  std::vector<Pose> poses;
  std::vector<JointAngles> angles;
  for (std::size_t i : ds.manifest.train) {
    poses.push_back(ds.poses[i]);
    if (!ds.angles.empty()) angles.push_back(ds.angles[i]);
  }
  if (poses.empty()) throw std::invalid_argument("dataset has no training poses for the library");
  return precompute_library(net, poses, angles);
}

// Network input for a stored render at evaluation time.
inline ImagePatch eval_input(const ScoreNetwork& net, const Dataset& ds, std::size_t i) {
  const auto& a = net.architecture();
  return center_crop(ds.image(i), a.height, a.width);
}

inline std::vector<std::size_t> limited_split(const Dataset& ds, const std::string& split, std::size_t limit) {
  std::vector<std::size_t> ids = ds.split(split);
  if (limit > 0 && ids.size() > limit) ids.resize(limit);
  if (ids.empty()) throw std::invalid_argument("split '" + split + "' has no samples");
  return ids;
}

struct EvalRequest {
  std::string split = "test";
  std::vector<EvalMode> modes = {EvalMode::max, EvalMode::avg};
  std::vector<std::size_t> a_grid = {1, 5, 20, 50, 100};
  FullInferenceConfig full;  // used by the apf mode; full.average is A
  std::size_t limit = 0;
};

// Max is always evaluated and listed first; avg contributes one row per A
// (A = 1 duplicates Max and is skipped).
inline EvalReport evaluate(const ScoreNetwork& net, const Dataset& ds, const PoseLibrary& lib, const EvalRequest& req) {
  EvalReport rep;
  rep.split = req.split;
  rep.sample_ids = limited_split(ds, req.split, req.limit);
  bool want_avg = false, want_apf = false;
  for (auto m : req.modes) {
    want_avg = want_avg || m == EvalMode::avg;
    want_apf = want_apf || m == EvalMode::apf;
  }
  std::vector<std::size_t> grid;
  if (want_avg) {
    for (std::size_t a : req.a_grid) {
      if (a == 0 || a > lib.size()) {
        throw std::invalid_argument("A = " + std::to_string(a) + " is outside [1, " + std::to_string(lib.size()) +
                                    "] for this pose library");
      }
      if (a > 1) grid.push_back(a);
    }
  }
  if (want_apf && (req.full.average == 0 || req.full.average > lib.size())) {
    throw std::invalid_argument("APF average A = " + std::to_string(req.full.average) + " is outside the library size");
  }
  std::vector<double> max_err;
  std::vector<std::vector<double>> avg_err(grid.size());
  std::vector<double> apf_err;
  for (std::size_t id : rep.sample_ids) {
    const auto scores = score_library(net, embed_image(net, eval_input(net, ds, id)), lib);
    const Pose& gt = ds.poses[id];
    max_err.push_back(mpjpe(estimate_from_scores(lib, scores, 1).pose, gt));
    for (std::size_t k = 0; k < grid.size(); ++k) avg_err[k].push_back(mpjpe(estimate_from_scores(lib, scores, grid[k]).pose, gt));
    if (want_apf) apf_err.push_back(mpjpe(infer_full_from_scores(lib, scores, ds.skeleton, req.full).pose, gt));
  }
  rep.modes.push_back(summarize(EvalMode::max, 1, std::move(max_err)));
  for (std::size_t k = 0; k < grid.size(); ++k) rep.modes.push_back(summarize(EvalMode::avg, grid[k], std::move(avg_err[k])));
  if (want_apf) rep.modes.push_back(summarize(EvalMode::apf, req.full.average, std::move(apf_err)));
  return rep;
}

// Fraction of training images whose max-score library pose is within
// `threshold_mm` of their ground truth.
inline double train_retrieval_accuracy(const ScoreNetwork& net, const Dataset& ds, const PoseLibrary& lib,
                                       double threshold_mm) {
  std::size_t hits = 0;
  for (std::size_t id : ds.manifest.train) {
    const auto scores = score_library(net, embed_image(net, eval_input(net, ds, id)), lib);
    if (mpjpe(estimate_from_scores(lib, scores, 1).pose, ds.poses[id]) <= threshold_mm) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ds.manifest.train.size());
}

struct EmbeddingSets {
  std::vector<std::size_t> ids;
  EmbeddingMatrix image;  // [N, D]
  EmbeddingMatrix pose;   // [N, D]
};

inline EmbeddingSets collect_embeddings(const ScoreNetwork& net, const Dataset& ds, const std::string& split) {
  EmbeddingSets e;
  e.ids = limited_split(ds, split, 0);
  const auto d = static_cast<Eigen::Index>(net.architecture().embedding_dim);
  const auto n = static_cast<Eigen::Index>(e.ids.size());
  e.image.resize(n, d);
  e.pose.resize(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t id = e.ids[static_cast<std::size_t>(r)];
    e.image.row(r) = embed_image(net, eval_input(net, ds, id)).transpose();
    e.pose.row(r) = embed_pose(net, ds.poses[id]).transpose();
  }
  return e;
}

}  // namespace structpose
