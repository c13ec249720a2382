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

// Max-margin structured training of the score network: margin-rescaled hinge
// against the most-violated candidate pose, auxiliary pose regression, weight
// decay, and plain SGD whose step is chosen by a grid line search per batch.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "structpose/data.hpp"
#include "structpose/hash.hpp"
#include "structpose/kinematics.hpp"
#include "structpose/network.hpp"

namespace structpose {

struct TrainingConfig {
  std::size_t batch_size = 128;
  std::size_t candidate_count = 2000;
  std::size_t frequent_violators = 10;
  double aux_weight = 1.0;
  double reg_weight = 1e-4;
  std::size_t epochs = 10;
  double step_low = 1e-7;
  double step_high = 1e2;
  std::size_t steps_per_decade = 2;
  double margin_scale = 1.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (batch_size == 0 || candidate_count == 0 || frequent_violators == 0 || epochs == 0) {
      throw std::invalid_argument("training: batch_size, candidate_count, frequent_violators and epochs must be >= 1");
    }
    if (!(aux_weight >= 0.0) || !(reg_weight >= 0.0)) throw std::invalid_argument("training: weights must be >= 0");
    if (!(step_low > 0.0 && step_low < step_high)) throw std::invalid_argument("training: need 0 < step_low < step_high");
    if (steps_per_decade == 0) throw std::invalid_argument("training: steps_per_decade must be >= 1");
    if (!(margin_scale >= 0.0)) throw std::invalid_argument("training: margin_scale must be >= 0");
  }
};

// max(0, score_hat + margin_scale * delta - score_gt)
inline double margin_hinge(double score_gt, double score_hat, double delta, double margin_scale = 1.0) {
  if (delta < 0.0) throw std::invalid_argument("margin_hinge: delta must be non-negative, got " + std::to_string(delta));
  return std::max(0.0, score_hat + margin_scale * delta - score_gt);
}

// ---------------------------------------------------------------------------
// Working set and candidate sets.

class ViolationWorkingSet {
 public:
  void add(std::size_t pose_id) { ++counts_[pose_id]; }

  std::size_t count(std::size_t pose_id) const {
    const auto it = counts_.find(pose_id);
    return it == counts_.end() ? 0 : it->second;
  }

  // Highest counts first; equal counts by ascending id.
  std::vector<std::size_t> most_frequent(std::size_t k) const {
    std::vector<std::pair<std::size_t, std::size_t>> entries(counts_.begin(), counts_.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < std::min(k, entries.size()); ++i) ids.push_back(entries[i].first);
    return ids;
  }

  const std::map<std::size_t, std::size_t>& counts() const { return counts_; }
  std::size_t size() const { return counts_.size(); }

  nlohmann::json to_json() const {
    auto a = nlohmann::json::array();
    for (const auto& [id, c] : counts_) a.push_back({id, c});
    return a;
  }
  static ViolationWorkingSet from_json(const nlohmann::json& j) {
    ViolationWorkingSet w;
    for (const auto& e : j) {
      const auto c = e.at(1).get<std::size_t>();
      if (c == 0) throw std::invalid_argument("working set: stored counts must be >= 1");
      w.counts_[e.at(0).get<std::size_t>()] = c;
    }
    return w;
  }

  friend bool operator==(const ViolationWorkingSet&, const ViolationWorkingSet&) = default;

 private:
  std::map<std::size_t, std::size_t> counts_;
};

struct CandidateSet {
  std::vector<std::size_t> ids;  // indices into the pose pool
  std::vector<Pose> poses;
  std::optional<Tensor> embeddings;  // [M, D] when cached

  std::size_t size() const { return ids.size(); }
};

// C poses uniformly without replacement (the whole pool, in order, when it has
// at most C poses), then the K most frequent violators not already present.
inline CandidateSet sample_candidates(std::span<const Pose> pool, std::size_t c, const ViolationWorkingSet& working,
                                      std::size_t k, std::mt19937_64& rng) {
  if (pool.empty()) throw std::invalid_argument("sample_candidates: empty pose pool");
  CandidateSet set;
  std::vector<char> taken(pool.size(), 0);
  if (c >= pool.size()) {
    set.ids.resize(pool.size());
    std::iota(set.ids.begin(), set.ids.end(), std::size_t{0});
  } else {
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < c; ++i) {
      const std::size_t j = i + uniform_index(rng, pool.size() - i);
      std::swap(order[i], order[j]);
    }
    set.ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(c));
  }
  for (std::size_t id : set.ids) taken[id] = 1;
  for (std::size_t id : working.most_frequent(k)) {
    if (id < pool.size() && !taken[id]) {
      taken[id] = 1;
      set.ids.push_back(id);
    }
  }
  set.poses.reserve(set.ids.size());
  for (std::size_t id : set.ids) set.poses.push_back(pool[id]);
  return set;
}

inline Tensor embed_poses(const ScoreNetwork& net, std::span<const Pose> poses) {
  PosePass pass;
  pass.forward(net, stack_poses(poses, net.architecture().pose_scale_mm));
  return pass.embedding();
}

struct Violation {
  std::size_t index = 0;  // position within the candidate set
  double value = 0.0;     // score(x, y') + margin_scale * delta(y, y')
};

// argmax_m <image_embedding, candidate_m> + margin_scale * deltas[m]; ties go to
// the lowest index.
inline Violation most_violated(std::span<const double> image_embedding, const Tensor& candidate_embeddings,
                               std::span<const double> deltas, double margin_scale) {
  const std::size_t m = candidate_embeddings.rank() == 2 ? candidate_embeddings.dim(0) : 0;
  if (m == 0) throw std::invalid_argument("most_violated: empty candidate set");
  if (deltas.size() != m) throw std::invalid_argument("most_violated: one delta per candidate required");
  const std::size_t d = candidate_embeddings.dim(1);
  Violation best{0, 0.0};
  for (std::size_t i = 0; i < m; ++i) {
    const double v = dot(image_embedding, candidate_embeddings.span().subspan(i * d, d)) + margin_scale * deltas[i];
    if (i == 0 || v > best.value) best = {i, v};
  }
  return best;
}

struct ViolatedPose {
  std::size_t index = 0;
  Pose pose;
  double value = 0.0;
};

inline ViolatedPose find_most_violated(const ScoreNetwork& net, const ImagePatch& image, const Pose& gt,
                                       const CandidateSet& candidates, double margin_scale = 1.0) {
  if (candidates.size() == 0) throw std::invalid_argument("find_most_violated: empty candidate set");
  const Tensor emb = candidates.embeddings ? *candidates.embeddings : embed_poses(net, candidates.poses);
  std::vector<double> deltas(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) deltas[i] = mpjpe(gt, candidates.poses[i]);
  const EmbeddingVector fi = embed_image(net, image);
  const Violation v = most_violated(as_span(fi), emb, deltas, margin_scale);
  return {v.index, candidates.poses[v.index], v.value};
}

// ---------------------------------------------------------------------------
// Global cost.

struct ExtendedTriple {
  ImagePatch image;
  Pose gt;
  Pose violator;
};

// Everything the batch cost depends on besides the parameters; held fixed
// while the line search probes step sizes.
struct FrozenBatch {
  Tensor images;                 // [N, C, H, W]
  std::vector<Pose> gt;          // mm
  std::vector<Pose> violators;   // mm
  std::optional<DropoutMasks> masks;  // train-mode masks; eval mode when absent

  std::size_t size() const { return gt.size(); }
};

struct CostTerms {
  double total = 0.0;
  double margin = 0.0;  // (1/N) sum of hinges
  double aux = 0.0;     // (lambda/N) sum of squared prediction errors
  double reg = 0.0;     // alpha * sum ||W_j||_F^2 over FC1..FC7
  std::size_t violations = 0;
};

// Cost of a frozen batch; writes the gradient to `grad` when given.
inline CostTerms batch_cost(const ScoreNetwork& net, const FrozenBatch& batch, const TrainingConfig& cfg,
                            Parameters* grad = nullptr) {
  const std::size_t n = batch.size();
  if (n == 0) throw std::invalid_argument("global_cost: empty batch");
  if (batch.violators.size() != n || batch.images.rank() != 4 || batch.images.dim(0) != n) {
    throw std::invalid_argument("global_cost: batch arrays disagree in length");
  }
  const auto& arch = net.architecture();
  ImagePass image_pass;
  image_pass.forward(net, batch.images, batch.masks ? Mode::train : Mode::eval, nullptr,
                     batch.masks ? &*batch.masks : nullptr);
  std::vector<Pose> both = batch.gt;
  both.insert(both.end(), batch.violators.begin(), batch.violators.end());
  const Tensor targets = stack_poses(both, arch.pose_scale_mm);
  PosePass pose_pass;
  pose_pass.forward(net, targets);

  const std::size_t d = arch.embedding_dim;
  const Tensor& fi = image_pass.embedding();
  const Tensor& fj = pose_pass.embedding();
  const Tensor& pred = image_pass.prediction();
  const double inv_n = 1.0 / static_cast<double>(n);

  CostTerms c;
  Tensor d_image, d_pose, d_pred;
  if (grad != nullptr) {
    *grad = Parameters::zeros_like(net.parameters());
    d_image = Tensor(fi.shape());
    d_pose = Tensor(fj.shape());
    d_pred = Tensor(pred.shape());
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto fi_i = fi.span().subspan(i * d, d);
    const auto gt_i = fj.span().subspan(i * d, d);
    const auto hat_i = fj.span().subspan((n + i) * d, d);
    const bool same = batch.violators[i] == batch.gt[i];
    const double hinge =
        same ? 0.0 : margin_hinge(dot(fi_i, gt_i), dot(fi_i, hat_i), mpjpe(batch.gt[i], batch.violators[i]), cfg.margin_scale);
    c.margin += hinge;
    if (hinge > 0.0) {
      ++c.violations;
      if (grad != nullptr) {
        for (std::size_t k = 0; k < d; ++k) {
          d_image[i * d + k] = (hat_i[k] - gt_i[k]) * inv_n;
          d_pose[i * d + k] = -fi_i[k] * inv_n;
          d_pose[(n + i) * d + k] = fi_i[k] * inv_n;
        }
      }
    }
    double sq = 0.0;
    for (std::size_t k = 0; k < kPoseDim; ++k) {
      const double e = pred[i * kPoseDim + k] - targets[i * kPoseDim + k];
      sq += e * e;
      if (grad != nullptr) d_pred[i * kPoseDim + k] = 2.0 * cfg.aux_weight * e * inv_n;
    }
    c.aux += sq;
  }
  c.margin *= inv_n;
  c.aux *= cfg.aux_weight * inv_n;
  c.reg = cfg.reg_weight * net.parameters().fc_weight_sq_norm();
  c.total = c.margin + c.aux + c.reg;

  if (grad != nullptr) {
    image_pass.backward(d_image, cfg.aux_weight > 0.0 ? d_pred : Tensor(), *grad);
    pose_pass.backward(d_pose, *grad);
    if (cfg.reg_weight > 0.0) {
      for (std::size_t l = 0; l < 7; ++l) {
        auto& g = grad->fc[l].weights;
        const auto& w = net.parameters().fc[l].weights;
        for (std::size_t i = 0; i < w.size(); ++i) g[i] += 2.0 * cfg.reg_weight * w[i];
      }
    }
  }
  return c;
}

// Cost over extended triples without augmentation; dropout replays `masks`
// when given, otherwise the network runs in eval mode.
inline CostTerms global_cost(const ScoreNetwork& net, std::span<const ExtendedTriple> triples, const TrainingConfig& cfg,
                             const DropoutMasks* masks = nullptr, Parameters* grad = nullptr) {
  if (triples.empty()) throw std::invalid_argument("global_cost: empty batch");
  FrozenBatch b;
  std::vector<ImagePatch> images;
  for (const auto& t : triples) {
    images.push_back(t.image);
    b.gt.push_back(t.gt);
    b.violators.push_back(t.violator);
  }
  b.images = stack_images(images);
  if (masks != nullptr) b.masks = *masks;
  return batch_cost(net, b, cfg, grad);
}

// ---------------------------------------------------------------------------
// Line search.

// Log-spaced step grid over [low, high] with `per_decade` points per decade,
// both ends included.
inline std::vector<double> step_grid(double low, double high, std::size_t per_decade) {
  const double decades = std::log10(high / low);
  const auto intervals = static_cast<std::size_t>(std::llround(decades * static_cast<double>(per_decade)));
  std::vector<double> grid;
  for (std::size_t i = 0; i <= intervals; ++i) {
    const double t = intervals == 0 ? 0.0 : static_cast<double>(i) / static_cast<double>(intervals);
    grid.push_back(std::clamp(low * std::pow(10.0, t * decades), low, high));
  }
  grid.back() = high;
  grid.front() = low;
  return grid;
}

struct StepChoice {
  double step = 0.0;  // 0 when no grid point improves on the current cost
  double cost = 0.0;  // cost at the chosen step (the current cost when step = 0)
};

// Picks the grid step with the lowest cost; ties keep the smaller step.
inline StepChoice line_search_grid(const std::function<double(double)>& cost_at, double current_cost,
                                   const TrainingConfig& cfg) {
  StepChoice best{0.0, current_cost};
  for (double eta : step_grid(cfg.step_low, cfg.step_high, cfg.steps_per_decade)) {
    const double c = cost_at(eta);
    if (std::isfinite(c) && c < best.cost) best = {eta, c};
  }
  return best;
}

// Step along -grad for a frozen batch.
inline StepChoice line_search(const ScoreNetwork& net, const FrozenBatch& batch, const Parameters& grad,
                              const TrainingConfig& cfg, double current_cost) {
  ScoreNetwork trial = net;
  return line_search_grid(
      [&](double eta) {
        trial.parameters().assign_axpy(net.parameters(), -eta, grad);
        return batch_cost(trial, batch, cfg).total;
      },
      current_cost, cfg);
}

// ---------------------------------------------------------------------------
// Training loop.

struct TrainingData {
  std::vector<ImagePatch> images;  // un-augmented renders
  std::vector<Pose> poses;         // root-centred, mm; also the candidate pool
};

struct HistoryRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double margin = 0.0;
  double aux = 0.0;
  double reg = 0.0;
  double total = 0.0;
  double cost_after = 0.0;
  double step = 0.0;
  std::size_t violations = 0;
  std::size_t batch_size = 0;
  std::size_t candidates = 0;

  nlohmann::json to_json() const {
    return {{"epoch", epoch},           {"batch", batch}, {"margin", margin},         {"aux", aux},
            {"reg", reg},               {"total", total}, {"cost_after", cost_after}, {"step", step},
            {"violations", violations}, {"batch_size", batch_size}, {"candidates", candidates}};
  }
};

// Resumable state between epochs.
struct TrainingState {
  std::size_t epochs_completed = 0;
  ViolationWorkingSet working;

  nlohmann::json to_json() const { return {{"epochs_completed", epochs_completed}, {"working_set", working.to_json()}}; }
  static TrainingState from_json(const nlohmann::json& j) {
    TrainingState s;
    s.epochs_completed = j.at("epochs_completed").get<std::size_t>();
    s.working = ViolationWorkingSet::from_json(j.at("working_set"));
    return s;
  }
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainingCallbacks {
  std::function<void(const HistoryRecord&)> on_batch;
  // After each accepted update: the frozen batch and the updated network.
  std::function<void(const FrozenBatch&, const ScoreNetwork&, const HistoryRecord&)> on_update;
  std::function<void(const ScoreNetwork&, const TrainingState&)> on_epoch;
};

struct TrainingResult {
  std::vector<HistoryRecord> history;
  TrainingState state;
};

// Streams derived from the run seed, so a resumed run replays exactly.
enum class Stream : std::uint64_t { order = 1, candidates = 2, augment = 3, dropout = 4 };

inline std::mt19937_64 stream_rng(std::uint64_t seed, std::size_t epoch, std::size_t batch, Stream s) {
  return std::mt19937_64(derive_seed(seed, {epoch, batch, static_cast<std::uint64_t>(s)}));
}

inline TrainingResult train(const TrainingData& data, ScoreNetwork& net, const TrainingConfig& cfg,
                            const AugmentationConfig& aug, TrainingState state = {},
                            const TrainingCallbacks& callbacks = {}) {
  cfg.validate();
  const std::size_t n = data.images.size();
  if (n == 0 || data.poses.size() != n) throw std::invalid_argument("train: need equally many images and poses");
  const auto& arch = net.architecture();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  TrainingResult result;

  for (std::size_t epoch = state.epochs_completed; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto order_rng = stream_rng(cfg.seed, epoch, 0, Stream::order);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(order_rng, i)]);

    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch_size, hi = std::min(n, lo + cfg.batch_size);
      const std::span<const std::size_t> ids(order.data() + lo, hi - lo);

      auto cand_rng = stream_rng(cfg.seed, epoch, b, Stream::candidates);
      CandidateSet cands = sample_candidates(data.poses, cfg.candidate_count, state.working, cfg.frequent_violators, cand_rng);
      cands.embeddings = embed_poses(net, cands.poses);

      auto aug_rng = stream_rng(cfg.seed, epoch, b, Stream::augment);
      std::vector<ImagePatch> crops;
      for (std::size_t id : ids) crops.push_back(augment(data.images[id], aug, aug_rng));

      FrozenBatch fb;
      fb.images = stack_images(crops);
      auto drop_rng = stream_rng(cfg.seed, epoch, b, Stream::dropout);
      ImagePass pass;
      pass.forward(net, fb.images, Mode::train, &drop_rng);
      fb.masks = pass.masks();

      const std::size_t d = arch.embedding_dim;
      std::vector<double> deltas(cands.size());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const Pose& gt = data.poses[ids[i]];
        for (std::size_t m = 0; m < cands.size(); ++m) deltas[m] = mpjpe(gt, cands.poses[m]);
        const Violation v = most_violated(pass.embedding().span().subspan(i * d, d), *cands.embeddings, deltas,
                                          cfg.margin_scale);
        fb.gt.push_back(gt);
        fb.violators.push_back(cands.poses[v.index]);
        state.working.add(cands.ids[v.index]);
      }

      Parameters grad;
      const CostTerms cost = batch_cost(net, fb, cfg, &grad);
      if (!std::isfinite(cost.total) || !grad.all_finite()) {
        throw TrainingDiverged("train: non-finite cost at epoch " + std::to_string(epoch + 1) + " batch " +
                               std::to_string(b + 1) + " (margin " + std::to_string(cost.margin) + ", aux " +
                               std::to_string(cost.aux) + ", reg " + std::to_string(cost.reg) + ")");
      }
      const StepChoice choice = line_search(net, fb, grad, cfg, cost.total);
      if (choice.step > 0.0) net.parameters().axpy(-choice.step, grad);

      HistoryRecord rec{epoch + 1, b + 1, cost.margin, cost.aux,         cost.reg,    cost.total,
                        choice.cost, choice.step, cost.violations, ids.size(), cands.size()};
      result.history.push_back(rec);
      if (callbacks.on_batch) callbacks.on_batch(rec);
      if (callbacks.on_update && choice.step > 0.0) callbacks.on_update(fb, net, rec);
    }
    state.epochs_completed = epoch + 1;
    if (callbacks.on_epoch) callbacks.on_epoch(net, state);
  }
  result.state = std::move(state);
  return result;
}

}  // namespace structpose
