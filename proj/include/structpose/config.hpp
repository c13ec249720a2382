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

// Run configuration for the command-line tool. Every section is optional and
// every key inside a section is optional, but unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "structpose/data.hpp"
#include "structpose/dataset.hpp"
#include "structpose/inference.hpp"
#include "structpose/network.hpp"
#include "structpose/report.hpp"
#include "structpose/training.hpp"

namespace structpose {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalSettings {
  std::string split = "test";
  std::vector<EvalMode> modes = {EvalMode::max, EvalMode::avg, EvalMode::apf};
  std::vector<std::size_t> a_grid = {1, 5, 20, 50, 100};
  std::size_t apf_average = 20;
  std::size_t limit = 0;  // evaluate only the first `limit` samples; 0 = all
};

struct InferSettings {
  std::string split = "test";
  EvalMode mode = EvalMode::avg;
  std::size_t average = 20;
  std::size_t limit = 0;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string dataset;     // dataset directory
  std::string checkpoint;  // checkpoint file
  std::string out;         // output directory
  std::string resume;      // training output directory to resume from

  GenerateConfig generate;
  std::string skeleton;  // optional skeleton file for generation
  double sampler_range_scale = 1.0;  // multiplies the standard joint-angle half widths
  AugmentationConfig augmentation;
  NetworkArchitecture architecture;
  TrainingConfig training;
  std::size_t checkpoint_every = 1;  // epochs
  APFConfig apf_fit{60, 6, 0.5, 0.7, 0.5, 0.05, 1};
  APFConfig apf_refine;
  EvalSettings eval;
  InferSettings infer;
  std::string export_split = "test";

  RunConfig() {
    training.batch_size = 32;
    training.candidate_count = 200;
  }

  FullInferenceConfig full_inference(std::size_t average) const {
    FullInferenceConfig f;
    f.average = average;
    f.fit = apf_fit;
    f.refine = apf_refine;
    return f;
  }
};

namespace detail {

// Checks that `j` is an object whose keys all belong to `keys`.
inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw ConfigError("config: unknown key '" + where + "." + key + "'");
  }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& dst, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: '" + where + "." + key + "' has the wrong type");
  }
}

inline void read_apf(const nlohmann::json& j, APFConfig& a, const std::string& where) {
  check_keys(j, {"particles", "layers", "initial_noise", "noise_decay", "survival", "beta0"}, where);
  read(j, "particles", a.particles, where);
  read(j, "layers", a.layers, where);
  read(j, "initial_noise", a.initial_noise, where);
  read(j, "noise_decay", a.noise_decay, where);
  read(j, "survival", a.survival, where);
  read(j, "beta0", a.beta0, where);
}

inline nlohmann::json apf_json(const APFConfig& a) {
  return {{"particles", a.particles}, {"layers", a.layers},     {"initial_noise", a.initial_noise},
          {"noise_decay", a.noise_decay}, {"survival", a.survival}, {"beta0", a.beta0}};
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::read;
  RunConfig c;
  check_keys(j, {"seed", "dataset", "checkpoint", "out", "resume", "generate", "scene", "sampler", "augmentation",
                 "architecture", "training", "apf", "eval", "infer", "export"},
             "");
  read(j, "seed", c.seed, "");
  read(j, "dataset", c.dataset, "");
  read(j, "checkpoint", c.checkpoint, "");
  read(j, "out", c.out, "");
  read(j, "resume", c.resume, "");

  if (j.contains("generate")) {
    const auto& g = j["generate"];
    check_keys(g, {"train", "val", "test", "pose_scale_mm", "max_attempts", "skeleton"}, "generate");
    read(g, "train", c.generate.train, "generate");
    read(g, "val", c.generate.val, "generate");
    read(g, "test", c.generate.test, "generate");
    read(g, "pose_scale_mm", c.generate.pose_scale_mm, "generate");
    read(g, "max_attempts", c.generate.max_attempts, "generate");
    read(g, "skeleton", c.skeleton, "generate");
  }
  if (j.contains("scene")) {
    const auto& s = j["scene"];
    auto& sc = c.generate.scene;
    check_keys(s,
               {"render_size", "crop_size", "projection", "focal_px", "camera_distance_mm", "ortho_px_per_mm",
                "look_at_z_mm", "stroke_width_px", "background", "center_intensity", "left_intensity",
                "right_intensity", "depth_shading"},
               "scene");
    if (s.contains("render_size")) {
      std::size_t n = 0;
      read(s, "render_size", n, "scene");
      sc.render_height = sc.render_width = n;
    }
    if (s.contains("crop_size")) {
      std::size_t n = 0;
      read(s, "crop_size", n, "scene");
      sc.crop_height = sc.crop_width = n;
    }
    if (s.contains("projection")) {
      std::string p;
      read(s, "projection", p, "scene");
      if (p == "perspective") sc.projection = Projection::perspective;
      else if (p == "orthographic") sc.projection = Projection::orthographic;
      else throw ConfigError("config: scene.projection must be 'perspective' or 'orthographic'");
    }
    read(s, "focal_px", sc.focal_px, "scene");
    read(s, "camera_distance_mm", sc.camera_distance_mm, "scene");
    read(s, "ortho_px_per_mm", sc.ortho_px_per_mm, "scene");
    read(s, "look_at_z_mm", sc.look_at_z_mm, "scene");
    read(s, "stroke_width_px", sc.stroke_width_px, "scene");
    read(s, "background", sc.background, "scene");
    read(s, "center_intensity", sc.center_intensity, "scene");
    read(s, "left_intensity", sc.left_intensity, "scene");
    read(s, "right_intensity", sc.right_intensity, "scene");
    read(s, "depth_shading", sc.depth_shading, "scene");
  }
  if (j.contains("sampler")) {
    const auto& s = j["sampler"];
    check_keys(s, {"yaw_low", "yaw_high", "range_scale"}, "sampler");
    read(s, "range_scale", c.sampler_range_scale, "sampler");
    if (!(c.sampler_range_scale >= 0.0)) throw ConfigError("config: sampler.range_scale must be >= 0");
    auto& r = c.generate.ranges;
    const SamplerRanges standard = SamplerRanges::standard();
    for (std::size_t b = 0; b < kBoneCount; ++b) {
      r.low[b] = standard.low[b] * c.sampler_range_scale;
      r.high[b] = standard.high[b] * c.sampler_range_scale;
    }
    read(s, "yaw_low", r.yaw_low, "sampler");
    read(s, "yaw_high", r.yaw_high, "sampler");
  }
  if (j.contains("augmentation")) {
    const auto& a = j["augmentation"];
    check_keys(a, {"random_crop", "noise_magnitude", "covariance"}, "augmentation");
    read(a, "random_crop", c.augmentation.random_crop, "augmentation");
    read(a, "noise_magnitude", c.augmentation.noise_magnitude, "augmentation");
    if (a.contains("covariance")) {
      std::vector<std::vector<double>> rows;
      read(a, "covariance", rows, "augmentation");
      const auto n = static_cast<Eigen::Index>(rows.size());
      Eigen::MatrixXd cov(n, n);
      for (Eigen::Index r = 0; r < n; ++r) {
        if (rows[static_cast<std::size_t>(r)].size() != rows.size()) {
          throw ConfigError("config: augmentation.covariance must be square");
        }
        for (Eigen::Index k = 0; k < n; ++k) cov(r, k) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)];
      }
      c.augmentation.covariance = cov;
    }
  }
  if (j.contains("architecture")) {
    const auto& a = j["architecture"];
    auto& ar = c.architecture;
    check_keys(a, {"stages", "fc1", "fc2", "fc3", "embedding_dim", "fc5", "pose_embedding", "dropout_rate"},
               "architecture");
    if (a.contains("stages")) {
      const auto& st = a["stages"];
      if (!st.is_array() || st.size() != 3) throw ConfigError("config: architecture.stages must list 3 stages");
      for (std::size_t i = 0; i < 3; ++i) {
        const std::string w = "architecture.stages[" + std::to_string(i) + "]";
        check_keys(st[i], {"kernel", "filters", "pool"}, w);
        read(st[i], "kernel", ar.stages[i].kernel, w);
        read(st[i], "filters", ar.stages[i].filters, w);
        read(st[i], "pool", ar.stages[i].pool, w);
      }
    }
    read(a, "fc1", ar.fc1, "architecture");
    read(a, "fc2", ar.fc2, "architecture");
    read(a, "fc3", ar.fc3, "architecture");
    read(a, "embedding_dim", ar.embedding_dim, "architecture");
    read(a, "fc5", ar.fc5, "architecture");
    read(a, "dropout_rate", ar.dropout_rate, "architecture");
    if (a.contains("pose_embedding")) {
      std::string e;
      read(a, "pose_embedding", e, "architecture");
      try {
        ar.pose_embedding = pose_embedding_from_string(e);
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("config: ") + ex.what());
      }
    }
  }
  if (j.contains("training")) {
    const auto& t = j["training"];
    auto& tc = c.training;
    check_keys(t,
               {"batch_size", "candidate_count", "frequent_violators", "aux_weight", "reg_weight", "epochs",
                "step_low", "step_high", "steps_per_decade", "margin_scale", "checkpoint_every"},
               "training");
    read(t, "batch_size", tc.batch_size, "training");
    read(t, "candidate_count", tc.candidate_count, "training");
    read(t, "frequent_violators", tc.frequent_violators, "training");
    read(t, "aux_weight", tc.aux_weight, "training");
    read(t, "reg_weight", tc.reg_weight, "training");
    read(t, "epochs", tc.epochs, "training");
    read(t, "step_low", tc.step_low, "training");
    read(t, "step_high", tc.step_high, "training");
    read(t, "steps_per_decade", tc.steps_per_decade, "training");
    read(t, "margin_scale", tc.margin_scale, "training");
    read(t, "checkpoint_every", c.checkpoint_every, "training");
  }
  if (j.contains("apf")) {
    const auto& a = j["apf"];
    check_keys(a, {"fit", "refine"}, "apf");
    if (a.contains("fit")) detail::read_apf(a["fit"], c.apf_fit, "apf.fit");
    if (a.contains("refine")) detail::read_apf(a["refine"], c.apf_refine, "apf.refine");
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    check_keys(e, {"split", "modes", "a_grid", "apf_average", "limit"}, "eval");
    read(e, "split", c.eval.split, "eval");
    read(e, "a_grid", c.eval.a_grid, "eval");
    read(e, "apf_average", c.eval.apf_average, "eval");
    read(e, "limit", c.eval.limit, "eval");
    if (e.contains("modes")) {
      std::vector<std::string> names;
      read(e, "modes", names, "eval");
      c.eval.modes.clear();
      try {
        for (const auto& n : names) c.eval.modes.push_back(eval_mode_from_string(n));
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("config: eval.modes: ") + ex.what());
      }
    }
  }
  if (j.contains("infer")) {
    const auto& e = j["infer"];
    check_keys(e, {"split", "mode", "A", "limit"}, "infer");
    read(e, "split", c.infer.split, "infer");
    read(e, "A", c.infer.average, "infer");
    read(e, "limit", c.infer.limit, "infer");
    if (e.contains("mode")) {
      std::string m;
      read(e, "mode", m, "infer");
      try {
        c.infer.mode = eval_mode_from_string(m);
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("config: infer.mode: ") + ex.what());
      }
    }
  }
  if (j.contains("export")) {
    const auto& e = j["export"];
    check_keys(e, {"split"}, "export");
    read(e, "split", c.export_split, "export");
  }
  return c;
}

// Structural checks that do not depend on the command being run.
inline void validate_config(const RunConfig& c) {
  try {
    c.generate.scene.validate();
    c.generate.ranges.validate();
    c.augmentation.validate(c.architecture.channels);
    c.architecture.validate();
    c.training.validate();
    c.apf_fit.validate();
    c.apf_refine.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.checkpoint_every == 0) throw ConfigError("config: training.checkpoint_every must be >= 1");
  if (c.eval.modes.empty()) throw ConfigError("config: eval.modes must not be empty");
  for (std::size_t a : c.eval.a_grid) {
    if (a == 0) throw ConfigError("config: eval.a_grid entries must be >= 1");
  }
  if (c.eval.apf_average == 0 || c.infer.average == 0) throw ConfigError("config: A must be >= 1");
  auto split_ok = [](const std::string& s) { return s == "train" || s == "val" || s == "test"; };
  if (!split_ok(c.eval.split) || !split_ok(c.infer.split) || !split_ok(c.export_split)) {
    throw ConfigError("config: split must be train, val or test");
  }
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

// The effective configuration, in the same schema config_from_json reads.
inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["dataset"] = c.dataset;
  j["checkpoint"] = c.checkpoint;
  j["out"] = c.out;
  j["resume"] = c.resume;
  const auto& g = c.generate;
  j["generate"] = {{"train", g.train},
                   {"val", g.val},
                   {"test", g.test},
                   {"pose_scale_mm", g.pose_scale_mm},
                   {"max_attempts", g.max_attempts},
                   {"skeleton", c.skeleton}};
  const auto& s = g.scene;
  j["scene"] = {{"render_size", s.render_height},
                {"crop_size", s.crop_height},
                {"projection", s.projection == Projection::perspective ? "perspective" : "orthographic"},
                {"focal_px", s.focal_px},
                {"camera_distance_mm", s.camera_distance_mm},
                {"ortho_px_per_mm", s.ortho_px_per_mm},
                {"look_at_z_mm", s.look_at_z_mm},
                {"stroke_width_px", s.stroke_width_px},
                {"background", s.background},
                {"center_intensity", s.center_intensity},
                {"left_intensity", s.left_intensity},
                {"right_intensity", s.right_intensity},
                {"depth_shading", s.depth_shading}};
  j["sampler"] = {{"yaw_low", g.ranges.yaw_low}, {"yaw_high", g.ranges.yaw_high}, {"range_scale", c.sampler_range_scale}};
  std::vector<std::vector<double>> cov;
  for (Eigen::Index r = 0; r < c.augmentation.covariance.rows(); ++r) {
    std::vector<double> row;
    for (Eigen::Index k = 0; k < c.augmentation.covariance.cols(); ++k) row.push_back(c.augmentation.covariance(r, k));
    cov.push_back(row);
  }
  j["augmentation"] = {{"random_crop", c.augmentation.random_crop},
                       {"noise_magnitude", c.augmentation.noise_magnitude},
                       {"covariance", cov}};
  const auto& a = c.architecture;
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& st : a.stages) stages.push_back({{"kernel", st.kernel}, {"filters", st.filters}, {"pool", st.pool}});
  j["architecture"] = {{"stages", stages},
                       {"fc1", a.fc1},
                       {"fc2", a.fc2},
                       {"fc3", a.fc3},
                       {"embedding_dim", a.embedding_dim},
                       {"fc5", a.fc5},
                       {"pose_embedding", to_string(a.pose_embedding)},
                       {"dropout_rate", a.dropout_rate}};
  const auto& t = c.training;
  j["training"] = {{"batch_size", t.batch_size},
                   {"candidate_count", t.candidate_count},
                   {"frequent_violators", t.frequent_violators},
                   {"aux_weight", t.aux_weight},
                   {"reg_weight", t.reg_weight},
                   {"epochs", t.epochs},
                   {"step_low", t.step_low},
                   {"step_high", t.step_high},
                   {"steps_per_decade", t.steps_per_decade},
                   {"margin_scale", t.margin_scale},
                   {"checkpoint_every", c.checkpoint_every}};
  j["apf"] = {{"fit", detail::apf_json(c.apf_fit)}, {"refine", detail::apf_json(c.apf_refine)}};
  std::vector<std::string> modes;
  for (auto m : c.eval.modes) modes.push_back(to_string(m));
  j["eval"] = {{"split", c.eval.split},
               {"modes", modes},
               {"a_grid", c.eval.a_grid},
               {"apf_average", c.eval.apf_average},
               {"limit", c.eval.limit}};
  j["infer"] = {{"split", c.infer.split}, {"mode", to_string(c.infer.mode)}, {"A", c.infer.average}, {"limit", c.infer.limit}};
  j["export"] = {{"split", c.export_split}};
  return j;
}

}  // namespace structpose
