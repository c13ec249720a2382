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

// structpose: generate | train | eval | infer | export-embedding
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "structpose/structpose.hpp"

namespace fs = std::filesystem;
using namespace structpose;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SharedFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
  std::string dataset;
  std::string resume;
  std::optional<std::size_t> epochs;
};

RunConfig resolve_config(const SharedFlags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.out = f.out;
  if (!f.checkpoint.empty()) c.checkpoint = f.checkpoint;
  if (!f.dataset.empty()) c.dataset = f.dataset;
  if (!f.resume.empty()) c.resume = f.resume;
  if (f.epochs) c.training.epochs = *f.epochs;
  c.training.seed = c.seed;
  c.generate.seed = c.seed;
  c.apf_fit.seed = derive_seed(c.seed, {1});
  c.apf_refine.seed = derive_seed(c.seed, {2});
  validate_config(c);
  return c;
}

void require(const std::string& value, const char* what) {
  if (value.empty()) throw UsageError(std::string("missing ") + what);
}

fs::path prepare_out(const RunConfig& c) {
  require(c.out, "--out directory");
  fs::create_directories(c.out);
  std::ofstream(fs::path(c.out) / "effective_config.json") << config_to_json(c).dump(2) << '\n';
  return c.out;
}

Dataset open_dataset(const RunConfig& c) {
  require(c.dataset, "--dataset directory");
  if (!fs::is_directory(c.dataset)) throw UsageError("dataset directory does not exist: " + c.dataset);
  return read_dataset(c.dataset);
}

ScoreNetwork open_checkpoint(const RunConfig& c) {
  require(c.checkpoint, "--checkpoint file");
  if (!fs::is_regular_file(c.checkpoint)) throw UsageError("checkpoint does not exist: " + c.checkpoint);
  return load_checkpoint(c.checkpoint);
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

// ---------------------------------------------------------------------------

int cmd_generate(const RunConfig& c) {
  if (c.generate.total() == 0) throw UsageError("generate: requested 0 samples");
  const fs::path out = prepare_out(c);
  const SkeletonTemplate skeleton = c.skeleton.empty() ? SkeletonTemplate::standard() : load_skeleton(c.skeleton);
  const Dataset ds = generate_dataset(c.generate, skeleton);
  write_dataset(ds, out);
  std::printf("generated %zu samples (train %zu, val %zu, test %zu), %zux%zu renders, seed %llu -> %s\n",
              ds.manifest.sample_count, ds.manifest.train.size(), ds.manifest.val.size(), ds.manifest.test.size(),
              ds.manifest.height, ds.manifest.width, static_cast<unsigned long long>(c.seed), out.string().c_str());
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const Dataset ds = open_dataset(cfg);
  const fs::path out = prepare_out(cfg);
  NetworkArchitecture arch = cfg.architecture;
  arch.pose_scale_mm = ds.manifest.pose_scale_mm;
  arch.channels = ds.manifest.channels;
  arch.height = cfg.generate.scene.crop_height;
  arch.width = cfg.generate.scene.crop_width;
  if (arch.height >= ds.manifest.height || arch.width >= ds.manifest.width) {
    throw UsageError("train: crop size must be smaller than the dataset render size");
  }
  arch.validate();

  TrainingState state;
  std::optional<ScoreNetwork> net;
  if (!cfg.resume.empty()) {
    const fs::path dir = cfg.resume;
    std::ifstream in(dir / "training_state.json");
    if (!in) throw UsageError("resume: no training_state.json in " + dir.string());
    state = TrainingState::from_json(nlohmann::json::parse(in));
    net.emplace(load_checkpoint((dir / "checkpoint.bin").string()));
    if (net->architecture() != arch) throw UsageError("resume: checkpoint architecture differs from the configuration");
    if (fs::absolute(dir) != fs::absolute(out)) {
      fs::copy_file(dir / "history.jsonl", out / "history.jsonl", fs::copy_options::overwrite_existing);
    }
    std::printf("resuming after epoch %zu\n", state.epochs_completed);
  } else {
    net.emplace(arch, cfg.seed);
    std::ofstream(out / "history.jsonl", std::ios::trunc);
  }

  AugmentationConfig aug = cfg.augmentation;
  aug.crop_height = arch.height;
  aug.crop_width = arch.width;
  const TrainingData td = make_training_data(ds);

  std::ofstream history(out / "history.jsonl", std::ios::app);
  TrainingCallbacks cb;
  cb.on_batch = [&](const HistoryRecord& r) { history << r.to_json().dump() << '\n'; };
  cb.on_epoch = [&](const ScoreNetwork& n, const TrainingState& s) {
    history.flush();
    std::printf("epoch %zu/%zu done\n", s.epochs_completed, cfg.training.epochs);
    std::fflush(stdout);
    if (s.epochs_completed % cfg.checkpoint_every == 0 || s.epochs_completed == cfg.training.epochs) {
      save_checkpoint(n, (out / "checkpoint.bin").string());
      write_text(out / "training_state.json", s.to_json().dump() + "\n");
    }
  };
  try {
    train(td, *net, cfg.training, aug, state, cb);
  } catch (const TrainingDiverged& e) {
    history.flush();
    std::fprintf(stderr, "training diverged: %s\nlast good checkpoint kept at %s\n", e.what(),
                 (out / "checkpoint.bin").string().c_str());
    return 2;
  }
  std::printf("checkpoint %s (%zu parameters)\n", (out / "checkpoint.bin").string().c_str(), net->parameter_count());
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  const Dataset ds = open_dataset(cfg);
  const ScoreNetwork net = open_checkpoint(cfg);
  const fs::path out = prepare_out(cfg);
  const PoseLibrary lib = make_library(net, ds);
  EvalRequest req;
  req.split = cfg.eval.split;
  req.modes = cfg.eval.modes;
  req.a_grid = cfg.eval.a_grid;
  req.full = cfg.full_inference(cfg.eval.apf_average);
  req.limit = cfg.eval.limit;
  EvalReport rep;
  try {
    rep = evaluate(net, ds, lib, req);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("eval: ") + e.what() + " (use `infer` for poses without evaluation)");
  }
  std::ostringstream table, samples;
  rep.write_table(table);
  rep.write_samples(samples);
  write_text(out / "eval_table.txt", table.str());
  write_text(out / "eval_samples.txt", samples.str());
  write_text(out / "eval_report.json", rep.to_json().dump(2) + "\n");
  std::cout << table.str();
  return 0;
}

int cmd_infer(const RunConfig& cfg) {
  const Dataset ds = open_dataset(cfg);
  const ScoreNetwork net = open_checkpoint(cfg);
  const fs::path out = prepare_out(cfg);
  const PoseLibrary lib = make_library(net, ds);
  const auto ids = limited_split(ds, cfg.infer.split, cfg.infer.limit);
  const std::size_t a = cfg.infer.mode == EvalMode::max ? 1 : cfg.infer.average;
  if (a > lib.size()) throw UsageError("infer: A exceeds the pose library size " + std::to_string(lib.size()));
  const FullInferenceConfig full = cfg.full_inference(a);

  std::ofstream records(out / "inference.jsonl", std::ios::trunc);
  for (std::size_t id : ids) {
    const ImagePatch img = eval_input(net, ds, id);
    const EmbeddingVector fi = embed_image(net, img);
    const auto scores = score_library(net, fi, lib);
    const Pose pose = cfg.infer.mode == EvalMode::apf ? infer_full_from_scores(lib, scores, ds.skeleton, full).pose
                                                      : estimate_from_scores(lib, scores, a).pose;
    nlohmann::json r;
    r["image_id"] = id;
    r["mode"] = to_string(cfg.infer.mode);
    r["A"] = a;
    r["pose_mm"] = pose.flat();
    r["score"] = score_embeddings(fi, embed_pose(net, pose));
    r["mpjpe_mm"] = mpjpe(pose, ds.poses[id]);
    records << r.dump() << '\n';
  }
  std::printf("wrote %zu records to %s\n", ids.size(), (out / "inference.jsonl").string().c_str());
  return 0;
}

int cmd_export(const RunConfig& cfg) {
  const Dataset ds = open_dataset(cfg);
  const ScoreNetwork net = open_checkpoint(cfg);
  const fs::path out = prepare_out(cfg);
  const EmbeddingSets sets = collect_embeddings(net, ds, cfg.export_split);
  for (const auto& [name, m] : {std::pair{"image", &sets.image}, std::pair{"pose", &sets.pose}}) {
    EmbeddingExport e;
    try {
      e = export_embedding(*m);
    } catch (const std::invalid_argument& ex) {
      throw UsageError(ex.what());
    }
    if (e.zero_variance) std::fprintf(stderr, "warning: %s embeddings have zero variance; exporting zeros\n", name);
    std::ofstream f(out / (std::string(name) + "_embedding.txt"));
    write_export_table(f, sets.ids, e);
  }
  std::printf("exported %zu samples to %s\n", sets.ids.size(), out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured max-margin 3D pose estimation"};
  app.require_subcommand(1);
  SharedFlags flags;

  auto add_shared = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "master seed (overrides the config)");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--checkpoint", flags.checkpoint, "network checkpoint file");
  };
  auto* gen = app.add_subcommand("generate", "render a synthetic dataset");
  add_shared(gen);
  auto* tr = app.add_subcommand("train", "train a score network");
  add_shared(tr);
  tr->add_option("--dataset", flags.dataset, "dataset directory");
  tr->add_option("--resume", flags.resume, "resume from a training output directory");
  tr->add_option("--epochs", flags.epochs, "total epochs (overrides the config)");
  auto* ev = app.add_subcommand("eval", "evaluate Max / Avg(A) / APF on a split");
  add_shared(ev);
  ev->add_option("--dataset", flags.dataset, "dataset directory");
  auto* inf = app.add_subcommand("infer", "write per-image pose estimates");
  add_shared(inf);
  inf->add_option("--dataset", flags.dataset, "dataset directory");
  auto* ex = app.add_subcommand("export-embedding", "export 2-D views of image and pose embeddings");
  add_shared(ex);
  ex->add_option("--dataset", flags.dataset, "dataset directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const RunConfig cfg = resolve_config(flags);
    if (gen->parsed()) return cmd_generate(cfg);
    if (tr->parsed()) return cmd_train(cfg);
    if (ev->parsed()) return cmd_eval(cfg);
    if (inf->parsed()) return cmd_infer(cfg);
    if (ex->parsed()) return cmd_export(cfg);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failed: %s\n", e.what());
    return 2;
  }
  return 1;
}
