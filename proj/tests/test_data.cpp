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

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "support.hpp"

namespace {

using namespace sp_test;
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("structpose_data_" + name);
  fs::remove_all(p);
  return p;
}

GenerateConfig small_config(std::size_t train = 12, std::size_t test = 5) {
  GenerateConfig g;
  g.train = train;
  g.val = 2;
  g.test = test;
  g.seed = 99;
  return g;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

// Rewrites the manifest and its checksum entry so only the content check fires.
void replace_manifest(const fs::path& dir, const std::string& text) {
  spit(dir / "manifest.json", text);
  std::istringstream in(slurp(dir / "checksums.txt"));
  std::string digest, name, out;
  while (in >> digest >> name) {
    out += (name == "manifest.json" ? detail::hex_digest(text) : digest) + ' ' + name + '\n';
  }
  spit(dir / "checksums.txt", out);
}

TEST(GeneratePose, ZeroRangesGiveRestPose) {
  const SkeletonTemplate s = SkeletonTemplate::standard();
  std::mt19937_64 rng(1);
  for (int t = 0; t < 5; ++t) {
    const GeneratedPose g = generate_pose(s, SamplerRanges::zero(), rng);
    EXPECT_EQ(g.pose, forward_kinematics(s, JointAngles{}));
  }
}

TEST(GeneratePose, AlwaysValidWithTemplateBoneLengths) {
  const SkeletonTemplate s = SkeletonTemplate::standard();
  std::mt19937_64 rng(2);
  for (int t = 0; t < 500; ++t) {
    const GeneratedPose g = generate_pose(s, SamplerRanges::standard(), rng);
    EXPECT_TRUE(g.pose.valid());
    EXPECT_TRUE(g.angles.valid());
    EXPECT_LT(max_bone_length_error(s, g.pose), 1e-9);
    EXPECT_EQ(g.pose, forward_kinematics(s, g.angles));
  }
}

TEST(GeneratePose, YawHistogramUniform) {
  const SkeletonTemplate s = SkeletonTemplate::standard();
  std::mt19937_64 rng(3);
  const int n = 10000, bins = 20;
  std::vector<int> hist(bins, 0);
  for (int t = 0; t < n; ++t) {
    const double yaw = generate_pose(s, SamplerRanges::standard(), rng).yaw;
    ASSERT_GE(yaw, -std::numbers::pi);
    ASSERT_LE(yaw, std::numbers::pi);
    hist[std::min(bins - 1, static_cast<int>((yaw + std::numbers::pi) / (2 * std::numbers::pi) * bins))]++;
  }
  const double p = 1.0 / bins, mean = n * p, sigma = std::sqrt(n * p * (1 - p));
  for (int b = 0; b < bins; ++b) EXPECT_LT(std::abs(hist[b] - mean), 3 * sigma) << "bin " << b;
}

TEST(SamplerRangesCheck, RejectsOutOfRange) {
  SamplerRanges r = SamplerRanges::standard();
  r.high[2][0] = 4.0;
  EXPECT_THROW(r.validate(), std::invalid_argument);
}

TEST(Render, DeterministicAndInUnitRange) {
  const SkeletonTemplate s = SkeletonTemplate::standard();
  std::mt19937_64 rng(4);
  const Pose p = generate_pose(s, SamplerRanges::standard(), rng).pose;
  const SceneConfig scene;
  const ImagePatch a = render_pose(p, scene), b = render_pose(p, scene);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.pixels.shape(), (Shape{1, 80, 80}));
  double total = 0.0;
  for (double v : a.pixels.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    total += v;
  }
  EXPECT_GT(total, 0.0);
}

TEST(Render, DegeneratePoseRejected) { EXPECT_THROW(render_pose(Pose{}, SceneConfig{}), RenderError); }

TEST(Render, OutOfViewRejected) {
  Pose p = forward_kinematics(SkeletonTemplate::standard(), JointAngles{});
  SceneConfig scene;
  scene.focal_px = 2000.0;
  EXPECT_THROW(render_pose(p, scene), RenderError);
}

TEST(Render, LeftAndRightLimbsDiffer) {
  const SkeletonTemplate s = SkeletonTemplate::standard();
  const ImagePatch img = render_pose(forward_kinematics(s, JointAngles{}), SceneConfig{});
  double lo = 1.0, hi = 0.0;
  for (double v : img.pixels.values()) {
    if (v > 0.0) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  EXPECT_GT(hi, 0.9);   // left side
  EXPECT_LT(lo, 0.5);   // right side, anti-aliased edges
}

// Regenerate with STRUCTPOSE_REGEN_GOLDEN=1.
TEST(Render, RestPoseMatchesGoldenRaster) {
  const fs::path golden = fs::path(STRUCTPOSE_TEST_DATA) / "rest_pose_80x80.txt";
  const ImagePatch img = render_pose(forward_kinematics(SkeletonTemplate::standard(), JointAngles{}), SceneConfig{});
  if (std::getenv("STRUCTPOSE_REGEN_GOLDEN") != nullptr) {
    fs::create_directories(golden.parent_path());
    std::ofstream out(golden);
    char buf[32];
    for (std::size_t y = 0; y < 80; ++y) {
      for (std::size_t x = 0; x < 80; ++x) {
        std::snprintf(buf, sizeof buf, "%s%.9g", x ? " " : "", img.at(0, y, x));
        out << buf;
      }
      out << '\n';
    }
  }
  std::ifstream in(golden);
  ASSERT_TRUE(in) << "missing golden file " << golden;
  // Pixels are float-valued; %.9g round-trips float exactly.
  std::vector<double> values;
  float v;
  while (in >> v) values.push_back(static_cast<double>(v));
  ASSERT_EQ(values.size(), 6400u);
  for (std::size_t i = 0; i < values.size(); ++i) ASSERT_EQ(img.pixels[i], values[i]) << "pixel " << i;
}

TEST(Augment, DisabledIsIdentity) {
  std::mt19937_64 rng(5);
  const ImagePatch img(random_tensor({1, 10, 10}, rng, 0, 1));
  AugmentationConfig aug;
  aug.random_crop = false;
  aug.noise_magnitude = 0.0;
  EXPECT_EQ(augment(img, aug, rng), img);
}

TEST(Augment, CropOfConstantImage) {
  std::mt19937_64 rng(6);
  const ImagePatch img(1, 80, 80, 0.4);
  AugmentationConfig aug;
  aug.noise_magnitude = 0.0;
  for (int t = 0; t < 10; ++t) {
    const ImagePatch out = augment(img, aug, rng);
    EXPECT_EQ(out, ImagePatch(1, 64, 64, 0.4));
  }
}

TEST(Augment, CropOffsetsCoverRange) {
  std::mt19937_64 rng(7);
  ImagePatch img(1, 6, 6);
  for (std::size_t y = 0; y < 6; ++y) {
    for (std::size_t x = 0; x < 6; ++x) img.at(0, y, x) = static_cast<double>(y * 6 + x) / 64.0;
  }
  AugmentationConfig aug;
  aug.crop_height = aug.crop_width = 4;
  aug.noise_magnitude = 0.0;
  std::set<double> corners;
  for (int t = 0; t < 500; ++t) corners.insert(augment(img, aug, rng).at(0, 0, 0));
  EXPECT_EQ(corners.size(), 9u);
}

TEST(Augment, NoiseCovarianceMatches) {
  std::mt19937_64 rng(8);
  Eigen::MatrixXd cov(3, 3);
  cov << 1.0, 0.5, 0.2, 0.5, 2.0, 0.3, 0.2, 0.3, 0.5;
  AugmentationConfig aug;
  aug.random_crop = false;
  aug.covariance = cov;
  aug.noise_magnitude = 0.05;
  const ImagePatch img(3, 320, 320, 0.5);
  const ImagePatch out = augment(img, aug, rng);
  const std::size_t n = 320 * 320;
  Eigen::MatrixXd emp = Eigen::MatrixXd::Zero(3, 3);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Vector3d d;
    for (int c = 0; c < 3; ++c) d[c] = out.pixels[static_cast<std::size_t>(c) * n + i] - 0.5;
    emp += d * d.transpose();
  }
  emp /= static_cast<double>(n);
  const Eigen::MatrixXd expect = aug.noise_magnitude * aug.noise_magnitude * cov;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(emp(r, c), expect(r, c), 0.1 * std::abs(expect(r, c))) << r << "," << c;
  }
}

TEST(Augment, RejectsBadCovariance) {
  std::mt19937_64 rng(9);
  AugmentationConfig aug;
  aug.covariance = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(augment(ImagePatch(1, 80, 80), aug, rng), std::invalid_argument);
  aug.covariance = -Eigen::MatrixXd::Identity(1, 1);
  EXPECT_THROW(augment(ImagePatch(1, 80, 80), aug, rng), std::invalid_argument);
}

TEST(Dataset, GenerationIsPureFunctionOfSeed) {
  const Dataset a = generate_dataset(small_config()), b = generate_dataset(small_config());
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.poses, b.poses);
  EXPECT_EQ(a.angles, b.angles);
  GenerateConfig other = small_config();
  other.seed = 100;
  EXPECT_NE(generate_dataset(other).images, a.images);
}

TEST(Dataset, InvariantSweep) {
  const Dataset ds = generate_dataset(small_config());
  const SceneConfig scene;
  ASSERT_EQ(ds.poses.size(), ds.manifest.sample_count);
  for (std::size_t i = 0; i < ds.poses.size(); ++i) {
    EXPECT_EQ(ds.poses[i], forward_kinematics(ds.skeleton, ds.angles[i]));
    EXPECT_EQ(ds.image(i), render_pose(ds.poses[i], scene, ds.skeleton));
  }
  EXPECT_EQ(ds.manifest.train.size(), 12u);
  EXPECT_EQ(ds.manifest.val.size(), 2u);
  EXPECT_EQ(ds.manifest.test.size(), 5u);
}

TEST(Dataset, ZeroSamplesRejected) {
  GenerateConfig g;
  g.train = g.val = g.test = 0;
  EXPECT_THROW(generate_dataset(g), std::invalid_argument);
}

TEST(Dataset, WriteReadRoundTripBitwise) {
  const fs::path dir = scratch("roundtrip");
  const Dataset ds = generate_dataset(small_config());
  write_dataset(ds, dir);
  const Dataset back = read_dataset(dir);
  EXPECT_EQ(back.images, ds.images);
  EXPECT_EQ(back.poses, ds.poses);
  EXPECT_EQ(back.angles, ds.angles);
  EXPECT_EQ(back.manifest.train, ds.manifest.train);
  EXPECT_EQ(back.manifest.test, ds.manifest.test);
  EXPECT_EQ(back.manifest.seed, ds.manifest.seed);
  // Writing the read-back dataset reproduces the same bytes.
  const fs::path dir2 = scratch("roundtrip2");
  write_dataset(back, dir2);
  for (const char* f : {"manifest.json", "poses.txt", "images.bin", "checksums.txt", "skeleton.json"}) {
    EXPECT_EQ(slurp(dir / f), slurp(dir2 / f)) << f;
  }
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST(Dataset, TruncatedBlobFailsChecksum) {
  const fs::path dir = scratch("truncated");
  write_dataset(generate_dataset(small_config()), dir);
  std::string blob = slurp(dir / "images.bin");
  blob.resize(blob.size() - 100);
  spit(dir / "images.bin", blob);
  try {
    read_dataset(dir);
    FAIL() << "expected failure";
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.kind(), DatasetError::Kind::checksum_mismatch) << e.what();
  }
  fs::remove_all(dir);
}

TEST(Dataset, VersionMismatchReported) {
  const fs::path dir = scratch("version");
  write_dataset(generate_dataset(small_config()), dir);
  auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
  j["format_version"] = 7;
  replace_manifest(dir, j.dump(2));
  try {
    read_dataset(dir);
    FAIL() << "expected failure";
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.kind(), DatasetError::Kind::version_mismatch) << e.what();
  }
  fs::remove_all(dir);
}

TEST(Dataset, CorruptedManifestFuzz) {
  const fs::path dir = scratch("fuzz");
  write_dataset(generate_dataset(small_config()), dir);
  const auto base = nlohmann::json::parse(slurp(dir / "manifest.json"));
  const std::string manifest_ok = slurp(dir / "manifest.json");
  const std::string sums_ok = slurp(dir / "checksums.txt");
  std::vector<nlohmann::json> variants;
  for (long delta : {-5L, -1L, 1L, 3L, 100L}) {
    auto j = base;
    j["sample_count"] = base["sample_count"].get<long>() + delta;
    variants.push_back(j);
  }
  {
    auto j = base;
    j["image"]["height"] = 81;
    variants.push_back(j);
  }
  {
    auto j = base;
    j["splits"]["test"].push_back(1000);
    variants.push_back(j);
  }
  {
    auto j = base;
    j["splits"]["test"].push_back(0);
    variants.push_back(j);
  }
  {
    auto j = base;
    j["extra"] = 1;
    variants.push_back(j);
  }
  {
    auto j = base;
    j.erase("seed");
    variants.push_back(j);
  }
  {
    auto j = base;
    j["sample_count"] = "many";
    variants.push_back(j);
  }
  std::mt19937_64 rng(10);
  for (int t = 0; t < 20; ++t) {
    auto j = base;
    j["sample_count"] = uniform_int(rng, 0, 40) + (t % 2 ? 20 : 0);
    if (j["sample_count"] == base["sample_count"]) j["sample_count"] = 0;
    variants.push_back(j);
  }
  for (const auto& v : variants) {
    replace_manifest(dir, v.dump(2));
    EXPECT_THROW(read_dataset(dir), DatasetError) << v.dump();
  }
  spit(dir / "manifest.json", manifest_ok);
  spit(dir / "checksums.txt", sums_ok);
  EXPECT_NO_THROW(read_dataset(dir));
  fs::remove_all(dir);
}

TEST(Dataset, PoseRowCorruptionDetected) {
  const fs::path dir = scratch("rows");
  write_dataset(generate_dataset(small_config()), dir);
  std::string rows = slurp(dir / "poses.txt");
  rows[rows.size() / 2] = 'x';
  spit(dir / "poses.txt", rows);
  EXPECT_THROW(read_dataset(dir), DatasetError);
  fs::remove_all(dir);
}

TEST(Dataset, MissingDirectory) { EXPECT_THROW(read_dataset(scratch("absent")), DatasetError); }

}  // namespace
