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

// Per-mode MPJPE summaries and the comparison table written by `eval`.

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace structpose {

enum class EvalMode { max, avg, apf };

inline std::string to_string(EvalMode m) {
  switch (m) {
    case EvalMode::max: return "max";
    case EvalMode::avg: return "avg";
    case EvalMode::apf: return "apf";
  }
  return "?";
}

inline EvalMode eval_mode_from_string(const std::string& s) {
  if (s == "max") return EvalMode::max;
  if (s == "avg") return EvalMode::avg;
  if (s == "apf") return EvalMode::apf;
  throw std::invalid_argument("unknown eval mode '" + s + "' (expected max, avg or apf)");
}

struct ModeSummary {
  EvalMode mode = EvalMode::max;
  std::size_t average = 1;          // A; 1 for max
  std::vector<double> per_sample;   // mm, in sample order
  double mean = 0.0;
  double stddev = 0.0;              // population standard deviation

  std::string label() const {
    switch (mode) {
      case EvalMode::max: return "Max";
      case EvalMode::avg: return "Avg(" + std::to_string(average) + ")";
      case EvalMode::apf: return "Avg(" + std::to_string(average) + ")-APF";
    }
    return "?";
  }
};

inline ModeSummary summarize(EvalMode mode, std::size_t average, std::vector<double> errors) {
  if (errors.empty()) throw std::invalid_argument("summarize: no samples");
  ModeSummary s;
  s.mode = mode;
  s.average = average;
  s.per_sample = std::move(errors);
  double sum = 0.0;
  for (double e : s.per_sample) sum += e;
  s.mean = sum / static_cast<double>(s.per_sample.size());
  double sq = 0.0;
  for (double e : s.per_sample) sq += (e - s.mean) * (e - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(s.per_sample.size()));
  return s;
}

struct EvalReport {
  std::string split;
  std::vector<std::size_t> sample_ids;
  std::vector<ModeSummary> modes;  // the Max row comes first

  void validate() const {
    if (modes.empty() || modes.front().mode != EvalMode::max) {
      throw std::logic_error("eval report: the Max row must be present and first");
    }
    for (const auto& m : modes) {
      if (m.per_sample.size() != sample_ids.size()) throw std::logic_error("eval report: row length mismatch");
    }
  }

  const ModeSummary& max_row() const {
    validate();
    return modes.front();
  }

  // Comparison table: mode, mean, std, delta against Max.
  void write_table(std::ostream& os) const {
    validate();
    const double base = modes.front().mean;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-18s %12s %12s %12s\n", "mode", "mpjpe_mm", "std_mm", "vs_max_mm");
    os << buf;
    for (const auto& m : modes) {
      std::snprintf(buf, sizeof buf, "%-18s %12.3f %12.3f %+12.3f\n", m.label().c_str(), m.mean, m.stddev,
                    m.mean - base);
      os << buf;
    }
  }

  // One row per sample, one column per mode.
  void write_samples(std::ostream& os) const {
    validate();
    os << "# id";
    for (const auto& m : modes) os << ' ' << m.label();
    os << '\n';
    char buf[40];
    for (std::size_t i = 0; i < sample_ids.size(); ++i) {
      os << sample_ids[i];
      for (const auto& m : modes) {
        std::snprintf(buf, sizeof buf, " %.17g", m.per_sample[i]);
        os << buf;
      }
      os << '\n';
    }
  }

  nlohmann::json to_json() const {
    validate();
    nlohmann::json j;
    j["split"] = split;
    j["samples"] = sample_ids.size();
    j["modes"] = nlohmann::json::array();
    for (const auto& m : modes) {
      j["modes"].push_back(
          {{"label", m.label()}, {"mode", to_string(m.mode)}, {"A", m.average}, {"mean_mm", m.mean}, {"std_mm", m.stddev}});
    }
    return j;
  }
};

}  // namespace structpose
