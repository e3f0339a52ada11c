// Copyright 2026 The GlitchQA Authors. All Rights Reserved.
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

// Library behind the glitchqa command line. Each subcommand is a function so
// tests can drive it without spawning processes.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glitchqa/decision.hpp"

namespace glitchqa::app {

inline constexpr int kExitClean = 0;
inline constexpr int kExitFlagged = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

inline constexpr std::string_view kResizePolicy = "center-crop+bilinear";

struct DetectRecord {
  std::string path;
  std::optional<std::string> error;
  int predicted = 0;
  std::vector<double> probabilities;
  std::optional<double> confidence;
  Verdict verdict = Verdict::kPass;
  bool resized = false;
};

struct DetectReport {
  std::vector<DetectRecord> records;
  std::array<long, kNumClasses> class_counts{};
  long errors = 0;
  double wall_seconds = 0.0;
  double images_per_second = 0.0;

  bool any_flagged() const;
  nlohmann::json summary_json() const;
};

nlohmann::json to_json(const DetectRecord& r);

/// Expands directories (sorted *.png entries) and keeps file arguments in
/// order.
std::vector<std::filesystem::path> expand_inputs(const std::vector<std::filesystem::path>& inputs);

/// Classifies every input; unreadable files are recorded and skipped.
DetectReport run_detect(const Checkpoint& checkpoint, const std::vector<std::filesystem::path>& inputs,
                        const ConfidenceModel* confidence = nullptr, double tau = 0.0);

void write_detect_report(const DetectReport& report, const std::filesystem::path& path);

struct BenchResult {
  int iterations = 0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double images_per_second = 0.0;
  ModelCost cost;

  nlohmann::json to_json() const;
};

/// Single-image forward latency on seeded random input. iterations >= 10.
BenchResult run_bench(const Parameters<float>& params, const ClassifierConfig& config, int iterations,
                      int warmup = 3, std::uint64_t seed = 0);

/// Parses "WxH".
std::pair<int, int> parse_size(const std::string& s);

/// Entry point used by main(); returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace glitchqa::app
