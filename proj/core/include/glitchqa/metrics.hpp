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

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glitchqa/checkpoint.hpp"
#include "glitchqa/corpus.hpp"

namespace glitchqa {

struct PredictionRecord {
  std::string sample_id;
  std::uint64_t object_id = 0;
  std::uint64_t view_id = 0;
  int true_class = 0;
  int predicted = 0;
  std::vector<double> probabilities;
  std::vector<float> embedding;
  double nll = 0.0;  // -log p(true class), from logits
};

using PredictionSet = std::vector<PredictionRecord>;

enum class Grouping : std::uint8_t { kFive, kThree, kBinary };

std::string_view to_string(Grouping g);
Grouping parse_grouping(std::string_view s);
int group_count(Grouping g);
std::vector<std::string> group_names(Grouping g);

/// five: identity. three: normal | corrupted (stretched, lowres) |
/// missing-texture (missing, placeholder). binary: normal | glitch.
int group_labels(int cls, Grouping g);
inline int group_labels(GlitchClass c, Grouping g) { return group_labels(class_index(c), g); }

struct ConfusionMatrix {
  Grouping grouping = Grouping::kFive;
  std::vector<std::vector<long>> counts;        // [true][predicted]
  std::vector<std::vector<double>> normalized;  // row-normalized; zero rows for unsupported
  std::vector<bool> supported;                  // row has at least one sample

  int size() const { return static_cast<int>(counts.size()); }
  long total() const;
  long trace() const;
};

/// Throws ParameterError on an empty set.
ConfusionMatrix confusion_matrix(const PredictionSet& preds, Grouping g);

/// Exact-match rate after mapping both labels through the grouping.
double accuracy(const PredictionSet& preds, Grouping g);

/// Positives are glitch classes; a glitch predicted as any glitch counts as
/// detected. Undefined ratios are nullopt.
struct BinaryMetrics {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> fpr;
};
BinaryMetrics binary_metrics(const PredictionSet& preds);

struct EvalReport {
  std::size_t samples = 0;
  double accuracy = 0.0;
  double accuracy_three = 0.0;
  double accuracy_binary = 0.0;
  std::array<std::optional<double>, kNumClasses> class_recall;
  std::array<long, kNumClasses> class_support{};
  BinaryMetrics binary;
  ConfusionMatrix five, three, two;

  const ConfusionMatrix& matrix(Grouping g) const;
  nlohmann::json to_json() const;
};

EvalReport make_report(const PredictionSet& preds);

/// Forward pass over one split in manifest order.
PredictionSet predict(const Parameters<float>& params, const ClassifierConfig& config,
                      const CorpusManifest& manifest, Split split, int batch_size = 64,
                      ImageCache* cache = nullptr);

/// Throws ShapeError when checkpoint and corpus image sizes differ.
std::pair<EvalReport, PredictionSet> evaluate(const Checkpoint& checkpoint,
                                              const CorpusManifest& manifest, Split split,
                                              ImageCache* cache = nullptr);

/// Element-wise mean of the normalized matrices; a row stays supported if it
/// was supported in every input.
ConfusionMatrix average_confusion(const std::vector<ConfusionMatrix>& matrices);

nlohmann::json to_json(const ConfusionMatrix& m);
nlohmann::json to_json(const BinaryMetrics& b);
void write_confusion_csv(const ConfusionMatrix& m, const std::filesystem::path& path);
/// Grayscale heatmap, one square cell per entry, white = 1.
void write_confusion_png(const ConfusionMatrix& m, const std::filesystem::path& path, int cell = 32);

void write_predictions(const PredictionSet& preds, const std::filesystem::path& path);
PredictionSet read_predictions(const std::filesystem::path& path);

}  // namespace glitchqa
