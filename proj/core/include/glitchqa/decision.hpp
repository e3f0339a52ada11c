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

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glitchqa/metrics.hpp"

namespace glitchqa {

enum class Verdict : std::uint8_t { kFlagGlitch, kPass, kAbstain };

std::string_view to_string(Verdict v);

/// Isotropic Gaussian per class over penultimate embeddings.
struct ConfidenceModel {
  int dim = 0;
  std::vector<std::vector<double>> mean;  // [class][dim]
  std::vector<double> sigma;              // [class], floored at kSigmaFloor

  static constexpr double kSigmaFloor = 1e-6;

  nlohmann::json to_json() const;
  static ConfidenceModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static ConfidenceModel load(const std::filesystem::path& path);
};

/// Fits one Gaussian per true class: mean embedding and RMS distance to it.
/// Throws ParameterError naming any class with fewer than two samples.
ConfidenceModel fit_confidence(const PredictionSet& train, int num_classes = kNumClasses);

/// exp(-|z - mu_c|^2 / (2 sigma_c^2)).
double confidence_score(const ConfidenceModel& model, std::span<const float> embedding, int cls);

/// Arithmetic mean of k probability rows.
std::vector<double> aggregate_probs(const std::vector<std::vector<double>>& rows);

/// Lowest index among the maxima.
int argmax(const std::vector<double>& v);

struct ObjectDecision {
  std::uint64_t object_id = 0;
  std::vector<double> probabilities;
  int predicted = 0;
  std::optional<double> confidence;
  int views_used = 0;
  Verdict verdict = Verdict::kPass;
  int true_class = -1;  // -1 when unknown
};

nlohmann::json to_json(const ObjectDecision& d);

/// Aggregates the first k views of one object by ascending view_id. Confidence
/// is the mean per-view score under the aggregated class when a model is given.
ObjectDecision classify_object(const std::vector<PredictionRecord>& views, int k,
                               const ConfidenceModel* confidence = nullptr);

struct ViewFrame {
  std::uint64_t object_id = 0;
  std::uint64_t view_id = 0;
  Image image;
};

/// Runs the network on the selected frames, then aggregates as above.
ObjectDecision classify_object(const Checkpoint& checkpoint, const std::vector<ViewFrame>& frames,
                               int k, const ConfidenceModel* confidence = nullptr);

/// One decision per prediction (single-view objects).
std::vector<ObjectDecision> per_view_decisions(const PredictionSet& preds,
                                               const ConfidenceModel* confidence);

/// Glitch verdicts with confidence below tau become abstentions. Decisions
/// without a confidence are left alone. tau must lie in [0, 1].
std::vector<ObjectDecision> filter_predictions(const std::vector<ObjectDecision>& decisions,
                                               double tau);

/// Binary metrics over decisions with known true class; abstentions count as
/// not flagged.
BinaryMetrics decision_binary_metrics(const std::vector<ObjectDecision>& decisions);

struct AggregateRow {
  int k = 0;
  long decisions = 0;
  std::optional<double> accuracy;  // nullopt when no group has k views
};

/// Groups predictions by (object, true class), orders each group by view_id
/// and scores disjoint consecutive chunks of k views.
std::vector<AggregateRow> aggregate_sweep(const PredictionSet& preds, const std::vector<int>& k_list);

/// Renders and classifies views [view_begin, view_end) of the given objects
/// with the corpus' synthesis settings. The class of a view is view_id mod 5.
PredictionSet predict_synthetic_views(const Checkpoint& checkpoint, const nlohmann::json& corpus_config,
                                      const std::vector<std::uint64_t>& object_ids,
                                      std::uint64_t view_begin, std::uint64_t view_end);

void write_decisions(const std::vector<ObjectDecision>& decisions, const std::filesystem::path& path);

}  // namespace glitchqa
