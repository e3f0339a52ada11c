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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glitchqa/checkpoint.hpp"
#include "glitchqa/corpus.hpp"
#include "glitchqa/metrics.hpp"

namespace glitchqa {

/// Mean of -log softmax(logits)[label] via log-sum-exp. Throws Error on
/// non-finite logits and ParameterError on out-of-range labels.
template <typename T>
double cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels);

/// Mean of -log p[label] for rows that are already distributions.
template <typename T>
double cross_entropy_from_probs(const Tensor<T>& probs, const std::vector<int>& labels);

template <typename T>
struct LossAndGrad {
  double loss = 0.0;
  Tensor<T> grad;  // d loss / d logits = (softmax - onehot) / N
};

template <typename T>
LossAndGrad<T> cross_entropy_with_grad(const Tensor<T>& logits, const std::vector<int>& labels);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  NamedTensors<T> m;
  NamedTensors<T> v;
};

/// One bias-corrected Adam update of every tensor named in `grads`; t >= 1.
template <typename T>
void adam_step(Parameters<T>& params, const Parameters<T>& grads, AdamState<T>& state, long t,
               const AdamConfig& config);

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 32;
  int epochs = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t init_seed = 1;
  std::uint64_t shuffle_seed = 2;
  int checkpoint_every = 0;              // epochs; 0 disables intermediate saves
  std::filesystem::path checkpoint_path;  // empty: no files written during training
  int confusion_window = 20;              // trailing epochs averaged into the val confusion
  bool cache_images = true;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
  nlohmann::json to_json() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  void write_csv(const std::filesystem::path& path) const;
  std::vector<double> series(const std::string& metric) const;
};

struct WindowStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n - 1); 0 for a single value
};

/// metric: train_loss, train_accuracy, val_loss or val_accuracy.
WindowStats summarize_last_epochs(const TrainLog& log, int window, const std::string& metric);

nlohmann::json train_summary(const TrainLog& log, int window);

struct TrainResult {
  Checkpoint checkpoint;
  TrainLog log;
  std::optional<ConfusionMatrix> val_confusion;  // averaged over the trailing window
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam on cross-entropy over the train split, validation each epoch with
/// running statistics. A non-finite loss aborts with context; files written at
/// earlier cadence points are left in place.
TrainResult train(const CorpusManifest& manifest, const ClassifierConfig& model,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// Hyper-parameter grids, one training per value, reported as tables.
struct GridRow {
  std::string value;
  WindowStats train_accuracy;
  WindowStats val_accuracy;
};

std::vector<GridRow> lr_grid(const CorpusManifest& manifest, const ClassifierConfig& model,
                             const TrainConfig& base, const std::vector<double>& rates, int window);
std::vector<GridRow> batch_grid(const CorpusManifest& manifest, const ClassifierConfig& model,
                                const TrainConfig& base, const std::vector<int>& sizes, int window);

/// Markdown table with a header row naming the swept parameter and one
/// column per value; cells read "mean (std)" to three decimals.
std::string render_grid_table(const std::string& parameter, const std::vector<GridRow>& rows);

}  // namespace glitchqa
