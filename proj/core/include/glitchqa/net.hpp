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

// Classifier architectures.
//
// Two families share one code path:
//   shuffle   stem conv -> maxpool -> 3 stages of channel-split shuffle units
//             -> 1x1 conv -> global average pool -> linear
//   residual  7x7 stem -> maxpool -> 4 stages of basic blocks -> pool -> linear
//
// The layer sequence is written once against an abstract backend; the autodiff
// tape, the parameter declaration pass and the analytic cost counter are all
// backends of that single walk, so they cannot drift apart.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glitchqa/tensor.hpp"

namespace glitchqa {

enum class Family : std::uint8_t { kShuffle, kResidual };
enum class InitMode : std::uint8_t { kRandom, kExternal };

std::string_view to_string(Family f);
Family parse_family(std::string_view s);

struct ClassifierConfig {
  Family family = Family::kShuffle;
  double width_multiplier = 0.5;  // shuffle: 0.5, 1.0, 1.5, 2.0
  int depth = 18;                 // residual: 18 or 34
  int input_width = 96;
  int input_height = 96;
  int num_classes = 5;
  InitMode init = InitMode::kRandom;
  std::string external_path;  // checkpoint consumed when init == kExternal

  // Custom trunk, used for small test models. When non-empty these replace
  // the width/depth presets. shuffle: channels = {stem, stage..., final},
  // repeats = units per stage. residual: channels = stage widths (stem uses
  // the first), repeats = blocks per stage.
  std::vector<int> stage_channels;
  std::vector<int> stage_repeats;

  bool custom() const { return !stage_channels.empty(); }

  /// Throws ParameterError when the configuration is not buildable.
  void validate() const;

  nlohmann::json to_json() const;
  static ClassifierConfig from_json(const nlohmann::json& j);

  friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

/// Resolved channel plan for a configuration.
struct TrunkPlan {
  std::vector<int> channels;
  std::vector<int> repeats;
};
TrunkPlan trunk_plan(const ClassifierConfig& config);

struct TensorDecl {
  std::string name;
  Shape shape;
  enum class Role { kConvWeight, kNormScale, kNormShift, kNormMean, kNormVar, kFcWeight, kFcBias };
  Role role;
  int fan_in = 0;
};

/// Every tensor the model owns, in canonical order.
std::vector<TensorDecl> declare_parameters(const ClassifierConfig& config);

struct ModelCost {
  std::uint64_t parameters = 0;  // trainable elements (normalization buffers excluded)
  std::uint64_t macs = 0;        // per image, trunk + classifier
  std::uint64_t trunk_macs = 0;  // convolutional layers only
  std::uint64_t classifier_macs = 0;
  int embedding_dim = 0;
};

/// Analytic parameter and multiply-accumulate counts from layer shapes.
ModelCost count_cost(const ClassifierConfig& config);

/// Random init is fan-scaled uniform (He bound sqrt(6 / fan_in) for
/// convolutions, 1 / sqrt(fan_in) for the classifier), norm scale 1, shift 0,
/// running mean 0, running var 1. External init loads a checkpoint and checks
/// every tensor's shape.
Parameters<float> init_model(const ClassifierConfig& config, std::uint64_t init_seed);

template <typename T>
struct ForwardOutput {
  Tensor<T> logits;         // N x C
  Tensor<T> probabilities;  // N x C
  Tensor<T> embedding;      // N x D, pooled penultimate activations
};

enum class Mode : std::uint8_t { kTrain, kEval };

/// Graph node ids produced by building a classifier on a tape.
struct GraphNodes {
  int logits = -1;
  int embedding = -1;
  std::vector<std::pair<std::string, int>> parameters;  // trainable leaves
};

/// Wires the classifier onto `tape`. Train mode uses batch statistics and
/// updates the running buffers in `params`; eval mode reads them.
template <typename T>
GraphNodes build_graph(Tape<T>& tape, Parameters<T>& params, const ClassifierConfig& config,
                       int input, Mode mode);

/// Evaluation-mode forward pass. Batch must be N x 3 x H x W with (H, W) the
/// configured input size.
template <typename T>
ForwardOutput<T> forward(const Parameters<T>& params, const ClassifierConfig& config,
                         const Tensor<T>& batch);

/// Gradients of the trainable tensors after tape.backward, keyed by name.
template <typename T>
Parameters<T> collect_gradients(const Tape<T>& tape, const GraphNodes& nodes,
                                const Parameters<T>& params);

}  // namespace glitchqa
