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

// Tiny model configs and a central-difference gradient check.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "glitchqa/net.hpp"
#include "glitchqa/trainer.hpp"

namespace glitchqa::testing {

inline ClassifierConfig tiny_shuffle() {
  ClassifierConfig c;
  c.family = Family::kShuffle;
  c.input_width = 16;
  c.input_height = 16;
  c.stage_channels = {4, 8, 12};
  c.stage_repeats = {2};
  return c;
}

inline ClassifierConfig tiny_residual() {
  ClassifierConfig c;
  c.family = Family::kResidual;
  c.input_width = 16;
  c.input_height = 16;
  c.stage_channels = {4, 6};
  c.stage_repeats = {1, 1};
  return c;
}

inline Tensor<double> random_batch(int n, int h, int w, std::uint64_t seed) {
  Tensor<double> x({n, 3, h, w});
  SeededRng rng(seed);
  for (double& v : x.data) v = rng.uniform();
  return x;
}

inline double train_mode_loss(Parameters<double> params, const ClassifierConfig& c, const Tensor<double>& x,
                       const std::vector<int>& labels) {
  Tape<double> tape(false);
  const int in = tape.input(x);
  const GraphNodes nodes = build_graph(tape, params, c, in, Mode::kTrain);
  return cross_entropy(tape.value(nodes.logits), labels);
}

struct GradientError {
  std::string name;
  double relative = 0.0;
};

/// Per-tensor relative error between tape gradients and central differences
/// (h = 1e-5) in double precision, norm layers moved off their identity init.
inline std::vector<GradientError> gradient_errors(const ClassifierConfig& c) {
  Parameters<double> params = init_model(c, 5).cast<double>();
  SeededRng rng(17);
  for (auto& [name, t] : params) {
    if (name.ends_with(".weight") && t.rank() == 1) {
      for (double& v : t.data) v = rng.uniform(0.5, 1.5);
    } else if (name.ends_with(".bias") && !name.starts_with("fc")) {
      for (double& v : t.data) v = rng.uniform(-0.3, 0.3);
    }
  }
  const Tensor<double> x = random_batch(4, c.input_height, c.input_width, 3);
  const std::vector<int> labels = {0, 3, 1, 4};

  Parameters<double> work = params;
  Tape<double> tape(true);
  const int in = tape.input(x);
  const GraphNodes nodes = build_graph(tape, work, c, in, Mode::kTrain);
  const LossAndGrad<double> lg = cross_entropy_with_grad(tape.value(nodes.logits), labels);
  tape.backward(nodes.logits, lg.grad);
  const Parameters<double> grads = collect_gradients(tape, nodes, work);

  const double h = 1e-5;
  std::vector<GradientError> out;
  for (const auto& [name, g] : grads) {
    std::vector<double> fd(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      Parameters<double> plus = params, minus = params;
      plus.at(name).data[i] += h;
      minus.at(name).data[i] -= h;
      fd[i] = (train_mode_loss(plus, c, x, labels) - train_mode_loss(minus, c, x, labels)) / (2 * h);
    }
    double diff = 0.0, norm_a = 0.0, norm_fd = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      diff += (g.data[i] - fd[i]) * (g.data[i] - fd[i]);
      norm_a += g.data[i] * g.data[i];
      norm_fd += fd[i] * fd[i];
    }
    // Shifts feeding a train-mode norm through a linear layer have zero
    // gradient; the floor compares those absolutely.
    out.push_back({name, std::sqrt(diff) / std::max(std::sqrt(norm_a) + std::sqrt(norm_fd), 1e-6)});
  }
  return out;
}

}  // namespace glitchqa::testing
