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

#include "glitchqa/net.hpp"

#include <cmath>
#include <map>

#include "glitchqa/checkpoint.hpp"

namespace glitchqa {

std::string_view to_string(Family f) { return f == Family::kShuffle ? "shuffle" : "residual"; }

Family parse_family(std::string_view s) {
  if (s == "shuffle") return Family::kShuffle;
  if (s == "residual") return Family::kResidual;
  throw ParameterError("unknown architecture family '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

TrunkPlan trunk_plan(const ClassifierConfig& c) {
  if (c.custom()) return {c.stage_channels, c.stage_repeats};
  if (c.family == Family::kShuffle) {
    static const std::map<double, std::vector<int>> widths = {
        {0.5, {24, 48, 96, 192, 1024}},
        {1.0, {24, 116, 232, 464, 1024}},
        {1.5, {24, 176, 352, 704, 1024}},
        {2.0, {24, 244, 488, 976, 2048}},
    };
    auto it = widths.find(c.width_multiplier);
    if (it == widths.end()) {
      throw ParameterError("shuffle width multiplier must be 0.5, 1.0, 1.5 or 2.0");
    }
    return {it->second, {4, 8, 4}};
  }
  if (c.depth == 18) return {{64, 128, 256, 512}, {2, 2, 2, 2}};
  if (c.depth == 34) return {{64, 128, 256, 512}, {3, 4, 6, 3}};
  throw ParameterError("residual depth must be 18 or 34");
}

void ClassifierConfig::validate() const {
  if (num_classes < 2) throw ParameterError("num_classes must be >= 2");
  const int min_side = custom() ? 8 : 32;
  if (input_width < min_side || input_height < min_side) {
    throw ParameterError("input size must be at least " + std::to_string(min_side) + "x" +
                         std::to_string(min_side));
  }
  if (init == InitMode::kExternal && external_path.empty()) {
    throw ParameterError("external init needs a checkpoint path");
  }
  if (custom()) {
    const std::size_t want = family == Family::kShuffle ? stage_repeats.size() + 2
                                                        : stage_repeats.size();
    if (stage_repeats.empty() || stage_channels.size() != want) {
      throw ParameterError("custom trunk: channel/repeat lists have inconsistent lengths");
    }
    for (int r : stage_repeats) {
      if (r < 1) throw ParameterError("custom trunk: repeats must be >= 1");
    }
    for (std::size_t i = 0; i < stage_channels.size(); ++i) {
      const int ch = stage_channels[i];
      if (ch < 1) throw ParameterError("custom trunk: channels must be >= 1");
      const bool split_stage = family == Family::kShuffle && i >= 1 && i + 1 < stage_channels.size();
      if (split_stage && ch % 2 != 0) {
        throw ParameterError("custom trunk: shuffle stage widths must be even");
      }
    }
  } else {
    trunk_plan(*this);
  }
}

nlohmann::json ClassifierConfig::to_json() const {
  nlohmann::json j = {
      {"family", to_string(family)},
      {"width_multiplier", width_multiplier},
      {"depth", depth},
      {"input_width", input_width},
      {"input_height", input_height},
      {"num_classes", num_classes},
      {"init", init == InitMode::kRandom ? "random" : "external"},
      {"external_path", external_path},
  };
  if (custom()) {
    j["stage_channels"] = stage_channels;
    j["stage_repeats"] = stage_repeats;
  }
  return j;
}

ClassifierConfig ClassifierConfig::from_json(const nlohmann::json& j) {
  ClassifierConfig c;
  try {
    c.family = parse_family(j.at("family").get<std::string>());
    c.width_multiplier = j.at("width_multiplier").get<double>();
    c.depth = j.at("depth").get<int>();
    c.input_width = j.at("input_width").get<int>();
    c.input_height = j.at("input_height").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.init = j.value("init", std::string("random")) == "external" ? InitMode::kExternal
                                                                  : InitMode::kRandom;
    c.external_path = j.value("external_path", std::string());
    if (j.contains("stage_channels")) {
      c.stage_channels = j.at("stage_channels").get<std::vector<int>>();
      c.stage_repeats = j.at("stage_repeats").get<std::vector<int>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("malformed classifier config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Architecture walk
// ---------------------------------------------------------------------------

namespace {

template <class B>
typename B::H shuffle_branch(B& b, const std::string& p, typename B::H x, int in, int mid,
                             int stride) {
  x = b.conv(p + ".branch2.0", x, in, mid, 1, 1, 0, 1);
  x = b.relu(b.bn(p + ".branch2.1", x, mid));
  x = b.conv(p + ".branch2.3", x, mid, mid, 3, stride, 1, mid);
  x = b.bn(p + ".branch2.4", x, mid);
  x = b.conv(p + ".branch2.5", x, mid, mid, 1, 1, 0, 1);
  return b.relu(b.bn(p + ".branch2.6", x, mid));
}

template <class B>
std::pair<typename B::H, typename B::H> shuffle_net(B& b, const ClassifierConfig& cfg,
                                                    const TrunkPlan& plan, typename B::H x) {
  const auto& ch = plan.channels;
  x = b.conv("stem.conv", x, 3, ch[0], 3, 2, 1, 1);
  x = b.relu(b.bn("stem.bn", x, ch[0]));
  x = b.maxpool(x, 3, 2, 1);
  int in = ch[0];
  for (std::size_t s = 0; s < plan.repeats.size(); ++s) {
    const int out = ch[s + 1];
    const int half = out / 2;
    for (int u = 0; u < plan.repeats[s]; ++u) {
      const std::string p = "stage" + std::to_string(s + 2) + "." + std::to_string(u);
      typename B::H left, right;
      if (u == 0) {
        left = b.conv(p + ".branch1.0", x, in, in, 3, 2, 1, in);
        left = b.bn(p + ".branch1.1", left, in);
        left = b.conv(p + ".branch1.2", left, in, half, 1, 1, 0, 1);
        left = b.relu(b.bn(p + ".branch1.3", left, half));
        right = shuffle_branch(b, p, x, in, half, 2);
      } else {
        auto [x1, x2] = b.split_half(x, out);
        left = x1;
        right = shuffle_branch(b, p, x2, half, half, 1);
      }
      x = b.shuffle(b.concat(left, right), 2);
      in = out;
    }
  }
  const int last = ch.back();
  x = b.conv("conv5.0", x, in, last, 1, 1, 0, 1);
  x = b.relu(b.bn("conv5.1", x, last));
  auto emb = b.gap(x);
  return {b.linear("fc", emb, last, cfg.num_classes), emb};
}

template <class B>
std::pair<typename B::H, typename B::H> residual_net(B& b, const ClassifierConfig& cfg,
                                                     const TrunkPlan& plan, typename B::H x) {
  const auto& ch = plan.channels;
  x = b.conv("conv1", x, 3, ch[0], 7, 2, 3, 1);
  x = b.relu(b.bn("bn1", x, ch[0]));
  x = b.maxpool(x, 3, 2, 1);
  int in = ch[0];
  for (std::size_t s = 0; s < plan.repeats.size(); ++s) {
    const int out = ch[s];
    for (int blk = 0; blk < plan.repeats[s]; ++blk) {
      const int stride = (s > 0 && blk == 0) ? 2 : 1;
      const std::string p = "layer" + std::to_string(s + 1) + "." + std::to_string(blk);
      auto y = b.conv(p + ".conv1", x, in, out, 3, stride, 1, 1);
      y = b.relu(b.bn(p + ".bn1", y, out));
      y = b.conv(p + ".conv2", y, out, out, 3, 1, 1, 1);
      y = b.bn(p + ".bn2", y, out);
      auto shortcut = x;
      if (stride != 1 || in != out) {
        shortcut = b.conv(p + ".downsample.0", x, in, out, 1, stride, 0, 1);
        shortcut = b.bn(p + ".downsample.1", shortcut, out);
      }
      x = b.relu(b.add(y, shortcut));
      in = out;
    }
  }
  auto emb = b.gap(x);
  return {b.linear("fc", emb, in, cfg.num_classes), emb};
}

template <class B>
std::pair<typename B::H, typename B::H> walk(B& b, const ClassifierConfig& cfg, typename B::H x) {
  cfg.validate();
  const TrunkPlan plan = trunk_plan(cfg);
  return cfg.family == Family::kShuffle ? shuffle_net(b, cfg, plan, x)
                                        : residual_net(b, cfg, plan, x);
}

// Shape-only backend: declares tensors and counts multiply-accumulates.
struct ShapeBackend {
  struct Dims {
    int c = 0, h = 0, w = 0;
  };
  using H = Dims;

  std::vector<TensorDecl> decls;
  ModelCost cost;

  static int out_side(int side, int k, int s, int p) { return (side + 2 * p - k) / s + 1; }

  H conv(const std::string& name, H x, int in, int out, int k, int stride, int pad, int groups) {
    if (x.c != in) throw ShapeError("architecture error at " + name);
    const int cg = in / groups;
    decls.push_back({name + ".weight", {out, cg, k, k}, TensorDecl::Role::kConvWeight, cg * k * k});
    H y{out, out_side(x.h, k, stride, pad), out_side(x.w, k, stride, pad)};
    if (y.h < 1 || y.w < 1) throw ShapeError("input too small: " + name + " output is empty");
    cost.trunk_macs += static_cast<std::uint64_t>(out) * y.h * y.w * cg * k * k;
    return y;
  }
  H bn(const std::string& name, H x, int c) {
    using R = TensorDecl::Role;
    decls.push_back({name + ".weight", {c}, R::kNormScale, 0});
    decls.push_back({name + ".bias", {c}, R::kNormShift, 0});
    decls.push_back({name + ".running_mean", {c}, R::kNormMean, 0});
    decls.push_back({name + ".running_var", {c}, R::kNormVar, 0});
    return x;
  }
  H relu(H x) { return x; }
  H maxpool(H x, int k, int s, int p) { return {x.c, out_side(x.h, k, s, p), out_side(x.w, k, s, p)}; }
  H add(H a, H) { return a; }
  std::pair<H, H> split_half(H x, int) { return {{x.c / 2, x.h, x.w}, {x.c - x.c / 2, x.h, x.w}}; }
  H concat(H a, H b) { return {a.c + b.c, a.h, a.w}; }
  H shuffle(H x, int) { return x; }
  H gap(H x) { return {x.c, 1, 1}; }
  H linear(const std::string& name, H x, int in, int out) {
    if (x.c != in) throw ShapeError("architecture error at " + name);
    decls.push_back({name + ".weight", {out, in}, TensorDecl::Role::kFcWeight, in});
    decls.push_back({name + ".bias", {out}, TensorDecl::Role::kFcBias, in});
    cost.classifier_macs += static_cast<std::uint64_t>(in) * out;
    return {out, 1, 1};
  }
};

template <typename T>
struct TapeBackend {
  using H = int;

  Tape<T>& tape;
  const Parameters<T>& params;
  Parameters<T>* mutable_params;  // non-null in train mode
  Mode mode;
  GraphNodes nodes;
  std::map<std::string, int> bound;

  int param(const std::string& name) {
    auto it = bound.find(name);
    if (it != bound.end()) return it->second;
    const int id = tape.parameter(params.at(name));
    bound.emplace(name, id);
    nodes.parameters.emplace_back(name, id);
    return id;
  }

  H conv(const std::string& name, H x, int, int, int, int stride, int pad, int groups) {
    return tape.conv2d(x, param(name + ".weight"), stride, pad, groups);
  }
  H bn(const std::string& name, H x, int) {
    NormStats<T> stats;
    stats.mean = &params.at(name + ".running_mean");
    stats.var = &params.at(name + ".running_var");
    if (mode == Mode::kTrain && mutable_params) {
      stats.update_mean = &mutable_params->at(name + ".running_mean");
      stats.update_var = &mutable_params->at(name + ".running_var");
    }
    return tape.batch_norm(x, param(name + ".weight"), param(name + ".bias"), stats,
                           mode == Mode::kTrain);
  }
  H relu(H x) { return tape.relu(x); }
  H maxpool(H x, int k, int s, int p) { return tape.max_pool(x, k, s, p); }
  H add(H a, H b) { return tape.add(a, b); }
  std::pair<H, H> split_half(H x, int c) {
    return {tape.slice_channels(x, 0, c / 2), tape.slice_channels(x, c / 2, c)};
  }
  H concat(H a, H b) { return tape.concat_channels(a, b); }
  H shuffle(H x, int g) { return tape.channel_shuffle(x, g); }
  H gap(H x) { return tape.global_avg_pool(x); }
  H linear(const std::string& name, H x, int, int) {
    return tape.linear(x, param(name + ".weight"), param(name + ".bias"));
  }
};

template <typename T>
void check_batch(const ClassifierConfig& config, const Tensor<T>& batch) {
  if (batch.rank() != 4 || batch.dim(1) != 3 || batch.dim(2) != config.input_height ||
      batch.dim(3) != config.input_width) {
    throw ShapeError("input batch: expected N x " + shape_string({3, config.input_height,
                                                                  config.input_width}) +
                     ", got " + shape_string(batch.shape));
  }
}

}  // namespace

std::vector<TensorDecl> declare_parameters(const ClassifierConfig& config) {
  ShapeBackend b;
  walk(b, config, ShapeBackend::Dims{3, config.input_height, config.input_width});
  return std::move(b.decls);
}

ModelCost count_cost(const ClassifierConfig& config) {
  ShapeBackend b;
  auto [logits, emb] = walk(b, config, ShapeBackend::Dims{3, config.input_height, config.input_width});
  ModelCost cost = b.cost;
  cost.macs = cost.trunk_macs + cost.classifier_macs;
  cost.embedding_dim = emb.c;
  for (const auto& d : b.decls) {
    using R = TensorDecl::Role;
    if (d.role != R::kNormMean && d.role != R::kNormVar) cost.parameters += shape_numel(d.shape);
  }
  return cost;
}

Parameters<float> init_model(const ClassifierConfig& config, std::uint64_t init_seed) {
  const std::vector<TensorDecl> decls = declare_parameters(config);
  Parameters<float> params;
  if (config.init == InitMode::kExternal) {
    const Checkpoint donor = load_checkpoint(config.external_path);
    for (const auto& d : decls) {
      if (!donor.params.contains(d.name)) {
        throw ShapeError("external weights: missing tensor '" + d.name + "'");
      }
      const Tensor<float>& t = donor.params.at(d.name);
      if (t.shape != d.shape) {
        throw ShapeError("external weights: tensor '" + d.name + "' has shape " +
                         shape_string(t.shape) + ", expected " + shape_string(d.shape));
      }
      params.add(d.name, t);
    }
    return params;
  }

  SeededRng rng(derive_seed(init_seed, 0x696e6974ULL));
  using R = TensorDecl::Role;
  for (const auto& d : decls) {
    Tensor<float> t(d.shape);
    double bound = 0.0;
    switch (d.role) {
      case R::kConvWeight: bound = std::sqrt(6.0 / d.fan_in); break;
      case R::kFcWeight:
      case R::kFcBias: bound = 1.0 / std::sqrt(static_cast<double>(d.fan_in)); break;
      case R::kNormScale:
      case R::kNormVar: std::fill(t.data.begin(), t.data.end(), 1.0f); break;
      case R::kNormShift:
      case R::kNormMean: break;
    }
    if (bound > 0) {
      for (float& v : t.data) v = static_cast<float>(rng.uniform(-bound, bound));
    }
    params.add(d.name, std::move(t));
  }
  return params;
}

template <typename T>
GraphNodes build_graph(Tape<T>& tape, Parameters<T>& params, const ClassifierConfig& config,
                       int input, Mode mode) {
  check_batch(config, tape.value(input));
  TapeBackend<T> b{tape, params, &params, mode, {}, {}};
  auto [logits, emb] = walk(b, config, input);
  b.nodes.logits = logits;
  b.nodes.embedding = emb;
  return std::move(b.nodes);
}

template <typename T>
ForwardOutput<T> forward(const Parameters<T>& params, const ClassifierConfig& config,
                         const Tensor<T>& batch) {
  check_batch(config, batch);
  Tape<T> tape(false);
  const int input = tape.input(batch);
  TapeBackend<T> b{tape, params, nullptr, Mode::kEval, {}, {}};
  auto [logits, emb] = walk(b, config, input);
  ForwardOutput<T> out;
  out.logits = tape.value(logits);
  out.embedding = tape.value(emb);
  out.probabilities = softmax_rows(out.logits);
  return out;
}

template <typename T>
Parameters<T> collect_gradients(const Tape<T>& tape, const GraphNodes& nodes,
                                const Parameters<T>& params) {
  std::map<std::string, int> ids(nodes.parameters.begin(), nodes.parameters.end());
  Parameters<T> grads;
  for (const auto& [name, t] : params) {
    if (is_buffer_name(name)) continue;
    auto it = ids.find(name);
    if (it != ids.end() && tape.has_grad(it->second)) {
      grads.add(name, tape.grad(it->second));
    } else {
      grads.add(name, Tensor<T>(t.shape));
    }
  }
  return grads;
}

template GraphNodes build_graph(Tape<float>&, Parameters<float>&, const ClassifierConfig&, int,
                                Mode);
template GraphNodes build_graph(Tape<double>&, Parameters<double>&, const ClassifierConfig&, int,
                                Mode);
template ForwardOutput<float> forward(const Parameters<float>&, const ClassifierConfig&,
                                      const Tensor<float>&);
template ForwardOutput<double> forward(const Parameters<double>&, const ClassifierConfig&,
                                       const Tensor<double>&);
template Parameters<float> collect_gradients(const Tape<float>&, const GraphNodes&,
                                             const Parameters<float>&);
template Parameters<double> collect_gradients(const Tape<double>&, const GraphNodes&,
                                              const Parameters<double>&);

}  // namespace glitchqa
