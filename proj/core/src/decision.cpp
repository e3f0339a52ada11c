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

#include "glitchqa/decision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace glitchqa {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kFlagGlitch: return "flag-glitch";
    case Verdict::kPass: return "pass";
    case Verdict::kAbstain: return "abstain-need-more-views";
  }
  return "?";
}

nlohmann::json ConfidenceModel::to_json() const {
  return {{"dim", dim}, {"mean", mean}, {"sigma", sigma}};
}

ConfidenceModel ConfidenceModel::from_json(const nlohmann::json& j) {
  ConfidenceModel m;
  m.dim = j.at("dim").get<int>();
  m.mean = j.at("mean").get<std::vector<std::vector<double>>>();
  m.sigma = j.at("sigma").get<std::vector<double>>();
  if (m.mean.size() != m.sigma.size()) throw ParameterError("confidence model: class count mismatch");
  for (const auto& mu : m.mean) {
    if (static_cast<int>(mu.size()) != m.dim) throw ShapeError("confidence model: mean dimension");
  }
  return m;
}

void ConfidenceModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

ConfidenceModel ConfidenceModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open confidence model " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed confidence model " + path.string() + ": " + e.what());
  }
}

ConfidenceModel fit_confidence(const PredictionSet& train, int num_classes) {
  if (train.empty()) throw ParameterError("fit_confidence: empty prediction set");
  ConfidenceModel m;
  m.dim = static_cast<int>(train.front().embedding.size());
  m.mean.assign(num_classes, std::vector<double>(m.dim, 0.0));
  m.sigma.assign(num_classes, 0.0);
  std::vector<long> n(num_classes, 0);
  for (const auto& p : train) {
    if (static_cast<int>(p.embedding.size()) != m.dim) throw ShapeError("fit_confidence: ragged embeddings");
    ++n[p.true_class];
    for (int d = 0; d < m.dim; ++d) m.mean[p.true_class][d] += p.embedding[d];
  }
  for (int c = 0; c < num_classes; ++c) {
    if (n[c] < 2) {
      const std::string name = num_classes == kNumClasses ? std::string(to_string(class_from_index(c)))
                                                          : std::to_string(c);
      throw ParameterError("fit_confidence: class " + name + " has " + std::to_string(n[c]) +
                           " samples, need at least 2");
    }
    for (double& v : m.mean[c]) v /= static_cast<double>(n[c]);
  }
  for (const auto& p : train) {
    double d2 = 0.0;
    for (int d = 0; d < m.dim; ++d) {
      const double diff = p.embedding[d] - m.mean[p.true_class][d];
      d2 += diff * diff;
    }
    m.sigma[p.true_class] += d2;
  }
  for (int c = 0; c < num_classes; ++c) {
    m.sigma[c] = std::max(std::sqrt(m.sigma[c] / static_cast<double>(n[c])), ConfidenceModel::kSigmaFloor);
  }
  return m;
}

double confidence_score(const ConfidenceModel& model, std::span<const float> z, int cls) {
  if (static_cast<int>(z.size()) != model.dim) {
    throw ShapeError("confidence_score: embedding has " + std::to_string(z.size()) +
                     " dims, model has " + std::to_string(model.dim));
  }
  if (cls < 0 || cls >= static_cast<int>(model.sigma.size())) {
    throw ParameterError("confidence_score: class out of range");
  }
  const auto& mu = model.mean[cls];
  double d2 = 0.0;
  for (int d = 0; d < model.dim; ++d) {
    const double diff = z[d] - mu[d];
    d2 += diff * diff;
  }
  const double s = model.sigma[cls];
  return std::exp(-d2 / (2.0 * s * s));
}

std::vector<double> aggregate_probs(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ParameterError("aggregate_probs: no probability vectors");
  std::vector<double> out(rows.front().size(), 0.0);
  for (const auto& r : rows) {
    if (r.size() != out.size()) throw ShapeError("aggregate_probs: rows differ in length");
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += r[c];
  }
  for (double& v : out) v /= static_cast<double>(rows.size());
  return out;
}

int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

nlohmann::json to_json(const ObjectDecision& d) {
  nlohmann::json j = {
      {"object_id", d.object_id},
      {"class", d.predicted < kNumClasses ? std::string(to_string(class_from_index(d.predicted)))
                                           : std::to_string(d.predicted)},
      {"probabilities", d.probabilities},
      {"confidence", d.confidence ? nlohmann::json(*d.confidence) : nlohmann::json(nullptr)},
      {"verdict", to_string(d.verdict)},
      {"views_used", d.views_used},
  };
  if (d.true_class >= 0) j["true_class"] = std::string(to_string(class_from_index(d.true_class)));
  return j;
}

namespace {

Verdict initial_verdict(int predicted) { return predicted != 0 ? Verdict::kFlagGlitch : Verdict::kPass; }

}  // namespace

ObjectDecision classify_object(const std::vector<PredictionRecord>& views, int k,
                               const ConfidenceModel* confidence) {
  if (views.empty()) throw ParameterError("classify_object: no views");
  if (k < 1 || static_cast<std::size_t>(k) > views.size()) {
    throw ParameterError("classify_object: k=" + std::to_string(k) + " with " +
                         std::to_string(views.size()) + " views");
  }
  for (const auto& v : views) {
    if (v.object_id != views.front().object_id) throw ParameterError("classify_object: mixed object_ids");
  }
  std::vector<const PredictionRecord*> order;
  for (const auto& v : views) order.push_back(&v);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto* a, const auto* b) { return a->view_id < b->view_id; });
  order.resize(static_cast<std::size_t>(k));

  std::vector<std::vector<double>> rows;
  for (const auto* v : order) rows.push_back(v->probabilities);
  ObjectDecision d;
  d.object_id = views.front().object_id;
  d.probabilities = aggregate_probs(rows);
  d.predicted = argmax(d.probabilities);
  d.views_used = k;
  d.verdict = initial_verdict(d.predicted);
  const int truth = order.front()->true_class;
  bool same_truth = true;
  for (const auto* v : order) same_truth = same_truth && v->true_class == truth;
  if (same_truth) d.true_class = truth;
  if (confidence) {
    double sum = 0.0;
    for (const auto* v : order) sum += confidence_score(*confidence, v->embedding, d.predicted);
    d.confidence = sum / k;
  }
  return d;
}

ObjectDecision classify_object(const Checkpoint& checkpoint, const std::vector<ViewFrame>& frames,
                               int k, const ConfidenceModel* confidence) {
  if (frames.empty()) throw ParameterError("classify_object: no frames");
  if (k < 1 || static_cast<std::size_t>(k) > frames.size()) {
    throw ParameterError("classify_object: k out of range");
  }
  std::vector<const ViewFrame*> order;
  for (const auto& f : frames) {
    if (f.object_id != frames.front().object_id) throw ParameterError("classify_object: mixed object_ids");
    order.push_back(&f);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const auto* a, const auto* b) { return a->view_id < b->view_id; });
  order.resize(static_cast<std::size_t>(k));
  std::vector<const Image*> images;
  for (const auto* f : order) images.push_back(&f->image);
  const ForwardOutput<float> fo = forward(checkpoint.params, checkpoint.config, images_to_tensor(images));
  std::vector<PredictionRecord> views;
  const int c = fo.probabilities.dim(1);
  const int dim = fo.embedding.dim(1);
  for (int i = 0; i < k; ++i) {
    PredictionRecord p;
    p.object_id = order[i]->object_id;
    p.view_id = order[i]->view_id;
    p.true_class = -1;
    p.probabilities.assign(fo.probabilities.ptr() + i * c, fo.probabilities.ptr() + (i + 1) * c);
    p.embedding.assign(fo.embedding.ptr() + i * dim, fo.embedding.ptr() + (i + 1) * dim);
    p.predicted = argmax(p.probabilities);
    views.push_back(std::move(p));
  }
  ObjectDecision d = classify_object(views, k, confidence);
  d.true_class = -1;
  return d;
}

std::vector<ObjectDecision> per_view_decisions(const PredictionSet& preds,
                                               const ConfidenceModel* confidence) {
  std::vector<ObjectDecision> out;
  out.reserve(preds.size());
  for (const auto& p : preds) {
    ObjectDecision d;
    d.object_id = p.object_id;
    d.probabilities = p.probabilities;
    d.predicted = p.predicted;
    d.views_used = 1;
    d.verdict = initial_verdict(p.predicted);
    d.true_class = p.true_class;
    if (confidence) d.confidence = confidence_score(*confidence, p.embedding, p.predicted);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<ObjectDecision> filter_predictions(const std::vector<ObjectDecision>& decisions, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ParameterError("tau must lie in [0, 1]");
  std::vector<ObjectDecision> out = decisions;
  for (auto& d : out) {
    if (d.verdict == Verdict::kFlagGlitch && d.confidence && *d.confidence < tau) {
      d.verdict = Verdict::kAbstain;
    }
  }
  return out;
}

BinaryMetrics decision_binary_metrics(const std::vector<ObjectDecision>& decisions) {
  PredictionSet proxy;
  for (const auto& d : decisions) {
    if (d.true_class < 0) continue;
    PredictionRecord p;
    p.true_class = d.true_class;
    p.predicted = d.verdict == Verdict::kFlagGlitch ? d.predicted : 0;
    proxy.push_back(std::move(p));
  }
  return binary_metrics(proxy);
}

std::vector<AggregateRow> aggregate_sweep(const PredictionSet& preds, const std::vector<int>& k_list) {
  std::map<std::pair<std::uint64_t, int>, std::vector<PredictionRecord>> groups;
  for (const auto& p : preds) groups[{p.object_id, p.true_class}].push_back(p);
  for (auto& [key, views] : groups) {
    std::stable_sort(views.begin(), views.end(),
                     [](const auto& a, const auto& b) { return a.view_id < b.view_id; });
  }
  std::vector<AggregateRow> rows;
  for (int k : k_list) {
    if (k < 1) throw ParameterError("aggregate_sweep: k must be >= 1");
    AggregateRow row;
    row.k = k;
    long correct = 0;
    for (const auto& [key, views] : groups) {
      const std::size_t chunks = views.size() / static_cast<std::size_t>(k);
      for (std::size_t i = 0; i < chunks; ++i) {
        std::vector<std::vector<double>> probs;
        for (std::size_t j = i * k; j < (i + 1) * k; ++j) probs.push_back(views[j].probabilities);
        correct += argmax(aggregate_probs(probs)) == key.second;
        ++row.decisions;
      }
    }
    if (row.decisions > 0) row.accuracy = static_cast<double>(correct) / static_cast<double>(row.decisions);
    rows.push_back(row);
  }
  return rows;
}

PredictionSet predict_synthetic_views(const Checkpoint& checkpoint, const nlohmann::json& corpus_config,
                                      const std::vector<std::uint64_t>& object_ids,
                                      std::uint64_t view_begin, std::uint64_t view_end) {
  const SynthConfig synth = synth_config_for(corpus_config);
  const std::uint64_t master = corpus_config.value("master_seed", std::uint64_t{0});
  PredictionSet out;
  constexpr std::size_t kChunk = 64;
  std::vector<Image> images;
  std::vector<PredictionRecord> pending;
  auto flush = [&] {
    if (images.empty()) return;
    std::vector<const Image*> ptrs;
    for (const auto& im : images) ptrs.push_back(&im);
    const ForwardOutput<float> fo = forward(checkpoint.params, checkpoint.config, images_to_tensor(ptrs));
    const int c = fo.probabilities.dim(1);
    const int dim = fo.embedding.dim(1);
    for (std::size_t i = 0; i < pending.size(); ++i) {
      auto& p = pending[i];
      p.probabilities.assign(fo.probabilities.ptr() + i * c, fo.probabilities.ptr() + (i + 1) * c);
      p.embedding.assign(fo.embedding.ptr() + i * dim, fo.embedding.ptr() + (i + 1) * dim);
      p.predicted = argmax(p.probabilities);
      p.nll = -std::log(std::max(p.probabilities[p.true_class], 1e-300));
      out.push_back(std::move(p));
    }
    images.clear();
    pending.clear();
  };
  for (std::uint64_t obj : object_ids) {
    for (std::uint64_t view = view_begin; view < view_end; ++view) {
      const GlitchClass cls = class_for_view(view);
      images.push_back(synth_sample(cls, obj, view, master, synth).pixels);
      PredictionRecord p;
      p.sample_id = make_sample_id(obj, view);
      p.object_id = obj;
      p.view_id = view;
      p.true_class = class_index(cls);
      pending.push_back(std::move(p));
      if (images.size() == kChunk) flush();
    }
  }
  flush();
  return out;
}

void write_decisions(const std::vector<ObjectDecision>& decisions, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& d : decisions) out << to_json(d).dump() << '\n';
}

}  // namespace glitchqa
