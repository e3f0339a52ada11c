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

#include "glitchqa/metrics.hpp"

#include <cmath>
#include <fstream>

namespace glitchqa {

std::string_view to_string(Grouping g) {
  switch (g) {
    case Grouping::kFive: return "five";
    case Grouping::kThree: return "three";
    case Grouping::kBinary: return "binary";
  }
  return "?";
}

Grouping parse_grouping(std::string_view s) {
  if (s == "five") return Grouping::kFive;
  if (s == "three") return Grouping::kThree;
  if (s == "binary") return Grouping::kBinary;
  throw ParameterError("unknown grouping '" + std::string(s) + "'");
}

int group_count(Grouping g) {
  return g == Grouping::kFive ? kNumClasses : g == Grouping::kThree ? 3 : 2;
}

std::vector<std::string> group_names(Grouping g) {
  switch (g) {
    case Grouping::kThree: return {"normal", "corrupted", "missing-texture"};
    case Grouping::kBinary: return {"normal", "glitch"};
    case Grouping::kFive: break;
  }
  std::vector<std::string> names;
  for (GlitchClass c : kAllClasses) names.emplace_back(to_string(c));
  return names;
}

int group_labels(int cls, Grouping g) {
  const GlitchClass c = class_from_index(cls);
  switch (g) {
    case Grouping::kFive: return cls;
    case Grouping::kBinary: return is_glitch(c) ? 1 : 0;
    case Grouping::kThree:
      if (c == GlitchClass::kNormal) return 0;
      return (c == GlitchClass::kStretched || c == GlitchClass::kLowRes) ? 1 : 2;
  }
  return cls;
}

long ConfusionMatrix::total() const {
  long n = 0;
  for (const auto& row : counts) {
    for (long v : row) n += v;
  }
  return n;
}

long ConfusionMatrix::trace() const {
  long n = 0;
  for (int i = 0; i < size(); ++i) n += counts[i][i];
  return n;
}

ConfusionMatrix confusion_matrix(const PredictionSet& preds, Grouping g) {
  if (preds.empty()) throw ParameterError("confusion_matrix: empty prediction set");
  const int n = group_count(g);
  ConfusionMatrix m;
  m.grouping = g;
  m.counts.assign(n, std::vector<long>(n, 0));
  for (const auto& p : preds) ++m.counts[group_labels(p.true_class, g)][group_labels(p.predicted, g)];
  m.normalized.assign(n, std::vector<double>(n, 0.0));
  m.supported.assign(n, false);
  for (int i = 0; i < n; ++i) {
    long row = 0;
    for (long v : m.counts[i]) row += v;
    if (row == 0) continue;
    m.supported[i] = true;
    for (int j = 0; j < n; ++j) m.normalized[i][j] = static_cast<double>(m.counts[i][j]) / row;
  }
  return m;
}

double accuracy(const PredictionSet& preds, Grouping g) {
  const ConfusionMatrix m = confusion_matrix(preds, g);
  return static_cast<double>(m.trace()) / static_cast<double>(m.total());
}

BinaryMetrics binary_metrics(const PredictionSet& preds) {
  if (preds.empty()) throw ParameterError("binary_metrics: empty prediction set");
  BinaryMetrics b;
  for (const auto& p : preds) {
    const bool actual = p.true_class != 0;
    const bool flagged = p.predicted != 0;
    if (actual && flagged) ++b.tp;
    else if (actual) ++b.fn;
    else if (flagged) ++b.fp;
    else ++b.tn;
  }
  auto ratio = [](long num, long den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  b.precision = ratio(b.tp, b.tp + b.fp);
  b.recall = ratio(b.tp, b.tp + b.fn);
  b.fpr = ratio(b.fp, b.fp + b.tn);
  return b;
}

const ConfusionMatrix& EvalReport::matrix(Grouping g) const {
  return g == Grouping::kFive ? five : g == Grouping::kThree ? three : two;
}

EvalReport make_report(const PredictionSet& preds) {
  EvalReport r;
  r.samples = preds.size();
  r.five = confusion_matrix(preds, Grouping::kFive);
  r.three = confusion_matrix(preds, Grouping::kThree);
  r.two = confusion_matrix(preds, Grouping::kBinary);
  r.accuracy = static_cast<double>(r.five.trace()) / r.five.total();
  r.accuracy_three = static_cast<double>(r.three.trace()) / r.three.total();
  r.accuracy_binary = static_cast<double>(r.two.trace()) / r.two.total();
  for (int c = 0; c < kNumClasses; ++c) {
    long support = 0;
    for (long v : r.five.counts[c]) support += v;
    r.class_support[c] = support;
    if (support > 0) r.class_recall[c] = r.five.normalized[c][c];
  }
  r.binary = binary_metrics(preds);
  return r;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const ConfusionMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.size(); ++i) {
    rows.push_back(m.supported[i] ? nlohmann::json(m.normalized[i]) : nlohmann::json(nullptr));
  }
  return {{"grouping", to_string(m.grouping)},
          {"labels", group_names(m.grouping)},
          {"counts", m.counts},
          {"normalized", rows},
          {"supported", m.supported}};
}

nlohmann::json to_json(const BinaryMetrics& b) {
  return {{"tp", b.tp},
          {"fp", b.fp},
          {"tn", b.tn},
          {"fn", b.fn},
          {"precision", opt(b.precision)},
          {"recall", opt(b.recall)},
          {"fpr", opt(b.fpr)}};
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json recall = nlohmann::json::object();
  nlohmann::json support = nlohmann::json::object();
  for (GlitchClass c : kAllClasses) {
    recall[std::string(glitchqa::to_string(c))] = opt(class_recall[class_index(c)]);
    support[std::string(glitchqa::to_string(c))] = class_support[class_index(c)];
  }
  return {{"samples", samples},
          {"accuracy", accuracy},
          {"accuracy_three", accuracy_three},
          {"accuracy_binary", accuracy_binary},
          {"class_recall", recall},
          {"class_support", support},
          {"binary", glitchqa::to_json(binary)},
          {"confusion",
           {{"five", glitchqa::to_json(five)},
            {"three", glitchqa::to_json(three)},
            {"binary", glitchqa::to_json(two)}}}};
}

PredictionSet predict(const Parameters<float>& params, const ClassifierConfig& config,
                      const CorpusManifest& manifest, Split split, int batch_size,
                      ImageCache* cache) {
  const int w = manifest.config.value("width", config.input_width);
  const int h = manifest.config.value("height", config.input_height);
  if (w != config.input_width || h != config.input_height) {
    throw ShapeError("model expects " + std::to_string(config.input_width) + "x" +
                     std::to_string(config.input_height) + " input, corpus images are " +
                     std::to_string(w) + "x" + std::to_string(h));
  }
  PredictionSet out;
  BatchStream stream(manifest, split, batch_size, 0, 0, false, cache);
  Batch batch;
  while (stream.next(batch)) {
    const ForwardOutput<float> fo = forward(params, config, batch.images);
    const int classes = fo.logits.dim(1);
    const int dim = fo.embedding.dim(1);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      PredictionRecord p;
      const SampleRecord& r = *batch.records[i];
      p.sample_id = r.sample_id;
      p.object_id = r.object_id;
      p.view_id = r.view_id;
      p.true_class = batch.labels[i];
      const float* logits = fo.logits.ptr() + i * classes;
      double mx = logits[0];
      for (int c = 1; c < classes; ++c) mx = std::max(mx, static_cast<double>(logits[c]));
      double z = 0.0;
      for (int c = 0; c < classes; ++c) z += std::exp(logits[c] - mx);
      p.nll = -(logits[p.true_class] - mx - std::log(z));
      p.probabilities.resize(classes);
      for (int c = 0; c < classes; ++c) {
        p.probabilities[c] = std::exp(logits[c] - mx) / z;
        if (p.probabilities[c] > p.probabilities[p.predicted]) p.predicted = c;
      }
      p.embedding.assign(fo.embedding.ptr() + i * dim, fo.embedding.ptr() + (i + 1) * dim);
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::pair<EvalReport, PredictionSet> evaluate(const Checkpoint& checkpoint,
                                              const CorpusManifest& manifest, Split split,
                                              ImageCache* cache) {
  PredictionSet preds = predict(checkpoint.params, checkpoint.config, manifest, split, 64, cache);
  if (preds.empty()) throw ParameterError("split " + std::string(to_string(split)) + " is empty");
  EvalReport report = make_report(preds);
  return {std::move(report), std::move(preds)};
}

ConfusionMatrix average_confusion(const std::vector<ConfusionMatrix>& ms) {
  if (ms.empty()) throw ParameterError("average_confusion: no matrices");
  ConfusionMatrix out = ms.front();
  const int n = out.size();
  for (std::size_t k = 1; k < ms.size(); ++k) {
    if (ms[k].size() != n) throw ShapeError("average_confusion: size mismatch");
    for (int i = 0; i < n; ++i) {
      out.supported[i] = out.supported[i] && ms[k].supported[i];
      for (int j = 0; j < n; ++j) {
        out.counts[i][j] += ms[k].counts[i][j];
        out.normalized[i][j] += ms[k].normalized[i][j];
      }
    }
  }
  for (auto& row : out.normalized) {
    for (double& v : row) v /= static_cast<double>(ms.size());
  }
  return out;
}

void write_confusion_csv(const ConfusionMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const auto names = group_names(m.grouping);
  out << "true\\predicted";
  for (const auto& n : names) out << ',' << n;
  out << ",support\n";
  for (int i = 0; i < m.size(); ++i) {
    out << names[i];
    long support = 0;
    for (int j = 0; j < m.size(); ++j) {
      support += m.counts[i][j];
      out << ',';
      if (m.supported[i]) out << m.normalized[i][j];
    }
    out << ',' << support << '\n';
  }
}

void write_confusion_png(const ConfusionMatrix& m, const std::filesystem::path& path, int cell) {
  const int n = m.size();
  Image img(n * cell, n * cell);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      std::uint8_t v = 0;
      Rgb color{96, 0, 0};  // unsupported rows in dark red
      if (m.supported[i]) {
        v = static_cast<std::uint8_t>(std::nearbyint(255.0 * m.normalized[i][j]));
        color = {v, v, v};
      }
      for (int y = 0; y < cell; ++y) {
        for (int x = 0; x < cell; ++x) img.set(j * cell + x, i * cell + y, color);
      }
    }
  }
  write_png(path, img);
}

void write_predictions(const PredictionSet& preds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& p : preds) {
    out << nlohmann::json{{"sample_id", p.sample_id},
                          {"object_id", p.object_id},
                          {"view_id", p.view_id},
                          {"true_class", p.true_class},
                          {"predicted", p.predicted},
                          {"probabilities", p.probabilities},
                          {"embedding", p.embedding},
                          {"nll", p.nll}}
               .dump()
        << '\n';
  }
}

PredictionSet read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  PredictionSet preds;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    PredictionRecord p;
    p.sample_id = j.at("sample_id").get<std::string>();
    p.object_id = j.at("object_id").get<std::uint64_t>();
    p.view_id = j.at("view_id").get<std::uint64_t>();
    p.true_class = j.at("true_class").get<int>();
    p.predicted = j.at("predicted").get<int>();
    p.probabilities = j.at("probabilities").get<std::vector<double>>();
    p.embedding = j.at("embedding").get<std::vector<float>>();
    p.nll = j.value("nll", 0.0);
    preds.push_back(std::move(p));
  }
  return preds;
}

}  // namespace glitchqa
