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

#include "glitchqa/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace glitchqa {

namespace {

template <typename T>
void check_logits(const Tensor<T>& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2 || static_cast<std::size_t>(logits.dim(0)) != labels.size()) {
    throw ShapeError("cross_entropy: logits " + shape_string(logits.shape) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw ParameterError("cross_entropy: empty batch");
  for (int l : labels) {
    if (l < 0 || l >= logits.dim(1)) throw ParameterError("cross_entropy: label out of range");
  }
}

// Per row: log-sum-exp and max.
template <typename T>
double row_lse(const T* row, int c) {
  double mx = row[0];
  for (int j = 1; j < c; ++j) mx = std::max(mx, static_cast<double>(row[j]));
  double z = 0.0;
  for (int j = 0; j < c; ++j) z += std::exp(row[j] - mx);
  return mx + std::log(z);
}

}  // namespace

template <typename T>
double cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
  return cross_entropy_with_grad(logits, labels).loss;
}

template <typename T>
double cross_entropy_from_probs(const Tensor<T>& probs, const std::vector<int>& labels) {
  check_logits(probs, labels);
  double total = 0.0;
  const int c = probs.dim(1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total -= std::log(static_cast<double>(probs.data[i * c + labels[i]]));
  }
  return total / static_cast<double>(labels.size());
}

template <typename T>
LossAndGrad<T> cross_entropy_with_grad(const Tensor<T>& logits, const std::vector<int>& labels) {
  check_logits(logits, labels);
  for (T v : logits.data) {
    if (!std::isfinite(static_cast<double>(v))) throw Error("cross_entropy: non-finite logits");
  }
  const int n = logits.dim(0);
  const int c = logits.dim(1);
  LossAndGrad<T> out;
  out.grad = Tensor<T>(logits.shape);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const T* row = logits.ptr() + static_cast<std::size_t>(i) * c;
    const double lse = row_lse(row, c);
    total += lse - row[labels[i]];
    T* g = out.grad.ptr() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) {
      const double p = std::exp(row[j] - lse);
      g[j] = static_cast<T>((p - (j == labels[i] ? 1.0 : 0.0)) / n);
    }
  }
  out.loss = total / n;
  return out;
}

template <typename T>
void adam_step(Parameters<T>& params, const Parameters<T>& grads, AdamState<T>& state, long t,
               const AdamConfig& cfg) {
  if (t < 1) throw ParameterError("adam_step: step must be >= 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (const auto& [name, g] : grads) {
    Tensor<T>& p = params.at(name);
    if (p.shape != g.shape) {
      throw ShapeError("adam_step: gradient for '" + name + "' has shape " + shape_string(g.shape) +
                       ", parameter is " + shape_string(p.shape));
    }
    if (!state.m.contains(name)) {
      state.m.add(name, Tensor<T>(p.shape));
      state.v.add(name, Tensor<T>(p.shape));
    }
    T* m = state.m.at(name).ptr();
    T* v = state.v.at(name).ptr();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.data[i];
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double step = cfg.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + cfg.epsilon);
      p.data[i] = static_cast<T>(p.data[i] - step);
    }
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be > 0");
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (checkpoint_every < 0) throw ParameterError("checkpoint_every must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"batch_size", batch_size}, {"epochs", epochs},
          {"beta1", beta1}, {"beta2", beta2}, {"epsilon", epsilon}, {"init_seed", init_seed},
          {"shuffle_seed", shuffle_seed}};
}

std::vector<double> TrainLog::series(const std::string& metric) const {
  std::vector<double> out;
  for (const auto& e : epochs) {
    if (metric == "train_loss") out.push_back(e.train_loss);
    else if (metric == "train_accuracy") out.push_back(e.train_accuracy);
    else if (metric == "val_loss") out.push_back(e.val_loss);
    else if (metric == "val_accuracy") out.push_back(e.val_accuracy);
    else throw ParameterError("unknown metric '" + metric + "'");
  }
  return out;
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,train_loss,train_accuracy,val_loss,val_accuracy,wall_seconds\n";
  char buf[160];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.3f\n", e.epoch, e.train_loss,
                  e.train_accuracy, e.val_loss, e.val_accuracy, e.wall_seconds);
    out << buf;
  }
}

WindowStats summarize_last_epochs(const TrainLog& log, int window, const std::string& metric) {
  const std::vector<double> values = log.series(metric);
  if (window < 1 || static_cast<std::size_t>(window) > values.size()) {
    throw ParameterError("window " + std::to_string(window) + " exceeds " +
                         std::to_string(values.size()) + " logged epochs");
  }
  const auto first = values.end() - window;
  double mean = 0.0;
  for (auto it = first; it != values.end(); ++it) mean += *it;
  mean /= window;
  double ss = 0.0;
  for (auto it = first; it != values.end(); ++it) ss += (*it - mean) * (*it - mean);
  return {mean, window > 1 ? std::sqrt(ss / (window - 1)) : 0.0};
}

nlohmann::json train_summary(const TrainLog& log, int window) {
  window = std::min<int>(window, static_cast<int>(log.epochs.size()));
  nlohmann::json j = {{"epochs", log.epochs.size()}, {"window", window}};
  for (const char* m : {"train_loss", "train_accuracy", "val_loss", "val_accuracy"}) {
    const WindowStats s = summarize_last_epochs(log, window, m);
    j[m] = {{"mean", s.mean}, {"std", s.stddev}};
  }
  return j;
}

TrainResult train(const CorpusManifest& manifest, const ClassifierConfig& model,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  model.validate();
  const auto issues = verify_manifest(manifest);
  if (!issues.empty()) throw ParameterError("manifest invalid: " + issues.front());
  if (manifest.select(Split::kTrain).empty()) throw ParameterError("train split is empty");
  const bool has_val = !manifest.select(Split::kVal).empty();

  ImageCache cache;
  ImageCache* cache_ptr = config.cache_images ? &cache : nullptr;
  Parameters<float> params = init_model(model, config.init_seed);
  AdamState<float> adam;
  long step = 0;

  nlohmann::json metadata = {
      {"normalization", "divide-by-255"},
      {"train", config.to_json()},
      {"corpus_fingerprint", manifest_fingerprint(manifest)},
      {"corpus_seed", manifest.config.value("master_seed", std::uint64_t{0})},
  };

  TrainResult result;
  std::vector<ConfusionMatrix> val_confusions;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    BatchStream stream(manifest, Split::kTrain, config.batch_size, config.shuffle_seed, epoch, true,
                       cache_ptr);
    double loss_sum = 0.0;
    long correct = 0;
    long seen = 0;
    Batch batch;
    int batch_index = 0;
    while (stream.next(batch)) {
      ++batch_index;
      Tape<float> tape(true);
      const int input = tape.input(std::move(batch.images));
      const GraphNodes nodes = build_graph(tape, params, model, input, Mode::kTrain);
      const Tensor<float>& logits = tape.value(nodes.logits);
      LossAndGrad<float> lg;
      try {
        lg = cross_entropy_with_grad(logits, batch.labels);
      } catch (const Error& e) {
        throw Error("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index) +
                    ": " + e.what());
      }
      if (!std::isfinite(lg.loss)) {
        throw Error("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index) +
                    ": non-finite loss");
      }
      const int classes = logits.dim(1);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const float* row = logits.ptr() + i * classes;
        int best = 0;
        for (int c = 1; c < classes; ++c) {
          if (row[c] > row[best]) best = c;
        }
        correct += best == batch.labels[i];
      }
      loss_sum += lg.loss * static_cast<double>(batch.size());
      seen += static_cast<long>(batch.size());
      tape.backward(nodes.logits, lg.grad);
      const Parameters<float> grads = collect_gradients(tape, nodes, params);
      adam_step(params, grads, adam, ++step, config.adam());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    if (has_val) {
      const PredictionSet preds = predict(params, model, manifest, Split::kVal, 64, cache_ptr);
      double nll = 0.0;
      long hits = 0;
      for (const auto& p : preds) {
        nll += p.nll;
        hits += p.predicted == p.true_class;
      }
      rec.val_loss = nll / static_cast<double>(preds.size());
      rec.val_accuracy = static_cast<double>(hits) / static_cast<double>(preds.size());
      if (config.epochs - epoch < config.confusion_window) {
        val_confusions.push_back(confusion_matrix(preds, Grouping::kFive));
      }
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const bool cadence = config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0;
    if (!config.checkpoint_path.empty() && (cadence || epoch == config.epochs)) {
      metadata["epoch"] = epoch;
      save_checkpoint(config.checkpoint_path, params, model, metadata);
    }
  }

  metadata["epoch"] = config.epochs;
  result.checkpoint = {model, std::move(params), metadata};
  if (!val_confusions.empty()) result.val_confusion = average_confusion(val_confusions);
  return result;
}

namespace {

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

GridRow grid_row(const std::string& value, const TrainLog& log, int window) {
  window = std::min<int>(window, static_cast<int>(log.epochs.size()));
  return {value, summarize_last_epochs(log, window, "train_accuracy"),
          summarize_last_epochs(log, window, "val_accuracy")};
}

}  // namespace

std::vector<GridRow> lr_grid(const CorpusManifest& manifest, const ClassifierConfig& model,
                             const TrainConfig& base, const std::vector<double>& rates, int window) {
  std::vector<GridRow> rows;
  for (double lr : rates) {
    TrainConfig cfg = base;
    cfg.learning_rate = lr;
    cfg.checkpoint_path.clear();
    rows.push_back(grid_row(format_value(lr), train(manifest, model, cfg).log, window));
  }
  return rows;
}

std::vector<GridRow> batch_grid(const CorpusManifest& manifest, const ClassifierConfig& model,
                                const TrainConfig& base, const std::vector<int>& sizes, int window) {
  std::vector<GridRow> rows;
  for (int b : sizes) {
    TrainConfig cfg = base;
    cfg.batch_size = b;
    cfg.checkpoint_path.clear();
    rows.push_back(grid_row(std::to_string(b), train(manifest, model, cfg).log, window));
  }
  return rows;
}

std::string render_grid_table(const std::string& parameter, const std::vector<GridRow>& rows) {
  auto cell = [](const WindowStats& s) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.3f (%.3f)", s.mean, s.stddev);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "| " << parameter << " |";
  for (const auto& r : rows) out << ' ' << r.value << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < rows.size(); ++i) out << "---|";
  out << "\n| Accuracy (Training) |";
  for (const auto& r : rows) out << ' ' << cell(r.train_accuracy) << " |";
  out << "\n| Accuracy (Validation) |";
  for (const auto& r : rows) out << ' ' << cell(r.val_accuracy) << " |";
  out << '\n';
  return out.str();
}

template double cross_entropy(const Tensor<float>&, const std::vector<int>&);
template double cross_entropy(const Tensor<double>&, const std::vector<int>&);
template double cross_entropy_from_probs(const Tensor<float>&, const std::vector<int>&);
template double cross_entropy_from_probs(const Tensor<double>&, const std::vector<int>&);
template LossAndGrad<float> cross_entropy_with_grad(const Tensor<float>&, const std::vector<int>&);
template LossAndGrad<double> cross_entropy_with_grad(const Tensor<double>&, const std::vector<int>&);
template void adam_step(Parameters<float>&, const Parameters<float>&, AdamState<float>&, long,
                        const AdamConfig&);
template void adam_step(Parameters<double>&, const Parameters<double>&, AdamState<double>&, long,
                        const AdamConfig&);

}  // namespace glitchqa
