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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "glitchqa/app/app.hpp"

namespace glitchqa::app {

namespace fs = std::filesystem;

bool DetectReport::any_flagged() const {
  return std::any_of(records.begin(), records.end(),
                     [](const DetectRecord& r) { return !r.error && r.verdict == Verdict::kFlagGlitch; });
}

nlohmann::json to_json(const DetectRecord& r) {
  nlohmann::json j = {{"path", r.path}};
  if (r.error) {
    j["error"] = *r.error;
    return j;
  }
  j["class"] = to_string(class_from_index(r.predicted));
  j["probabilities"] = r.probabilities;
  j["confidence"] = r.confidence ? nlohmann::json(*r.confidence) : nlohmann::json(nullptr);
  j["verdict"] = to_string(r.verdict);
  j["resized"] = r.resized;
  return j;
}

nlohmann::json DetectReport::summary_json() const {
  nlohmann::json counts = nlohmann::json::object();
  for (GlitchClass c : kAllClasses) counts[std::string(to_string(c))] = class_counts[class_index(c)];
  long verdicts[3] = {0, 0, 0};
  for (const auto& r : records) {
    if (!r.error) ++verdicts[static_cast<int>(r.verdict)];
  }
  return {{"inputs", records.size()},
          {"class_counts", counts},
          {"errors", errors},
          {"verdicts",
           {{"flag-glitch", verdicts[0]}, {"pass", verdicts[1]}, {"abstain-need-more-views", verdicts[2]}}},
          {"wall_seconds", wall_seconds},
          {"images_per_second", images_per_second},
          {"resize_policy", kResizePolicy}};
}

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ".png" &&
            e.path().string().find(".mask.png") == std::string::npos) {
          found.push_back(e.path());
        }
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(in);
    }
  }
  return out;
}

DetectReport run_detect(const Checkpoint& checkpoint, const std::vector<fs::path>& inputs,
                        const ConfidenceModel* confidence, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ParameterError("tau must lie in [0, 1]");
  const auto files = expand_inputs(inputs);
  const int w = checkpoint.config.input_width;
  const int h = checkpoint.config.input_height;
  DetectReport report;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& file : files) {
    DetectRecord rec;
    rec.path = file.string();
    Image img;
    try {
      img = read_png(file);
    } catch (const Error& e) {
      rec.error = e.what();
      ++report.errors;
      report.records.push_back(std::move(rec));
      continue;
    }
    if (img.width != w || img.height != h) {
      img = center_crop_resize(img, w, h);
      rec.resized = true;
    }
    const ForwardOutput<float> fo = forward(checkpoint.params, checkpoint.config, images_to_tensor({&img}));
    rec.probabilities.assign(fo.probabilities.data.begin(), fo.probabilities.data.end());
    rec.predicted = argmax(rec.probabilities);
    ObjectDecision d;
    d.predicted = rec.predicted;
    d.verdict = is_glitch(class_from_index(rec.predicted)) ? Verdict::kFlagGlitch : Verdict::kPass;
    if (confidence) d.confidence = confidence_score(*confidence, fo.embedding.data, rec.predicted);
    d = filter_predictions({d}, tau).front();
    rec.confidence = d.confidence;
    rec.verdict = d.verdict;
    ++report.class_counts[rec.predicted];
    report.records.push_back(std::move(rec));
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const long processed = static_cast<long>(report.records.size()) - report.errors;
  report.images_per_second = report.wall_seconds > 0 ? processed / report.wall_seconds : 0.0;
  return report;
}

void write_detect_report(const DetectReport& report, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : report.records) out << to_json(r).dump() << '\n';
  std::ofstream summary(path.string() + ".summary.json");
  if (!summary) throw IoError("cannot write " + path.string() + ".summary.json");
  summary << report.summary_json().dump(2) << '\n';
}

nlohmann::json BenchResult::to_json() const {
  return {{"iterations", iterations},
          {"median_ms", median_ms},
          {"p95_ms", p95_ms},
          {"images_per_second", images_per_second},
          {"parameters", cost.parameters},
          {"macs", cost.macs}};
}

BenchResult run_bench(const Parameters<float>& params, const ClassifierConfig& config, int iterations,
                      int warmup, std::uint64_t seed) {
  if (iterations < 10) throw ParameterError("bench needs at least 10 iterations");
  Tensor<float> x({1, 3, config.input_height, config.input_width});
  SeededRng rng(seed);
  for (float& v : x.data) v = static_cast<float>(rng.uniform());
  for (int i = 0; i < warmup; ++i) forward(params, config, x);
  std::vector<double> ms;
  ms.reserve(static_cast<std::size_t>(iterations));
  double total = 0.0;
  for (int i = 0; i < iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    forward(params, config, x);
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    total += ms.back();
  }
  std::sort(ms.begin(), ms.end());
  BenchResult r;
  r.iterations = iterations;
  const std::size_t n = ms.size();
  r.median_ms = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  r.p95_ms = ms[static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1];
  r.images_per_second = 1000.0 * iterations / total;
  r.cost = count_cost(config);
  return r;
}

std::pair<int, int> parse_size(const std::string& s) {
  const auto x = s.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t used = 0;
    const int w = std::stoi(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(s);
    const std::string hs = s.substr(x + 1);
    const int h = std::stoi(hs, &used);
    if (used != hs.size() || w < 1 || h < 1) throw std::invalid_argument(s);
    return {w, h};
  } catch (const std::exception&) {
    throw ParameterError("size must look like WxH, got '" + s + "'");
  }
}

}  // namespace glitchqa::app
