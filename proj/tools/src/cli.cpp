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

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "glitchqa/app/app.hpp"
#include "glitchqa/trainer.hpp"

namespace glitchqa::app {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::uint64_t seed = 0;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) {
    try {
      if constexpr (std::is_integral_v<T>) {
        out.push_back(static_cast<T>(std::stol(item)));
      } else {
        out.push_back(static_cast<T>(std::stod(item)));
      }
    } catch (const std::exception&) {
      throw ParameterError("bad list entry '" + item + "'");
    }
  }
  if (out.empty()) throw ParameterError("empty list '" + s + "'");
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  int objects = 50;
  int views = 40;
  std::string size = "96x96";
  std::string style = "pattern";
  std::string out;
  std::string textures;
  double val_fraction = 0.2;
  std::uint64_t split_seed = 0;
  bool overwrite = false;
};

int cmd_synth(const SynthArgs& a, const Globals& g) {
  CorpusConfig c;
  c.n_objects = a.objects;
  c.views_per_object = a.views;
  std::tie(c.width, c.height) = parse_size(a.size);
  c.placeholder_style = parse_placeholder_style(a.style);
  c.master_seed = g.seed;
  c.texture_dir = a.textures;
  c.overwrite = a.overwrite;
  CorpusManifest m = build_corpus(c, a.out);
  m = split_by_object(m, a.val_fraction, a.split_seed);
  write_manifest(m, fs::path(a.out) / "manifest.jsonl");
  const auto counts = class_counts(m);
  std::printf("wrote %zu samples to %s\n", m.records.size(), (fs::path(a.out) / "manifest.jsonl").c_str());
  for (const auto& [split, row] : counts) {
    std::printf("  %-5s", split.c_str());
    for (GlitchClass cls : kAllClasses) {
      std::printf(" %s=%d", std::string(to_string(cls)).c_str(), row[class_index(cls)]);
    }
    std::printf("\n");
  }
  const auto issues = verify_manifest(m);
  for (const auto& i : issues) std::fprintf(stderr, "manifest: %s\n", i.c_str());
  return issues.empty() ? kExitClean : kExitRuntime;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string arch = "shuffle";
  double width = 0.5;
  int depth = 18;
  double lr = 1e-4;
  int batch = 32;
  int epochs = 30;
  std::string out;
  std::string weights;
  int checkpoint_every = 0;
  int window = 20;
  std::string lr_grid;
  std::string batch_grid;
};

int cmd_train(const TrainArgs& a, const Globals& g) {
  const CorpusManifest m = read_manifest(a.manifest);
  ClassifierConfig model;
  model.family = parse_family(a.arch);
  model.width_multiplier = a.width;
  model.depth = a.depth;
  model.input_width = m.config.value("width", 96);
  model.input_height = m.config.value("height", 96);
  if (!a.weights.empty()) {
    model.init = InitMode::kExternal;
    model.external_path = a.weights;
  }
  TrainConfig tc;
  tc.learning_rate = a.lr;
  tc.batch_size = a.batch;
  tc.epochs = a.epochs;
  tc.init_seed = derive_seed(g.seed, 1);
  tc.shuffle_seed = derive_seed(g.seed, 2);
  tc.checkpoint_every = a.checkpoint_every;
  tc.confusion_window = a.window;

  if (!a.lr_grid.empty() || !a.batch_grid.empty()) {
    if (!a.lr_grid.empty()) {
      const auto rows = lr_grid(m, model, tc, parse_list<double>(a.lr_grid), a.window);
      std::cout << render_grid_table("Learning Rate", rows) << '\n';
    }
    if (!a.batch_grid.empty()) {
      const auto rows = batch_grid(m, model, tc, parse_list<int>(a.batch_grid), a.window);
      std::cout << render_grid_table("Batch Size", rows) << '\n';
    }
    return kExitClean;
  }

  if (a.out.empty()) throw ParameterError("train needs --out");
  tc.checkpoint_path = a.out;
  const TrainResult r = train(m, model, tc, [](const EpochRecord& e) {
    std::fprintf(stderr, "epoch %3d  train loss %.4f acc %.3f  val loss %.4f acc %.3f  (%.1fs)\n", e.epoch,
                 e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy, e.wall_seconds);
  });
  r.log.write_csv(a.out + ".log.csv");
  nlohmann::json summary = train_summary(r.log, a.window);
  if (r.val_confusion) summary["val_confusion"] = to_json(*r.val_confusion);
  write_json(a.out + ".summary.json", summary);
  std::printf("checkpoint %s  val accuracy %.3f (%.3f) over last %d epochs\n", a.out.c_str(),
              summary["val_accuracy"]["mean"].get<double>(), summary["val_accuracy"]["std"].get<double>(),
              summary["window"].get<int>());
  return kExitClean;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string ckpt;
  std::string manifest;
  std::string split = "val";
  std::string group = "five";
  std::string report;
  std::string csv;
  std::string heatmap;
  std::string predictions;
  std::string confidence_out;
};

int cmd_eval(const EvalArgs& a, const Globals&) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const CorpusManifest m = read_manifest(a.manifest);
  const Grouping grouping = parse_grouping(a.group);
  ImageCache cache;
  const auto [report, preds] = evaluate(ck, m, parse_split(a.split), &cache);
  nlohmann::json j = report.to_json();
  j["group"] = to_string(grouping);
  j["split"] = a.split;
  j["selected_accuracy"] = grouping == Grouping::kFive    ? report.accuracy
                           : grouping == Grouping::kThree ? report.accuracy_three
                                                          : report.accuracy_binary;
  if (!a.report.empty()) write_json(a.report, j);
  if (!a.csv.empty()) write_confusion_csv(report.matrix(grouping), a.csv);
  if (!a.heatmap.empty()) write_confusion_png(report.matrix(grouping), a.heatmap);
  if (!a.predictions.empty()) write_predictions(preds, a.predictions);
  if (!a.confidence_out.empty()) {
    const PredictionSet train_preds = predict(ck.params, ck.config, m, Split::kTrain, 64, &cache);
    fit_confidence(train_preds).save(a.confidence_out);
  }
  auto fmt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("undefined"); };
  std::printf("%s split: %zu samples  accuracy(%s) %.4f\n", a.split.c_str(), report.samples,
              std::string(to_string(grouping)).c_str(), j["selected_accuracy"].get<double>());
  std::printf("binary: precision %s  recall %s  fpr %s\n", fmt(report.binary.precision).c_str(),
              fmt(report.binary.recall).c_str(), fmt(report.binary.fpr).c_str());
  return kExitClean;
}

// ---------------------------------------------------------------------------

struct AggregateArgs {
  std::string ckpt;
  std::string manifest;
  std::string k_list = "1,2,10,20";
  std::string split = "val";
  int extra_views = -1;  // -1: enough for the largest k
  std::string out;
};

int cmd_aggregate(const AggregateArgs& a, const Globals&) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const CorpusManifest m = read_manifest(a.manifest);
  const auto ks = parse_list<int>(a.k_list);
  const Split split = parse_split(a.split);
  PredictionSet preds = predict(ck.params, ck.config, m, split, 64);

  const int views = m.config.value("views_per_object", 0);
  const int max_k = *std::max_element(ks.begin(), ks.end());
  int extra = a.extra_views;
  if (extra < 0) extra = std::max(0, max_k * kNumClasses - views);
  extra = (extra + kNumClasses - 1) / kNumClasses * kNumClasses;
  if (extra > 0) {
    std::vector<std::uint64_t> objects;
    for (const auto* r : m.select(split)) {
      if (objects.empty() || objects.back() != r->object_id) objects.push_back(r->object_id);
    }
    std::sort(objects.begin(), objects.end());
    objects.erase(std::unique(objects.begin(), objects.end()), objects.end());
    const PredictionSet more = predict_synthetic_views(ck, m.config, objects, static_cast<std::uint64_t>(views),
                                                       static_cast<std::uint64_t>(views + extra));
    preds.insert(preds.end(), more.begin(), more.end());
  }
  const auto rows = aggregate_sweep(preds, ks);
  nlohmann::json j = nlohmann::json::array();
  std::printf("| Images | Accuracy | Decisions |\n|---|---|---|\n");
  for (const auto& r : rows) {
    if (r.accuracy) {
      std::printf("| %d | %.3f | %ld |\n", r.k, *r.accuracy, r.decisions);
    } else {
      std::printf("| %d | n/a | 0 |\n", r.k);
    }
    j.push_back({{"k", r.k},
                 {"accuracy", r.accuracy ? nlohmann::json(*r.accuracy) : nlohmann::json(nullptr)},
                 {"decisions", r.decisions}});
  }
  if (!a.out.empty()) write_json(a.out, {{"extra_views", extra}, {"rows", j}});
  return kExitClean;
}

// ---------------------------------------------------------------------------

struct DetectArgs {
  std::string ckpt;
  std::vector<std::string> inputs;
  std::string confidence;
  double tau = 0.0;
  std::string report;
};

int cmd_detect(const DetectArgs& a, const Globals&) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  std::optional<ConfidenceModel> model;
  if (!a.confidence.empty()) model = ConfidenceModel::load(a.confidence);
  std::vector<fs::path> inputs(a.inputs.begin(), a.inputs.end());
  const DetectReport r = run_detect(ck, inputs, model ? &*model : nullptr, a.tau);
  if (!a.report.empty()) {
    write_detect_report(r, a.report);
  } else {
    for (const auto& rec : r.records) std::cout << to_json(rec).dump() << '\n';
  }
  std::fprintf(stderr, "%s\n", r.summary_json().dump().c_str());
  return r.any_flagged() ? kExitFlagged : kExitClean;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string ckpt;
  std::string arch = "shuffle";
  double width = 0.5;
  int depth = 18;
  std::string size = "96x96";
  int iters = 50;
  int warmup = 3;
  std::string out;
};

int cmd_bench(const BenchArgs& a, const Globals& g, bool size_given) {
  ClassifierConfig config;
  Parameters<float> params;
  if (!a.ckpt.empty()) {
    Checkpoint ck = load_checkpoint(a.ckpt);
    config = ck.config;
    params = std::move(ck.params);
    if (size_given) {
      const auto [w, h] = parse_size(a.size);
      if (w != config.input_width || h != config.input_height) {
        throw ParameterError("--size differs from the checkpoint input size");
      }
    }
  } else {
    config.family = parse_family(a.arch);
    config.width_multiplier = a.width;
    config.depth = a.depth;
    std::tie(config.input_width, config.input_height) = parse_size(a.size);
    params = init_model(config, g.seed);
  }
  const BenchResult r = run_bench(params, config, a.iters, a.warmup, g.seed);
  std::printf("%s %dx%d  params %llu  MACs/image %llu\n", std::string(to_string(config.family)).c_str(),
              config.input_width, config.input_height, static_cast<unsigned long long>(r.cost.parameters),
              static_cast<unsigned long long>(r.cost.macs));
  std::printf("median %.3f ms  p95 %.3f ms  %.1f images/s over %d iterations\n", r.median_ms, r.p95_ms,
              r.images_per_second, r.iterations);
  if (!a.out.empty()) write_json(a.out, r.to_json());
  return kExitClean;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Texture glitch detection toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Render a balanced synthetic corpus");
  synth->add_option("--objects", sa.objects)->capture_default_str();
  synth->add_option("--views", sa.views, "Views per object (multiple of 5)")->capture_default_str();
  synth->add_option("--size", sa.size, "WxH")->capture_default_str();
  synth->add_option("--placeholder-style", sa.style)->check(CLI::IsMember({"white", "pattern"}))->capture_default_str();
  synth->add_option("--out", sa.out)->required();
  synth->add_option("--textures", sa.textures, "Directory of PNG textures (default: built-in bank)");
  synth->add_option("--val-fraction", sa.val_fraction)->capture_default_str();
  synth->add_option("--split-seed", sa.split_seed)->capture_default_str();
  synth->add_flag("--overwrite", sa.overwrite);

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Train a classifier");
  trn->add_option("--manifest", ta.manifest)->required();
  trn->add_option("--arch", ta.arch)->check(CLI::IsMember({"shuffle", "residual"}))->capture_default_str();
  trn->add_option("--width", ta.width, "Shuffle width multiplier")->capture_default_str();
  trn->add_option("--depth", ta.depth, "Residual depth")->capture_default_str();
  trn->add_option("--lr", ta.lr)->capture_default_str();
  trn->add_option("--batch", ta.batch)->capture_default_str();
  trn->add_option("--epochs", ta.epochs)->capture_default_str();
  trn->add_option("--out", ta.out, "Checkpoint path");
  trn->add_option("--weights", ta.weights, "Initialize from an external checkpoint");
  trn->add_option("--checkpoint-every", ta.checkpoint_every)->capture_default_str();
  trn->add_option("--window", ta.window, "Trailing epochs for summaries")->capture_default_str();
  trn->add_option("--lr-grid", ta.lr_grid, "Comma list; prints a comparison table instead of training once");
  trn->add_option("--batch-grid", ta.batch_grid, "Comma list; prints a comparison table");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  ev->add_option("--ckpt", ea.ckpt)->required();
  ev->add_option("--manifest", ea.manifest)->required();
  ev->add_option("--split", ea.split)->check(CLI::IsMember({"train", "val"}))->capture_default_str();
  ev->add_option("--group", ea.group)->check(CLI::IsMember({"five", "three", "binary"}))->capture_default_str();
  ev->add_option("--report", ea.report, "EvalReport JSON");
  ev->add_option("--csv", ea.csv, "Confusion matrix CSV for --group");
  ev->add_option("--heatmap", ea.heatmap, "Confusion matrix PNG for --group");
  ev->add_option("--predictions", ea.predictions, "PredictionSet JSONL");
  ev->add_option("--confidence-out", ea.confidence_out, "Fit a confidence model on the train split");

  AggregateArgs aa;
  auto* agg = app.add_subcommand("aggregate", "Object-level accuracy versus views aggregated");
  agg->add_option("--ckpt", aa.ckpt)->required();
  agg->add_option("--manifest", aa.manifest)->required();
  agg->add_option("--k-list", aa.k_list)->capture_default_str();
  agg->add_option("--split", aa.split)->check(CLI::IsMember({"train", "val"}))->capture_default_str();
  agg->add_option("--extra-views", aa.extra_views, "Synthesized views per object beyond the corpus (-1: auto)")
      ->capture_default_str();
  agg->add_option("--out", aa.out, "JSON output");

  DetectArgs da;
  auto* det = app.add_subcommand("detect", "Classify images; exit 1 if any glitch is flagged");
  det->add_option("--ckpt", da.ckpt)->required();
  det->add_option("--in", da.inputs, "Image files or directories")->expected(0, -1);
  det->add_option("--confidence", da.confidence, "Confidence model JSON");
  det->add_option("--tau", da.tau)->capture_default_str();
  det->add_option("--report", da.report, "JSONL output (summary goes to <report>.summary.json)");

  BenchArgs ba;
  auto* bn = app.add_subcommand("bench", "Single-image inference latency");
  bn->add_option("--ckpt", ba.ckpt);
  bn->add_option("--arch", ba.arch)->check(CLI::IsMember({"shuffle", "residual"}))->capture_default_str();
  bn->add_option("--width", ba.width)->capture_default_str();
  bn->add_option("--depth", ba.depth)->capture_default_str();
  auto* size_opt = bn->add_option("--size", ba.size)->capture_default_str();
  bn->add_option("--iters", ba.iters)->capture_default_str();
  bn->add_option("--warmup", ba.warmup)->capture_default_str();
  bn->add_option("--out", ba.out, "JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitClean : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(sa, g);
    if (*trn) return cmd_train(ta, g);
    if (*ev) return cmd_eval(ea, g);
    if (*agg) return cmd_aggregate(aa, g);
    if (*det) return cmd_detect(da, g);
    if (*bn) return cmd_bench(ba, g, size_opt->count() > 0);
  } catch (const ParameterError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace glitchqa::app
