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

#include "glitchqa/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace glitchqa {

namespace fs = std::filesystem;

std::string_view to_string(Split s) { return s == Split::kTrain ? "train" : "val"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  throw ParameterError("unknown split '" + std::string(s) + "'");
}

std::vector<const SampleRecord*> CorpusManifest::select(Split split) const {
  std::vector<const SampleRecord*> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(&r);
  }
  return out;
}

std::vector<std::uint64_t> CorpusManifest::object_ids() const {
  std::set<std::uint64_t> ids;
  for (const auto& r : records) ids.insert(r.object_id);
  return {ids.begin(), ids.end()};
}

ClassCounts class_counts(const CorpusManifest& m) {
  ClassCounts counts;
  counts["train"].fill(0);
  counts["val"].fill(0);
  for (const auto& r : m.records) ++counts[std::string(to_string(r.split))][class_index(r.cls)];
  return counts;
}

std::string make_sample_id(std::uint64_t object_id, std::uint64_t view_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "o%04llu_v%03llu", static_cast<unsigned long long>(object_id),
                static_cast<unsigned long long>(view_id));
  return buf;
}

namespace {

nlohmann::json config_snapshot(const CorpusConfig& c, const SynthConfig& s) {
  return {
      {"n_objects", c.n_objects},
      {"views_per_object", c.views_per_object},
      {"width", c.width},
      {"height", c.height},
      {"placeholder_style", to_string(c.placeholder_style)},
      {"master_seed", c.master_seed},
      {"texture_dir", c.texture_dir},
      {"texture_fingerprint", s.bank->fingerprint()},
      {"stretch_range", {s.stretch_min, s.stretch_max}},
      {"lowres_factors", s.lowres_factors},
      {"missing_color", {s.missing_color.r, s.missing_color.g, s.missing_color.b}},
      {"normalization", "divide-by-255"},
  };
}

nlohmann::json stats_json(const CorpusManifest& m) {
  nlohmann::json stats = nlohmann::json::object();
  for (const auto& [split, counts] : class_counts(m)) {
    nlohmann::json row = nlohmann::json::object();
    for (GlitchClass c : kAllClasses) row[std::string(to_string(c))] = counts[class_index(c)];
    stats[split] = row;
  }
  return stats;
}

nlohmann::json record_json(const SampleRecord& r) {
  return {
      {"sample_id", r.sample_id},
      {"object_id", r.object_id},
      {"view_id", r.view_id},
      {"class", to_string(r.cls)},
      {"placeholder_style", to_string(r.placeholder_style)},
      {"split", to_string(r.split)},
      {"image_path", r.image_path},
      {"mask_path", r.mask_path},
      {"seed", r.seed},
  };
}

SampleRecord record_from_json(const nlohmann::json& j) {
  SampleRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.object_id = j.at("object_id").get<std::uint64_t>();
  r.view_id = j.at("view_id").get<std::uint64_t>();
  r.cls = parse_glitch_class(j.at("class").get<std::string>());
  r.placeholder_style = parse_placeholder_style(j.value("placeholder_style", std::string("pattern")));
  r.split = parse_split(j.at("split").get<std::string>());
  r.image_path = j.at("image_path").get<std::string>();
  r.mask_path = j.value("mask_path", std::string());
  r.seed = j.value("seed", std::uint64_t{0});
  return r;
}

}  // namespace

SynthConfig synth_config_for(const nlohmann::json& c) {
  SynthConfig s;
  const std::string dir = c.value("texture_dir", std::string());
  s.bank = std::make_shared<const TextureBank>(dir.empty() ? TextureBank::builtin()
                                                           : TextureBank::load_directory(dir));
  s.width = c.value("width", 96);
  s.height = c.value("height", 96);
  s.placeholder_style = parse_placeholder_style(c.value("placeholder_style", std::string("pattern")));
  return s;
}

CorpusManifest build_corpus(const CorpusConfig& config, const fs::path& out_dir) {
  if (config.n_objects < 5) throw ParameterError("build_corpus: n_objects must be >= 5");
  if (config.views_per_object < 5 || config.views_per_object % kNumClasses != 0) {
    throw ParameterError("build_corpus: views_per_object must be a positive multiple of 5");
  }
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    if (!config.overwrite) {
      throw IoError("output directory " + out_dir.string() + " is not empty (use overwrite)");
    }
    fs::remove_all(out_dir / "images");
    fs::remove(out_dir / "manifest.jsonl");
  }
  fs::create_directories(out_dir / "images");

  CorpusManifest m;
  m.root = out_dir;
  nlohmann::json partial = {{"width", config.width},
                            {"height", config.height},
                            {"placeholder_style", to_string(config.placeholder_style)},
                            {"texture_dir", config.texture_dir}};
  const SynthConfig synth = synth_config_for(partial);
  m.config = config_snapshot(config, synth);

  for (int obj = 0; obj < config.n_objects; ++obj) {
    for (int view = 0; view < config.views_per_object; ++view) {
      SampleRecord r;
      r.object_id = static_cast<std::uint64_t>(obj);
      r.view_id = static_cast<std::uint64_t>(view);
      r.sample_id = make_sample_id(r.object_id, r.view_id);
      r.cls = class_for_view(r.view_id);
      r.placeholder_style = config.placeholder_style;
      r.image_path = "images/" + r.sample_id + ".png";
      r.mask_path = "images/" + r.sample_id + ".mask.png";
      RenderedFrame frame;
      try {
        frame = synth_sample(r.cls, r.object_id, r.view_id, config.master_seed, synth);
      } catch (const Error& e) {
        throw Error("synthesis failed for " + r.sample_id + ": " + e.what());
      }
      r.seed = frame.provenance.scene_seed;
      write_png(out_dir / r.image_path, frame.pixels);
      write_mask_png(out_dir / r.mask_path, frame.target_mask);
      m.records.push_back(std::move(r));
    }
  }
  write_manifest(m, out_dir / "manifest.jsonl");
  return m;
}

CorpusManifest split_by_object(const CorpusManifest& manifest, double val_fraction,
                               std::uint64_t split_seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ParameterError("val_fraction must lie in (0, 1)");
  }
  std::vector<std::uint64_t> objects = manifest.object_ids();
  const auto n = static_cast<long>(objects.size());
  const long n_val = std::lround(static_cast<double>(n) * val_fraction);
  if (n_val <= 0 || n_val >= n) {
    throw ParameterError("val_fraction " + std::to_string(val_fraction) + " puts " +
                         std::to_string(n_val) + " of " + std::to_string(n) +
                         " objects in val; need at least one on each side");
  }
  auto key = [&](std::uint64_t obj) { return std::make_pair(derive_seed(split_seed, obj), obj); };
  std::sort(objects.begin(), objects.end(),
            [&](std::uint64_t a, std::uint64_t b) { return key(a) < key(b); });
  const std::set<std::uint64_t> val(objects.begin(), objects.begin() + n_val);

  CorpusManifest out = manifest;
  for (auto& r : out.records) r.split = val.count(r.object_id) ? Split::kVal : Split::kTrain;
  out.config["val_fraction"] = val_fraction;
  out.config["split_seed"] = split_seed;
  return out;
}

std::vector<std::string> verify_manifest(const CorpusManifest& m) {
  std::vector<std::string> issues;
  std::set<std::string> ids;
  for (const auto& r : m.records) {
    if (!ids.insert(r.sample_id).second) issues.push_back("duplicate sample_id " + r.sample_id);
  }

  std::map<std::uint64_t, std::set<Split>> splits;
  std::map<std::uint64_t, int> views;
  for (const auto& r : m.records) {
    splits[r.object_id].insert(r.split);
    ++views[r.object_id];
  }
  for (const auto& [obj, s] : splits) {
    if (s.size() > 1) {
      issues.push_back("object " + std::to_string(obj) + " appears in both train and val");
    }
  }
  if (!views.empty()) {
    const int expected = views.begin()->second;
    for (const auto& [obj, n] : views) {
      if (n != expected) {
        issues.push_back("object " + std::to_string(obj) + " has " + std::to_string(n) +
                         " views, expected " + std::to_string(expected));
      }
    }
  }

  for (const auto& [split, counts] : class_counts(m)) {
    int total = 0;
    for (int c : counts) total += c;
    for (int c = 0; c < kNumClasses; ++c) {
      if (std::abs(counts[c] * kNumClasses - total) > kNumClasses) {
        issues.push_back("split " + split + " class " + std::string(to_string(class_from_index(c))) +
                         " has " + std::to_string(counts[c]) + " of " + std::to_string(total) +
                         " samples");
      }
    }
  }

  for (const auto& r : m.records) {
    if (!fs::exists(m.resolve(r))) issues.push_back("missing image " + m.resolve(r).string());
  }
  return issues;
}

void write_manifest(const CorpusManifest& m, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << nlohmann::json{{"version", m.version}, {"config", m.config}, {"stats", stats_json(m)}}.dump()
      << '\n';
  for (const auto& r : m.records) out << record_json(r).dump() << '\n';
  if (!out) throw IoError("short write on " + path.string());
}

CorpusManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  CorpusManifest m;
  m.root = path.parent_path();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (line_no == 1) {
        m.version = j.at("version").get<int>();
        m.config = j.value("config", nlohmann::json::object());
      } else {
        m.records.push_back(record_from_json(j));
      }
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (line_no == 0) throw IoError("empty manifest " + path.string());
  return m;
}

std::uint64_t manifest_fingerprint(const CorpusManifest& m) {
  std::uint64_t h = kFnvOffset;
  auto feed = [&h](const std::string& s) {
    h = fnv1a64({reinterpret_cast<const std::uint8_t*>(s.data()), s.size() + 1}, h);
  };
  for (const auto& r : m.records) {
    feed(r.sample_id);
    feed(std::string(to_string(r.cls)));
    feed(std::string(to_string(r.split)));
    feed(std::to_string(r.seed));
  }
  return h;
}

Tensor<float> images_to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) return Tensor<float>({0, 3, 0, 0});
  const int w = images.front()->width;
  const int h = images.front()->height;
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  Tensor<float> t({static_cast<int>(images.size()), 3, h, w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = *images[n];
    if (img.width != w || img.height != h) throw ShapeError("images in a batch differ in size");
    float* dst = t.ptr() + n * 3 * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      for (int c = 0; c < 3; ++c) dst[c * plane + p] = img.pixels[p * 3 + c] / 255.0f;
    }
  }
  return t;
}

const Image& ImageCache::get(const CorpusManifest& m, const SampleRecord& r) {
  auto it = images_.find(r.sample_id);
  if (it != images_.end()) return it->second;
  Image img;
  try {
    img = read_png(m.resolve(r));
  } catch (const Error& e) {
    throw IoError("cannot decode sample " + r.sample_id + ": " + e.what());
  }
  return images_.emplace(r.sample_id, std::move(img)).first->second;
}

BatchStream::BatchStream(const CorpusManifest& manifest, Split split, int batch_size,
                         std::uint64_t shuffle_seed, int epoch, bool shuffle, ImageCache* cache)
    : manifest_(manifest), order_(manifest.select(split)), batch_size_(batch_size), cache_(cache) {
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  width_ = manifest.config.value("width", 96);
  height_ = manifest.config.value("height", 96);
  if (shuffle) {
    SeededRng rng(derive_seed(shuffle_seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order_.size(); i > 1; --i) {
      std::swap(order_[i - 1], order_[rng.index(i)]);
    }
  }
}

std::size_t BatchStream::num_batches() const {
  return (order_.size() + batch_size_ - 1) / static_cast<std::size_t>(batch_size_);
}

bool BatchStream::next(Batch& out) {
  if (pos_ >= order_.size()) return false;
  const std::size_t end = std::min(order_.size(), pos_ + static_cast<std::size_t>(batch_size_));
  out.records.assign(order_.begin() + static_cast<long>(pos_), order_.begin() + static_cast<long>(end));
  out.labels.clear();
  std::vector<Image> owned;
  std::vector<const Image*> images;
  owned.reserve(end - pos_);
  for (const SampleRecord* r : out.records) {
    out.labels.push_back(class_index(r->cls));
    const Image* img;
    if (cache_) {
      img = &cache_->get(manifest_, *r);
    } else {
      try {
        owned.push_back(read_png(manifest_.resolve(*r)));
      } catch (const Error& e) {
        throw IoError("cannot decode sample " + r->sample_id + ": " + e.what());
      }
      img = &owned.back();
    }
    if (img->width != width_ || img->height != height_) {
      throw ShapeError("sample " + r->sample_id + " is " + std::to_string(img->width) + "x" +
                       std::to_string(img->height) + ", corpus size is " + std::to_string(width_) +
                       "x" + std::to_string(height_));
    }
    images.push_back(img);
  }
  out.images = images_to_tensor(images);
  pos_ = end;
  return true;
}

}  // namespace glitchqa
