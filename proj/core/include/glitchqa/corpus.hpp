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

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glitchqa/synthkit.hpp"
#include "glitchqa/tensor.hpp"

namespace glitchqa {

enum class Split : std::uint8_t { kTrain, kVal };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct SampleRecord {
  std::string sample_id;
  std::uint64_t object_id = 0;
  std::uint64_t view_id = 0;
  GlitchClass cls = GlitchClass::kNormal;
  PlaceholderStyle placeholder_style = PlaceholderStyle::kPattern;
  Split split = Split::kTrain;
  std::string image_path;  // relative to the manifest directory
  std::string mask_path;   // may be empty for external captures
  std::uint64_t seed = 0;  // scene seed that produced the image

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct CorpusConfig {
  int n_objects = 50;
  int views_per_object = 40;
  int width = 96;
  int height = 96;
  PlaceholderStyle placeholder_style = PlaceholderStyle::kPattern;
  std::uint64_t master_seed = 0;
  std::string texture_dir;  // empty: built-in bank
  bool overwrite = false;
};

struct CorpusManifest {
  int version = 1;
  nlohmann::json config = nlohmann::json::object();
  std::vector<SampleRecord> records;
  std::filesystem::path root;  // directory image paths are relative to

  std::filesystem::path resolve(const SampleRecord& r) const { return root / r.image_path; }
  std::vector<const SampleRecord*> select(Split split) const;
  std::vector<std::uint64_t> object_ids() const;  // sorted, unique
};

/// counts[split][class]
using ClassCounts = std::map<std::string, std::array<int, kNumClasses>>;
ClassCounts class_counts(const CorpusManifest& m);

/// Class of a view inside a balanced corpus.
inline GlitchClass class_for_view(std::uint64_t view_id) {
  return class_from_index(static_cast<int>(view_id % kNumClasses));
}

std::string make_sample_id(std::uint64_t object_id, std::uint64_t view_id);

/// Synthesis settings matching a manifest's config snapshot.
SynthConfig synth_config_for(const nlohmann::json& corpus_config);

/// Renders every sample into out_dir/images and writes out_dir/manifest.jsonl.
/// All records start in the train split.
CorpusManifest build_corpus(const CorpusConfig& config, const std::filesystem::path& out_dir);

/// Assigns the lowest-hashed round(n * val_fraction) objects to val.
CorpusManifest split_by_object(const CorpusManifest& manifest, double val_fraction,
                               std::uint64_t split_seed);

/// Human-readable violations; empty iff the manifest is valid.
std::vector<std::string> verify_manifest(const CorpusManifest& manifest);

void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);
CorpusManifest read_manifest(const std::filesystem::path& path);

/// Stable digest of the record list, stored in checkpoints.
std::uint64_t manifest_fingerprint(const CorpusManifest& manifest);

/// Images scaled to [0, 1], N x 3 x H x W.
Tensor<float> images_to_tensor(const std::vector<const Image*>& images);

struct Batch {
  Tensor<float> images;
  std::vector<int> labels;
  std::vector<const SampleRecord*> records;
  std::size_t size() const { return labels.size(); }
};

/// Decoded images shared across epochs and streams.
class ImageCache {
 public:
  const Image& get(const CorpusManifest& m, const SampleRecord& r);

 private:
  std::map<std::string, Image> images_;
};

/// One epoch over a split. Order is a Fisher-Yates permutation seeded by
/// (shuffle_seed, epoch), or manifest order when shuffle is off. The final
/// short batch is kept.
class BatchStream {
 public:
  BatchStream(const CorpusManifest& manifest, Split split, int batch_size,
              std::uint64_t shuffle_seed, int epoch, bool shuffle = true,
              ImageCache* cache = nullptr);

  bool next(Batch& out);
  std::size_t num_batches() const;
  std::size_t num_samples() const { return order_.size(); }

 private:
  const CorpusManifest& manifest_;
  std::vector<const SampleRecord*> order_;
  int batch_size_;
  ImageCache* cache_;
  std::size_t pos_ = 0;
  int width_;
  int height_;
};

}  // namespace glitchqa
