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

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "glitchqa/image.hpp"

namespace glitchqa {

/// Surface image applied to scene objects. Texel (i, j) sits at integer
/// texture coordinate (i, j); sampling wraps in both directions.
struct TextureAsset {
  std::string id;
  Image pixels;
  bool tileable = true;

  int width() const { return pixels.width; }
  int height() const { return pixels.height; }

  /// Bilinear sample with wrap-around addressing, unrounded.
  std::array<double, 3> sample(double u, double v) const;
};

/// Throws ParameterError unless the asset is at least 8x8.
void validate_texture(const TextureAsset& tex);

/// Immutable-after-load collection of textures keyed by id.
class TextureBank {
 public:
  TextureBank() = default;

  void add(TextureAsset tex);
  const TextureAsset& get(const std::string& id) const;
  bool contains(const std::string& id) const { return textures_.count(id) != 0; }
  std::size_t size() const { return textures_.size(); }

  /// Ids in lexicographic order; index-based selection goes through this.
  const std::vector<std::string>& ids() const { return ids_; }

  /// Loads every *.png in `dir` with id = filename stem.
  static TextureBank load_directory(const std::filesystem::path& dir);

  /// Deterministic procedural bank of `count` tileable 64x64 textures drawn
  /// from several families (noise, bricks, cells, speckle, tiles).
  static TextureBank builtin(int count = 48, std::uint64_t seed = 0x7e47u);

  /// Fingerprint over ids and pixels.
  std::uint64_t fingerprint() const;

 private:
  std::map<std::string, TextureAsset> textures_;
  std::vector<std::string> ids_;
};

/// Uniform white 8x8 texture.
const TextureAsset& white_placeholder_texture();

/// 64x64 two-tone checkerboard of 8x8-texel cells with a diagonal cross glyph
/// in alternating cells.
const TextureAsset& pattern_placeholder_texture();

struct LowResSurrogate {
  TextureAsset texture;
  int block = 1;         // box size actually applied
  bool clamped = false;  // requested factor exceeded the texture dimension
};

/// Box-downsamples by round(factor) with round-half-to-even averages, then
/// nearest-neighbour upsamples back to the original size. Factor 1 is the
/// identity.
LowResSurrogate make_lowres_surrogate(const TextureAsset& tex, double factor);

}  // namespace glitchqa
