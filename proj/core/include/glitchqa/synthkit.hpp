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

// Procedural scene compositor and texture-glitch injectors.
//
// A scene is a tiled background plus flat-textured 2-D shapes painted in list
// order. Every object maps screen pixels to texture space through its own
// affine UV transform, so the glitch recipes can be expressed as texture-space
// manipulations of a single target object:
//
//   stretched    UV transform pre-composed with an anisotropic scale
//   lowres       texture replaced by a box-downsampled surrogate
//   missing      target pixels filled with one flat color
//   placeholder  texture swapped for a placeholder asset, same UVs
//
// All functions are pure; the same inputs give bit-identical frames.

#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "glitchqa/common.hpp"
#include "glitchqa/image.hpp"
#include "glitchqa/textures.hpp"

namespace glitchqa {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// uv = matrix * p + offset, with p in pixel-index coordinates (pixel (x, y)
/// maps from point (x, y)). The identity therefore tiles a texture one texel
/// per pixel.
struct UvTransform {
  std::array<double, 4> matrix{1.0, 0.0, 0.0, 1.0};  // row-major 2x2
  Vec2 offset{};

  Vec2 apply(Vec2 p) const {
    return {matrix[0] * p.x + matrix[1] * p.y + offset.x,
            matrix[2] * p.x + matrix[3] * p.y + offset.y};
  }
  double det() const { return matrix[0] * matrix[3] - matrix[1] * matrix[2]; }
};

enum class ShapeKind : std::uint8_t { kQuad, kEllipse, kPolygon };

struct ObjectSpec {
  ShapeKind shape = ShapeKind::kQuad;
  int vertices = 4;        // kPolygon only, 3..8 (regular, convex)
  Vec2 center{0.5, 0.5};   // normalized scene coordinates
  Vec2 scale{0.3, 0.3};    // full extent as a fraction of the frame size
  double rotation = 0.0;   // radians
  std::string texture_id;
  UvTransform uv;
};

struct SceneSpec {
  std::string background_texture_id;
  std::vector<ObjectSpec> objects;  // painter's order
  int target_index = 0;
  int width = 96;
  int height = 96;
  std::uint64_t seed = 0;
};

struct GlitchSpec {
  GlitchClass cls = GlitchClass::kNormal;
  double stretch_direction = 0.0;  // radians, kStretched
  double stretch_factor = 1.0;     // > 1, kStretched
  double lowres_factor = 1.0;      // > 1, kLowRes
  Rgb missing_color{255, 0, 255};
  PlaceholderStyle placeholder_style = PlaceholderStyle::kPattern;
};

struct Provenance {
  std::uint64_t scene_seed = 0;
  GlitchSpec glitch;
  bool lowres_clamped = false;
  int attempts = 1;  // scene draws needed to get a valid mask (synth_sample)
};

struct RenderedFrame {
  Image pixels;
  Mask target_mask;
  GlitchClass label = GlitchClass::kNormal;
  Provenance provenance;
};

inline constexpr double kMinMaskCoverage = 0.01;
inline constexpr double kMaxMaskCoverage = 0.90;

/// Raised when the target mask covers less than 1% or more than 90% of the
/// frame. Carries the offending spec so the caller can redraw.
class ResampleSignal : public Error {
 public:
  ResampleSignal(SceneSpec spec, double coverage);
  const SceneSpec& spec() const { return spec_; }
  double coverage() const { return coverage_; }

 private:
  SceneSpec spec_;
  double coverage_;
};

/// How the target object is painted when it deviates from its spec.
struct TargetAppearance {
  const TextureAsset* texture = nullptr;  // null: use the spec's texture
  std::optional<UvTransform> uv;          // empty: use the spec's transform
  std::optional<Rgb> fill;                // set: flat fill, no texture
};

/// Checks spec invariants and texture resolution. Throws ParameterError or
/// ResolutionError.
void validate_scene(const SceneSpec& spec, const TextureBank& bank);

/// True when the pixel centre of (x, y) lies inside the object's silhouette.
bool covers(const ObjectSpec& obj, int width, int height, int x, int y);

/// Object centre in pixel-index coordinates.
Vec2 object_center_px(const ObjectSpec& obj, int width, int height);

/// Composites the scene without the coverage check. Label is kNormal.
RenderedFrame composite(const SceneSpec& spec, const TextureBank& bank,
                        const TargetAppearance& target = {});

/// Normal render. Throws ResampleSignal for degenerate target coverage.
RenderedFrame render_scene(const SceneSpec& spec, const TextureBank& bank);

/// Scales texture appearance by `factor` along screen direction `direction`
/// about `pivot` (pixel-index coordinates), leaving the orthogonal axis alone.
UvTransform stretch_uv(const UvTransform& uv, Vec2 pivot, double direction, double factor);

RenderedFrame apply_stretch(const SceneSpec& spec, const GlitchSpec& glitch,
                            const TextureBank& bank);
RenderedFrame apply_lowres(const SceneSpec& spec, const GlitchSpec& glitch,
                           const TextureBank& bank);
RenderedFrame apply_missing(const SceneSpec& spec, const GlitchSpec& glitch,
                            const TextureBank& bank);
RenderedFrame apply_placeholder(const SceneSpec& spec, const GlitchSpec& glitch,
                                const TextureBank& bank);

/// Dispatches on glitch.cls; kNormal is render_scene.
RenderedFrame apply_glitch(const SceneSpec& spec, const GlitchSpec& glitch,
                           const TextureBank& bank);

struct SynthConfig {
  std::shared_ptr<const TextureBank> bank;
  int width = 96;
  int height = 96;
  double stretch_min = 3.0;
  double stretch_max = 10.0;
  std::vector<double> lowres_factors{4.0, 8.0, 16.0};
  Rgb missing_color{255, 0, 255};
  PlaceholderStyle placeholder_style = PlaceholderStyle::kPattern;
  int max_attempts = 16;
  int max_distractors = 3;
};

/// Builds the scene for one (object, view). Target shape, texture and texel
/// density depend on object_id alone; placement, scale, rotation and the
/// surrounding clutter depend on (master_seed, object_id, view_id, attempt).
SceneSpec make_scene(std::uint64_t object_id, std::uint64_t view_id, std::uint64_t master_seed,
                     int attempt, const SynthConfig& config);

/// Glitch parameters for one sample, drawn from the configured ranges.
GlitchSpec draw_glitch(GlitchClass cls, std::uint64_t object_id, std::uint64_t view_id,
                       std::uint64_t master_seed, const SynthConfig& config);

/// Full sample synthesis with bounded deterministic redraws on degenerate
/// masks. Throws Error after config.max_attempts failures.
RenderedFrame synth_sample(GlitchClass cls, std::uint64_t object_id, std::uint64_t view_id,
                           std::uint64_t master_seed, const SynthConfig& config);

}  // namespace glitchqa
