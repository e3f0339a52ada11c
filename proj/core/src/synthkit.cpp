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

#include "glitchqa/synthkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace glitchqa {

namespace {

constexpr double kPi = std::numbers::pi;

// Stream tags keep the scene, clutter and glitch draws independent.
constexpr std::uint64_t kObjectStream = 0x6f626a6563740001ULL;
constexpr std::uint64_t kViewStream = 0x7669657700000002ULL;
constexpr std::uint64_t kGlitchStream = 0x676c697463680003ULL;

inline std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
}

struct LocalFrame {
  double cx, cy, cos_r, sin_r, half_w, half_h;
};

LocalFrame local_frame(const ObjectSpec& obj, int width, int height) {
  return {obj.center.x * width, obj.center.y * height, std::cos(obj.rotation),
          std::sin(obj.rotation), obj.scale.x * width / 2.0, obj.scale.y * height / 2.0};
}

bool inside_polygon(int k, double u, double v) {
  // Regular k-gon inscribed in the unit circle, vertices counter-clockwise
  // starting at angle -pi/2.
  for (int i = 0; i < k; ++i) {
    const double a0 = -kPi / 2 + 2 * kPi * i / k;
    const double a1 = -kPi / 2 + 2 * kPi * (i + 1) / k;
    const double x0 = std::cos(a0), y0 = std::sin(a0);
    const double x1 = std::cos(a1), y1 = std::sin(a1);
    const double cross = (x1 - x0) * (v - y0) - (y1 - y0) * (u - x0);
    if (cross < 0) return false;
  }
  return true;
}

bool covers_local(const ObjectSpec& obj, const LocalFrame& f, int x, int y) {
  const double dx = x + 0.5 - f.cx;
  const double dy = y + 0.5 - f.cy;
  const double u = (f.cos_r * dx + f.sin_r * dy) / f.half_w;
  const double v = (-f.sin_r * dx + f.cos_r * dy) / f.half_h;
  switch (obj.shape) {
    case ShapeKind::kQuad: return std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
    case ShapeKind::kEllipse: return u * u + v * v <= 1.0;
    case ShapeKind::kPolygon: return inside_polygon(obj.vertices, u, v);
  }
  return false;
}

RenderedFrame checked(RenderedFrame frame, const SceneSpec& spec) {
  const double cov = frame.target_mask.coverage();
  if (cov < kMinMaskCoverage || cov > kMaxMaskCoverage) throw ResampleSignal(spec, cov);
  return frame;
}

ObjectSpec random_object(SeededRng& rng, const std::vector<std::string>& ids) {
  ObjectSpec obj;
  switch (rng.index(3)) {
    case 0: obj.shape = ShapeKind::kQuad; break;
    case 1: obj.shape = ShapeKind::kEllipse; break;
    default:
      obj.shape = ShapeKind::kPolygon;
      obj.vertices = 3 + static_cast<int>(rng.index(6));
      break;
  }
  obj.texture_id = ids[rng.index(ids.size())];
  return obj;
}

UvTransform attached_uv(double density, double rotation, Vec2 center_px, Vec2 origin) {
  // Texture rotates with the object: uv = density * R(-rotation) * (p - c) + origin.
  const double c = std::cos(rotation), s = std::sin(rotation);
  UvTransform uv;
  uv.matrix = {density * c, density * s, -density * s, density * c};
  const Vec2 mc = {uv.matrix[0] * center_px.x + uv.matrix[1] * center_px.y,
                   uv.matrix[2] * center_px.x + uv.matrix[3] * center_px.y};
  uv.offset = {origin.x - mc.x, origin.y - mc.y};
  return uv;
}

}  // namespace

ResampleSignal::ResampleSignal(SceneSpec spec, double coverage)
    : Error("target mask coverage " + std::to_string(coverage) + " outside [0.01, 0.90]"),
      spec_(std::move(spec)),
      coverage_(coverage) {}

bool covers(const ObjectSpec& obj, int width, int height, int x, int y) {
  return covers_local(obj, local_frame(obj, width, height), x, y);
}

Vec2 object_center_px(const ObjectSpec& obj, int width, int height) {
  return {obj.center.x * width - 0.5, obj.center.y * height - 0.5};
}

void validate_scene(const SceneSpec& spec, const TextureBank& bank) {
  if (spec.width < 1 || spec.height < 1) throw ParameterError("image size must be positive");
  if (spec.objects.empty() || spec.objects.size() > 16) {
    throw ParameterError("scene must hold 1..16 objects, got " +
                         std::to_string(spec.objects.size()));
  }
  if (spec.target_index < 0 || spec.target_index >= static_cast<int>(spec.objects.size())) {
    throw ParameterError("target_index out of range");
  }
  bank.get(spec.background_texture_id);
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    const ObjectSpec& obj = spec.objects[i];
    bank.get(obj.texture_id);
    if (!(obj.scale.x > 0) || !(obj.scale.y > 0)) {
      throw ParameterError("object " + std::to_string(i) + " has non-positive scale");
    }
    if (obj.shape == ShapeKind::kPolygon && (obj.vertices < 3 || obj.vertices > 8)) {
      throw ParameterError("polygon object needs 3..8 vertices");
    }
    if (!(std::abs(obj.uv.det()) > 1e-9)) {
      throw ParameterError("object " + std::to_string(i) + " has a singular uv transform");
    }
  }
}

RenderedFrame composite(const SceneSpec& spec, const TextureBank& bank,
                        const TargetAppearance& target) {
  validate_scene(spec, bank);
  const int w = spec.width, h = spec.height;

  std::vector<std::int16_t> owner(static_cast<std::size_t>(w) * h, -1);
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    const ObjectSpec& obj = spec.objects[i];
    const LocalFrame f = local_frame(obj, w, h);
    const double reach = std::hypot(f.half_w, f.half_h) + 1.0;
    const int x0 = std::max(0, static_cast<int>(std::floor(f.cx - reach)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(f.cx + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(f.cy - reach)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(f.cy + reach)));
    std::size_t footprint = 0;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (covers_local(obj, f, x, y)) {
          owner[static_cast<std::size_t>(y) * w + x] = static_cast<std::int16_t>(i);
          ++footprint;
        }
      }
    }
    if (footprint == 0) {
      throw ParameterError("object " + std::to_string(i) + " lies entirely outside the frame");
    }
  }

  const TextureAsset& background = bank.get(spec.background_texture_id);
  std::vector<const TextureAsset*> textures(spec.objects.size());
  std::vector<UvTransform> uvs(spec.objects.size());
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    textures[i] = &bank.get(spec.objects[i].texture_id);
    uvs[i] = spec.objects[i].uv;
  }
  const auto t = static_cast<std::size_t>(spec.target_index);
  if (target.texture) textures[t] = target.texture;
  if (target.uv) {
    if (!(std::abs(target.uv->det()) > 1e-9)) {
      throw ParameterError("target uv override is singular");
    }
    uvs[t] = *target.uv;
  }

  RenderedFrame frame;
  frame.pixels = Image(w, h);
  frame.target_mask = Mask(w, h);
  frame.label = GlitchClass::kNormal;
  frame.provenance.scene_seed = spec.seed;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      const int o = owner[idx];
      if (o == spec.target_index) frame.target_mask.bits[idx] = 1;
      if (o == spec.target_index && target.fill) {
        frame.pixels.set(x, y, *target.fill);
        continue;
      }
      std::array<double, 3> c;
      if (o < 0) {
        c = background.sample(x, y);
      } else {
        const Vec2 uv = uvs[static_cast<std::size_t>(o)].apply({static_cast<double>(x),
                                                               static_cast<double>(y)});
        c = textures[static_cast<std::size_t>(o)]->sample(uv.x, uv.y);
      }
      frame.pixels.set(x, y, {to_u8(c[0]), to_u8(c[1]), to_u8(c[2])});
    }
  }
  return frame;
}

RenderedFrame render_scene(const SceneSpec& spec, const TextureBank& bank) {
  return checked(composite(spec, bank), spec);
}

UvTransform stretch_uv(const UvTransform& uv, Vec2 pivot, double direction, double factor) {
  const double dx = std::cos(direction), dy = std::sin(direction);
  const double k = 1.0 / factor - 1.0;
  // Inverse screen-space stretch: I + (1/f - 1) d d^T.
  const std::array<double, 4> inv = {1 + k * dx * dx, k * dx * dy, k * dx * dy, 1 + k * dy * dy};
  const auto& m = uv.matrix;
  UvTransform out;
  out.matrix = {m[0] * inv[0] + m[1] * inv[2], m[0] * inv[1] + m[1] * inv[3],
                m[2] * inv[0] + m[3] * inv[2], m[2] * inv[1] + m[3] * inv[3]};
  // Keep the pivot fixed: offset' = offset + M (pivot - inv * pivot).
  const Vec2 moved = {pivot.x - (inv[0] * pivot.x + inv[1] * pivot.y),
                      pivot.y - (inv[2] * pivot.x + inv[3] * pivot.y)};
  out.offset = {uv.offset.x + m[0] * moved.x + m[1] * moved.y,
                uv.offset.y + m[2] * moved.x + m[3] * moved.y};
  return out;
}

RenderedFrame apply_stretch(const SceneSpec& spec, const GlitchSpec& glitch,
                            const TextureBank& bank) {
  if (!(glitch.stretch_factor > 1.0)) throw ParameterError("stretch_factor must be > 1");
  validate_scene(spec, bank);
  const ObjectSpec& obj = spec.objects[static_cast<std::size_t>(spec.target_index)];
  TargetAppearance look;
  look.uv = stretch_uv(obj.uv, object_center_px(obj, spec.width, spec.height),
                       glitch.stretch_direction, glitch.stretch_factor);
  RenderedFrame frame = checked(composite(spec, bank, look), spec);
  frame.label = GlitchClass::kStretched;
  frame.provenance.glitch = glitch;
  return frame;
}

RenderedFrame apply_lowres(const SceneSpec& spec, const GlitchSpec& glitch,
                           const TextureBank& bank) {
  if (!(glitch.lowres_factor > 1.0)) throw ParameterError("lowres_factor must be > 1");
  validate_scene(spec, bank);
  const ObjectSpec& obj = spec.objects[static_cast<std::size_t>(spec.target_index)];
  const LowResSurrogate surrogate = make_lowres_surrogate(bank.get(obj.texture_id),
                                                          glitch.lowres_factor);
  TargetAppearance look;
  look.texture = &surrogate.texture;
  RenderedFrame frame = checked(composite(spec, bank, look), spec);
  frame.label = GlitchClass::kLowRes;
  frame.provenance.glitch = glitch;
  frame.provenance.lowres_clamped = surrogate.clamped;
  return frame;
}

RenderedFrame apply_missing(const SceneSpec& spec, const GlitchSpec& glitch,
                            const TextureBank& bank) {
  TargetAppearance look;
  look.fill = glitch.missing_color;
  RenderedFrame frame = checked(composite(spec, bank, look), spec);
  frame.label = GlitchClass::kMissing;
  frame.provenance.glitch = glitch;
  return frame;
}

RenderedFrame apply_placeholder(const SceneSpec& spec, const GlitchSpec& glitch,
                                const TextureBank& bank) {
  TargetAppearance look;
  look.texture = glitch.placeholder_style == PlaceholderStyle::kWhite
                     ? &white_placeholder_texture()
                     : &pattern_placeholder_texture();
  RenderedFrame frame = checked(composite(spec, bank, look), spec);
  frame.label = GlitchClass::kPlaceholder;
  frame.provenance.glitch = glitch;
  return frame;
}

RenderedFrame apply_glitch(const SceneSpec& spec, const GlitchSpec& glitch,
                           const TextureBank& bank) {
  switch (glitch.cls) {
    case GlitchClass::kNormal: {
      RenderedFrame f = render_scene(spec, bank);
      f.provenance.glitch = glitch;
      return f;
    }
    case GlitchClass::kStretched: return apply_stretch(spec, glitch, bank);
    case GlitchClass::kLowRes: return apply_lowres(spec, glitch, bank);
    case GlitchClass::kMissing: return apply_missing(spec, glitch, bank);
    case GlitchClass::kPlaceholder: return apply_placeholder(spec, glitch, bank);
  }
  throw ParameterError("unknown glitch class");
}

SceneSpec make_scene(std::uint64_t object_id, std::uint64_t view_id, std::uint64_t master_seed,
                     int attempt, const SynthConfig& config) {
  if (!config.bank || config.bank->size() == 0) {
    throw ParameterError("synth config has no texture bank");
  }
  const auto& ids = config.bank->ids();
  const int w = config.width, h = config.height;

  // Object identity: shape, texture, proportions, texel density.
  SeededRng obj_rng(derive_seed(kObjectStream, object_id));
  ObjectSpec target = random_object(obj_rng, ids);
  const double aspect = obj_rng.uniform(0.75, 1.33);
  const double base_size = obj_rng.uniform(0.38, 0.58);
  const double base_density = obj_rng.uniform(1.0, 1.6);

  // Camera analog for this view.
  SceneSpec scene;
  scene.width = w;
  scene.height = h;
  scene.seed = derive_seed(master_seed, object_id, view_id, static_cast<std::uint64_t>(attempt));
  SeededRng rng(derive_seed(kViewStream, scene.seed));
  scene.background_texture_id = ids[rng.index(ids.size())];

  const int distractors = static_cast<int>(rng.index(static_cast<std::uint64_t>(
      std::max(0, config.max_distractors) + 1)));
  for (int i = 0; i < distractors; ++i) {
    ObjectSpec obj = random_object(rng, ids);
    obj.center = {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
    const double size = rng.uniform(0.15, 0.35);
    const double asp = rng.uniform(0.75, 1.33);
    obj.scale = {size * std::sqrt(asp), size / std::sqrt(asp)};
    obj.rotation = rng.uniform(0.0, 2 * kPi);
    obj.uv = attached_uv(rng.uniform(1.0, 1.6), obj.rotation, object_center_px(obj, w, h),
                         {rng.uniform(0, 64), rng.uniform(0, 64)});
    scene.objects.push_back(std::move(obj));
  }

  const double distance = rng.uniform(0.75, 1.3);
  target.center = {0.5 + rng.uniform(-0.15, 0.15), 0.5 + rng.uniform(-0.15, 0.15)};
  target.scale = {base_size * distance * std::sqrt(aspect), base_size * distance / std::sqrt(aspect)};
  target.rotation = rng.uniform(0.0, 2 * kPi);
  target.uv = attached_uv(base_density / distance, target.rotation,
                          object_center_px(target, w, h), {rng.uniform(0, 64), rng.uniform(0, 64)});
  scene.objects.push_back(std::move(target));
  scene.target_index = static_cast<int>(scene.objects.size()) - 1;
  return scene;
}

GlitchSpec draw_glitch(GlitchClass cls, std::uint64_t object_id, std::uint64_t view_id,
                       std::uint64_t master_seed, const SynthConfig& config) {
  if (!(config.stretch_min > 1.0) || config.stretch_max < config.stretch_min) {
    throw ParameterError("stretch range must satisfy 1 < min <= max");
  }
  if (config.lowres_factors.empty()) throw ParameterError("lowres factor set is empty");
  for (double f : config.lowres_factors) {
    if (!(f > 1.0)) throw ParameterError("lowres factors must be > 1");
  }
  GlitchSpec g;
  g.cls = cls;
  g.missing_color = config.missing_color;
  g.placeholder_style = config.placeholder_style;
  SeededRng rng(derive_seed(kGlitchStream, master_seed, object_id, view_id,
                            static_cast<std::uint64_t>(class_index(cls))));
  if (cls == GlitchClass::kStretched) {
    g.stretch_direction = rng.uniform(0.0, kPi);
    g.stretch_factor = rng.uniform(config.stretch_min, config.stretch_max);
  } else if (cls == GlitchClass::kLowRes) {
    g.lowres_factor = config.lowres_factors[rng.index(config.lowres_factors.size())];
  }
  return g;
}

RenderedFrame synth_sample(GlitchClass cls, std::uint64_t object_id, std::uint64_t view_id,
                           std::uint64_t master_seed, const SynthConfig& config) {
  const GlitchSpec glitch = draw_glitch(cls, object_id, view_id, master_seed, config);
  const int attempts = std::max(1, config.max_attempts);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    const SceneSpec scene = make_scene(object_id, view_id, master_seed, attempt, config);
    try {
      RenderedFrame frame = apply_glitch(scene, glitch, *config.bank);
      frame.provenance.attempts = attempt + 1;
      return frame;
    } catch (const ResampleSignal&) {
      continue;
    }
  }
  throw Error("sample (object " + std::to_string(object_id) + ", view " +
              std::to_string(view_id) + ") has a degenerate mask after " +
              std::to_string(attempts) + " attempts");
}

}  // namespace glitchqa
