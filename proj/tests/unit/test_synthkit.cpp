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

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "glitchqa/synthkit.hpp"
#include "helpers.hpp"

using namespace glitchqa;
using namespace glitchqa::testing;

namespace {

TextureBank fixture_bank() {
  TextureBank bank;
  bank.add(checker_texture());
  bank.add(vstripe_texture("vstripe", 4));
  bank.add(hstripe_texture("hstripe", 4));
  bank.add(flat_texture("gray", {90, 90, 90}));
  bank.add(make_texture("blocks", 8, 8, [](int x, int y) {
    const std::uint8_t v = ((x / 2 + y / 2) % 2) ? 230 : 20;
    return Rgb{v, v, v};
  }));
  return bank;
}

SceneSpec single_object(const std::string& tex, Vec2 scale, double rotation, int size) {
  SceneSpec s;
  s.background_texture_id = "gray";
  ObjectSpec o;
  o.shape = ShapeKind::kQuad;
  o.center = {0.5, 0.5};
  o.scale = scale;
  o.rotation = rotation;
  o.texture_id = tex;
  s.objects = {o};
  s.target_index = 0;
  s.width = size;
  s.height = size;
  return s;
}

// Smallest p > 0 such that row[x + p] == row[x] for every x in [lo, hi - p).
int brute_force_period(const std::vector<int>& row, int lo, int hi) {
  for (int p = 1; p < hi - lo; ++p) {
    bool ok = true;
    for (int x = lo; x + p < hi && ok; ++x) ok = row[x] == row[x + p];
    if (ok) return p;
  }
  return hi - lo;
}

// Normalized autocorrelation of the masked luminance at lag (dx, dy).
double autocorr(const RenderedFrame& f, int dx, int dy) {
  double mean = 0.0;
  int n = 0;
  for (int y = 0; y < f.pixels.height; ++y) {
    for (int x = 0; x < f.pixels.width; ++x) {
      if (f.target_mask.at(x, y)) {
        mean += f.pixels.at(x, y).r;
        ++n;
      }
    }
  }
  mean /= n;
  double num = 0.0, den = 0.0;
  for (int y = 0; y < f.pixels.height; ++y) {
    for (int x = 0; x < f.pixels.width; ++x) {
      if (!f.target_mask.at(x, y)) continue;
      const double a = f.pixels.at(x, y).r - mean;
      den += a * a;
      const int x2 = x + dx, y2 = y + dy;
      if (x2 < f.pixels.width && y2 < f.pixels.height && f.target_mask.at(x2, y2)) {
        num += a * (f.pixels.at(x2, y2).r - mean);
      }
    }
  }
  return num / den;
}

void check_locality(const RenderedFrame& normal, const RenderedFrame& glitched) {
  REQUIRE(normal.target_mask == glitched.target_mask);
  for (int y = 0; y < normal.pixels.height; ++y) {
    for (int x = 0; x < normal.pixels.width; ++x) {
      if (!normal.target_mask.at(x, y)) {
        REQUIRE(normal.pixels.at(x, y) == glitched.pixels.at(x, y));
      }
    }
  }
}

SynthConfig default_config() {
  SynthConfig c;
  c.bank = builtin_bank();
  return c;
}

}  // namespace

TEST_SUITE("synthkit") {

TEST_CASE("identity full-frame quad tiles the texture and is rejected for coverage") {
  const TextureBank bank = fixture_bank();
  const SceneSpec s = single_object("checker", {1.0, 1.0}, 0.0, 64);
  const RenderedFrame f = composite(s, bank);
  const TextureAsset& tex = bank.get("checker");
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      REQUIRE(f.pixels.at(x, y) == tex.pixels.at(x % 8, y % 8));
    }
  }
  CHECK(f.target_mask.count() == 64u * 64u);
  CHECK_THROWS_AS(render_scene(s, bank), ResampleSignal);
  try {
    render_scene(s, bank);
  } catch (const ResampleSignal& e) {
    CHECK(e.coverage() == doctest::Approx(1.0));
    CHECK(e.spec().objects.size() == 1);
  }
}

TEST_CASE("rendering is deterministic") {
  const TextureBank bank = fixture_bank();
  const SceneSpec s = single_object("blocks", {0.5, 0.4}, 0.3, 96);
  CHECK(render_scene(s, bank).pixels == render_scene(s, bank).pixels);
  CHECK(render_scene(s, bank).target_mask == render_scene(s, bank).target_mask);
}

TEST_CASE("rotated square mask matches the analytic area") {
  const TextureBank bank = fixture_bank();
  for (int size : {96, 200}) {
    const SceneSpec s = single_object("blocks", {0.3, 0.3}, std::numbers::pi / 4, size);
    const RenderedFrame f = render_scene(s, bank);
    const double analytic = 0.09 * size * size;
    CHECK(std::abs(static_cast<double>(f.target_mask.count()) - analytic) <= 0.02 * analytic);
  }
}

TEST_CASE("rotated square mask equals the pixel-center lattice count") {
  const TextureBank bank = fixture_bank();
  // At 128 the diagonal edges pass through a row of pixel centers, so the
  // lattice count sits 2.5% above the continuous area.
  for (int size : {96, 128, 200}) {
    const SceneSpec s = single_object("blocks", {0.3, 0.3}, std::numbers::pi / 4, size);
    const double half_diag = 0.15 * std::numbers::sqrt2 * size;
    std::size_t expected = 0;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double d = std::abs(x + 0.5 - size / 2.0) + std::abs(y + 0.5 - size / 2.0);
        expected += d <= half_diag ? 1 : 0;
      }
    }
    CHECK(render_scene(s, bank).target_mask.count() == expected);
  }
  CHECK(render_scene(single_object("blocks", {0.3, 0.3}, std::numbers::pi / 4, 128), bank)
            .target_mask.count() == 1512u);
}

TEST_CASE("stretch by factor one is the identity") {
  const TextureBank bank = fixture_bank();
  const SceneSpec s = single_object("blocks", {0.6, 0.5}, 0.2, 64);
  const ObjectSpec& o = s.objects[0];
  TargetAppearance same;
  same.uv = stretch_uv(o.uv, object_center_px(o, 64, 64), 0.7, 1.0);
  CHECK(composite(s, bank, same).pixels == render_scene(s, bank).pixels);
  GlitchSpec g;
  g.cls = GlitchClass::kStretched;
  g.stretch_factor = 1.0;
  CHECK_THROWS_AS(apply_stretch(s, g, bank), ParameterError);
  g.stretch_factor = 0.5;
  CHECK_THROWS_AS(apply_stretch(s, g, bank), ParameterError);
}

TEST_CASE("stretch along x leaves horizontal stripes and scales vertical stripes") {
  const TextureBank bank = fixture_bank();
  GlitchSpec g;
  g.cls = GlitchClass::kStretched;
  g.stretch_direction = 0.0;
  g.stretch_factor = 4.0;

  const SceneSpec h = single_object("hstripe", {0.9, 0.9}, 0.0, 32);
  CHECK(apply_stretch(h, g, bank).pixels == render_scene(h, bank).pixels);

  const SceneSpec v = single_object("vstripe", {0.9, 0.9}, 0.0, 32);
  const RenderedFrame normal = render_scene(v, bank);
  const RenderedFrame stretched = apply_stretch(v, g, bank);
  const int y = 16;
  int lo = 32, hi = 0;
  std::vector<int> row_n(32), row_s(32);
  for (int x = 0; x < 32; ++x) {
    if (normal.target_mask.at(x, y)) {
      lo = std::min(lo, x);
      hi = std::max(hi, x + 1);
    }
    row_n[x] = normal.pixels.at(x, y).r;
    row_s[x] = stretched.pixels.at(x, y).r;
  }
  const int p_normal = brute_force_period(row_n, lo, hi);
  const int p_stretched = brute_force_period(row_s, lo, hi);
  CHECK(p_normal == 4);
  CHECK(p_stretched == 4 * p_normal);
}

TEST_CASE("stretch increases autocorrelation anisotropy") {
  const TextureBank bank = fixture_bank();
  const SceneSpec s = single_object("blocks", {0.8, 0.8}, 0.0, 64);
  GlitchSpec g;
  g.cls = GlitchClass::kStretched;
  g.stretch_direction = 0.0;
  g.stretch_factor = 5.0;
  const RenderedFrame n = render_scene(s, bank);
  const RenderedFrame st = apply_stretch(s, g, bank);
  const double aniso_n = std::abs(autocorr(n, 1, 0) - autocorr(n, 0, 1));
  const double aniso_s = std::abs(autocorr(st, 1, 0) - autocorr(st, 0, 1));
  CHECK(aniso_s > aniso_n + 0.2);
}

TEST_CASE("lowres surrogate of a pixel checkerboard is uniform mid gray") {
  const TextureAsset tex = checker_texture();
  const LowResSurrogate lr = make_lowres_surrogate(tex, 2.0);
  CHECK(lr.block == 2);
  CHECK_FALSE(lr.clamped);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) CHECK(lr.texture.pixels.at(x, y) == Rgb{128, 128, 128});
  }
  CHECK(make_lowres_surrogate(tex, 1.0).texture.pixels == tex.pixels);
  const LowResSurrogate big = make_lowres_surrogate(tex, 16.0);
  CHECK(big.clamped);
  CHECK(big.block == 8);
  CHECK_THROWS_AS(make_lowres_surrogate(tex, 0.5), ParameterError);
}

TEST_CASE("lowres box average rounds half to even") {
  // Boxes averaging to 0.5 and 1.5 round to 0 and 2.
  const TextureAsset tex = make_texture("ramp", 8, 8, [](int x, int) {
    const std::uint8_t v = static_cast<std::uint8_t>((x < 4) ? (x % 2) : (x % 2) + 1);
    return Rgb{v, v, v};
  });
  const LowResSurrogate lr = make_lowres_surrogate(tex, 2.0);
  CHECK(lr.texture.pixels.at(0, 0).r == 0);
  CHECK(lr.texture.pixels.at(4, 0).r == 2);
}

TEST_CASE("lowres factor checks and clamping provenance") {
  const TextureBank bank = fixture_bank();
  const SceneSpec s = single_object("blocks", {0.5, 0.5}, 0.0, 64);
  GlitchSpec g;
  g.cls = GlitchClass::kLowRes;
  g.lowres_factor = 1.0;
  CHECK_THROWS_AS(apply_lowres(s, g, bank), ParameterError);
  g.lowres_factor = 32.0;
  const RenderedFrame f = apply_lowres(s, g, bank);
  CHECK(f.provenance.lowres_clamped);
  CHECK(f.label == GlitchClass::kLowRes);
  check_locality(render_scene(s, bank), f);
}

TEST_CASE("missing fills the mask with one color") {
  const TextureBank bank = fixture_bank();
  const SceneSpec s = single_object("blocks", {0.5, 0.5}, 0.4, 64);
  GlitchSpec g;
  g.cls = GlitchClass::kMissing;
  const RenderedFrame f = apply_missing(s, g, bank);
  std::set<std::tuple<int, int, int>> colors;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (f.target_mask.at(x, y)) {
        const Rgb c = f.pixels.at(x, y);
        colors.insert({c.r, c.g, c.b});
      }
    }
  }
  REQUIRE(colors.size() == 1);
  CHECK(*colors.begin() == std::tuple<int, int, int>{255, 0, 255});
  check_locality(render_scene(s, bank), f);
}

TEST_CASE("placeholder styles") {
  const TextureBank bank = fixture_bank();
  const SceneSpec s = single_object("blocks", {0.6, 0.6}, 0.1, 64);
  GlitchSpec g;
  g.cls = GlitchClass::kPlaceholder;
  g.placeholder_style = PlaceholderStyle::kWhite;
  const RenderedFrame white = apply_placeholder(s, g, bank);
  g.placeholder_style = PlaceholderStyle::kPattern;
  const RenderedFrame pattern = apply_placeholder(s, g, bank);
  std::set<std::tuple<int, int, int>> colors;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (!white.target_mask.at(x, y)) {
        CHECK(white.pixels.at(x, y) == pattern.pixels.at(x, y));
        continue;
      }
      CHECK(white.pixels.at(x, y) == Rgb{255, 255, 255});
      const Rgb c = pattern.pixels.at(x, y);
      colors.insert({c.r, c.g, c.b});
    }
  }
  CHECK(colors.size() >= 2);
}

TEST_CASE("unknown texture ids do not resolve") {
  const TextureBank bank = fixture_bank();
  SceneSpec s = single_object("nope", {0.5, 0.5}, 0.0, 64);
  CHECK_THROWS_AS(render_scene(s, bank), ResolutionError);
  s = single_object("blocks", {0.5, 0.5}, 0.0, 64);
  s.background_texture_id = "missing";
  CHECK_THROWS_AS(render_scene(s, bank), ResolutionError);
}

TEST_CASE("scene invariants are validated") {
  const TextureBank bank = fixture_bank();
  SceneSpec s = single_object("blocks", {0.5, 0.5}, 0.0, 64);
  s.target_index = 3;
  CHECK_THROWS_AS(validate_scene(s, bank), ParameterError);
  s = single_object("blocks", {0.5, 0.5}, 0.0, 64);
  s.objects[0].uv.matrix = {1.0, 2.0, 0.5, 1.0};
  CHECK_THROWS_AS(validate_scene(s, bank), ParameterError);
  s = single_object("blocks", {0.5, 0.5}, 0.0, 64);
  s.objects.clear();
  CHECK_THROWS_AS(validate_scene(s, bank), ParameterError);
}

TEST_CASE("synth_sample is deterministic and honours object identity") {
  const SynthConfig c = default_config();
  for (GlitchClass cls : kAllClasses) {
    const RenderedFrame a = synth_sample(cls, 3, 7, 11, c);
    const RenderedFrame b = synth_sample(cls, 3, 7, 11, c);
    CHECK(a.pixels == b.pixels);
    CHECK(a.label == cls);
  }
  const SceneSpec v1 = make_scene(5, 1, 9, 0, c);
  const SceneSpec v2 = make_scene(5, 2, 9, 0, c);
  const ObjectSpec& t1 = v1.objects[v1.target_index];
  const ObjectSpec& t2 = v2.objects[v2.target_index];
  CHECK(t1.texture_id == t2.texture_id);
  CHECK(t1.shape == t2.shape);
  CHECK(t1.vertices == t2.vertices);
  const bool moved = t1.center.x != t2.center.x || t1.rotation != t2.rotation;
  CHECK(moved);
}

TEST_CASE("normal class is the plain render of the drawn scene") {
  const SynthConfig c = default_config();
  const RenderedFrame f = synth_sample(GlitchClass::kNormal, 4, 2, 5, c);
  const SceneSpec s = make_scene(4, 2, 5, f.provenance.attempts - 1, c);
  CHECK(render_scene(s, *c.bank).pixels == f.pixels);
}

TEST_CASE("every glitch class is local to the target mask") {
  const SynthConfig c = default_config();
  for (std::uint64_t i = 0; i < 12; ++i) {
    const RenderedFrame normal = synth_sample(GlitchClass::kNormal, i, i * 3 + 1, 77, c);
    CHECK(normal.target_mask.coverage() >= kMinMaskCoverage);
    CHECK(normal.target_mask.coverage() <= kMaxMaskCoverage);
    for (GlitchClass cls : kAllClasses) {
      check_locality(normal, synth_sample(cls, i, i * 3 + 1, 77, c));
    }
  }
}

TEST_CASE("glitch draws stay in the configured ranges") {
  const SynthConfig c = default_config();
  for (std::uint64_t v = 0; v < 50; ++v) {
    const GlitchSpec s = draw_glitch(GlitchClass::kStretched, 1, v, 3, c);
    CHECK(s.stretch_factor >= 3.0);
    CHECK(s.stretch_factor <= 10.0);
    CHECK(s.stretch_direction >= 0.0);
    CHECK(s.stretch_direction < std::numbers::pi);
    const GlitchSpec l = draw_glitch(GlitchClass::kLowRes, 1, v, 3, c);
    CHECK((l.lowres_factor == 4.0 || l.lowres_factor == 8.0 || l.lowres_factor == 16.0));
  }
}

}  // TEST_SUITE
