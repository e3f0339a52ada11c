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

#include "glitchqa/textures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace glitchqa {

namespace {

inline int wrap(int i, int n) {
  const int r = i % n;
  return r < 0 ? r + n : r;
}

inline std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
}

constexpr int kBuiltinSize = 64;

struct Color {
  double r, g, b;
};

Color lerp(const Color& a, const Color& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

// Muted palette: saturation and value are capped so that no built-in texture
// can be mistaken for the magenta fill or the white placeholder.
Color random_color(SeededRng& rng) {
  const double h = rng.uniform() * 6.0;
  const double s = rng.uniform(0.25, 0.7);
  const double v = rng.uniform(90.0, 205.0);
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

/// Tileable value noise with `period` lattice cells across the texture.
class PeriodicNoise {
 public:
  PeriodicNoise(SeededRng& rng, int period) : period_(period), lattice_(period * period) {
    for (double& v : lattice_) v = rng.uniform();
  }
  double at(double x, double y, int size) const {
    const double fx = x * period_ / size;
    const double fy = y * period_ / size;
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const double tx = smooth(fx - x0), ty = smooth(fy - y0);
    const double a = node(x0, y0), b = node(x0 + 1, y0);
    const double c = node(x0, y0 + 1), d = node(x0 + 1, y0 + 1);
    return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
  }

 private:
  static double smooth(double t) { return t * t * (3 - 2 * t); }
  double node(int x, int y) const {
    return lattice_[static_cast<std::size_t>(wrap(y, period_) * period_ + wrap(x, period_))];
  }
  int period_;
  std::vector<double> lattice_;
};

using Field = std::vector<Color>;

Image field_to_image(const Field& f, int size, SeededRng& rng, double grain) {
  Image img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const Color& c = f[static_cast<std::size_t>(y * size + x)];
      const double n = grain * rng.normal();
      img.set(x, y, {to_u8(c.r + n), to_u8(c.g + n), to_u8(c.b + n)});
    }
  }
  return img;
}

Image make_noise(SeededRng& rng, int n) {
  const Color c0 = random_color(rng), c1 = random_color(rng);
  PeriodicNoise o1(rng, 4), o2(rng, 8), o3(rng, 16), o4(rng, 32);
  Field f(static_cast<std::size_t>(n * n));
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double t = 0.35 * o1.at(x, y, n) + 0.25 * o2.at(x, y, n) + 0.2 * o3.at(x, y, n) +
                       0.2 * o4.at(x, y, n);
      f[static_cast<std::size_t>(y * n + x)] = lerp(c0, c1, std::clamp((t - 0.2) / 0.6, 0.0, 1.0));
    }
  }
  return field_to_image(f, n, rng, 14.0);
}

Image make_bricks(SeededRng& rng, int n) {
  const Color brick0 = random_color(rng), brick1 = random_color(rng);
  const Color mortar = lerp(random_color(rng), Color{215, 215, 210}, 0.6);
  const int bh = rng.index(2) == 0 ? 8 : 16;
  const int bw = bh * 2;
  const int rows = n / bh, cols = n / bw;
  std::vector<double> tone(static_cast<std::size_t>(rows * cols));
  for (double& t : tone) t = rng.uniform();
  PeriodicNoise detail(rng, 16);
  Field f(static_cast<std::size_t>(n * n));
  for (int y = 0; y < n; ++y) {
    const int row = y / bh;
    const int shift = (row % 2) * (bw / 2);
    for (int x = 0; x < n; ++x) {
      const int xs = wrap(x + shift, n);
      const int col = xs / bw;
      const bool joint = (y % bh == 0) || (xs % bw == 0);
      Color c = joint ? mortar
                      : lerp(brick0, brick1, tone[static_cast<std::size_t>(row * cols + col)]);
      const double d = 40.0 * (detail.at(x, y, n) - 0.5);
      f[static_cast<std::size_t>(y * n + x)] = {c.r + d, c.g + d, c.b + d};
    }
  }
  return field_to_image(f, n, rng, 12.0);
}

Image make_cells(SeededRng& rng, int n) {
  const Color c0 = random_color(rng), c1 = random_color(rng);
  const Color edge = lerp(random_color(rng), Color{30, 30, 30}, 0.6);
  const int k = 10 + static_cast<int>(rng.index(12));
  std::vector<std::array<double, 3>> pts(static_cast<std::size_t>(k));
  for (auto& p : pts) p = {rng.uniform(0, n), rng.uniform(0, n), rng.uniform()};
  Field f(static_cast<std::size_t>(n * n));
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double d1 = 1e30, d2 = 1e30, tone = 0;
      for (const auto& p : pts) {
        double dx = std::abs(x - p[0]), dy = std::abs(y - p[1]);
        dx = std::min(dx, n - dx);
        dy = std::min(dy, n - dy);
        const double d = std::sqrt(dx * dx + dy * dy);
        if (d < d1) {
          d2 = d1;
          d1 = d;
          tone = p[2];
        } else if (d < d2) {
          d2 = d;
        }
      }
      const Color base = lerp(c0, c1, tone);
      const double e = std::clamp((d2 - d1) / 2.5, 0.0, 1.0);
      f[static_cast<std::size_t>(y * n + x)] = lerp(edge, base, e);
    }
  }
  return field_to_image(f, n, rng, 10.0);
}

Image make_speckle(SeededRng& rng, int n) {
  const Color base = random_color(rng), dot = random_color(rng);
  PeriodicNoise low(rng, 8);
  Field f(static_cast<std::size_t>(n * n));
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double l = 30.0 * (low.at(x, y, n) - 0.5);
      Color c = rng.uniform() < 0.12 ? dot : base;
      f[static_cast<std::size_t>(y * n + x)] = {c.r + l, c.g + l, c.b + l};
    }
  }
  return field_to_image(f, n, rng, 22.0);
}

Image make_tiles(SeededRng& rng, int n) {
  const Color t0 = random_color(rng), t1 = random_color(rng);
  const Color grout = lerp(t0, Color{40, 40, 40}, 0.5);
  const int period = rng.index(2) == 0 ? 8 : 16;
  PeriodicNoise detail(rng, 32);
  Field f(static_cast<std::size_t>(n * n));
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const bool line = (x % period == 0) || (y % period == 0);
      const bool odd = ((x / period) + (y / period)) % 2 == 1;
      Color c = line ? grout : lerp(t0, t1, odd ? 0.35 : 0.0);
      const double d = 36.0 * (detail.at(x, y, n) - 0.5);
      f[static_cast<std::size_t>(y * n + x)] = {c.r + d, c.g + d, c.b + d};
    }
  }
  return field_to_image(f, n, rng, 12.0);
}

}  // namespace

std::array<double, 3> TextureAsset::sample(double u, double v) const {
  const int w = pixels.width, h = pixels.height;
  const double fu = std::floor(u), fv = std::floor(v);
  const double tx = u - fu, ty = v - fv;
  const int x0 = wrap(static_cast<int>(static_cast<long long>(fu) % w), w);
  const int y0 = wrap(static_cast<int>(static_cast<long long>(fv) % h), h);
  const int x1 = x0 + 1 == w ? 0 : x0 + 1;
  const int y1 = y0 + 1 == h ? 0 : y0 + 1;
  const std::uint8_t* p00 = &pixels.pixels[pixels.offset(x0, y0)];
  const std::uint8_t* p10 = &pixels.pixels[pixels.offset(x1, y0)];
  const std::uint8_t* p01 = &pixels.pixels[pixels.offset(x0, y1)];
  const std::uint8_t* p11 = &pixels.pixels[pixels.offset(x1, y1)];
  std::array<double, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const double top = p00[c] * (1 - tx) + p10[c] * tx;
    const double bottom = p01[c] * (1 - tx) + p11[c] * tx;
    out[c] = top * (1 - ty) + bottom * ty;
  }
  return out;
}

void validate_texture(const TextureAsset& tex) {
  if (tex.width() < 8 || tex.height() < 8) {
    throw ParameterError("texture '" + tex.id + "' smaller than 8x8");
  }
  if (tex.pixels.pixels.size() != static_cast<std::size_t>(tex.width()) * tex.height() * 3) {
    throw ShapeError("texture '" + tex.id + "' pixel buffer has wrong size");
  }
}

void TextureBank::add(TextureAsset tex) {
  validate_texture(tex);
  const std::string id = tex.id;
  if (!textures_.emplace(id, std::move(tex)).second) {
    throw ParameterError("duplicate texture id '" + id + "'");
  }
  ids_.insert(std::lower_bound(ids_.begin(), ids_.end(), id), id);
}

const TextureAsset& TextureBank::get(const std::string& id) const {
  auto it = textures_.find(id);
  if (it == textures_.end()) throw ResolutionError("unknown texture id '" + id + "'");
  return it->second;
}

TextureBank TextureBank::load_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ResolutionError("texture directory '" + dir.string() + "' does not exist");
  }
  TextureBank bank;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
    bank.add({entry.path().stem().string(), read_png(entry.path()), true});
  }
  if (bank.size() == 0) throw ResolutionError("no PNG textures in '" + dir.string() + "'");
  return bank;
}

TextureBank TextureBank::builtin(int count, std::uint64_t seed) {
  if (count < 1) throw ParameterError("builtin bank needs at least one texture");
  TextureBank bank;
  using Maker = Image (*)(SeededRng&, int);
  constexpr std::array<Maker, 5> makers = {make_noise, make_bricks, make_cells, make_speckle,
                                           make_tiles};
  constexpr std::array<const char*, 5> names = {"noise", "bricks", "cells", "speckle", "tiles"};
  for (int i = 0; i < count; ++i) {
    SeededRng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const std::size_t family = static_cast<std::size_t>(i) % makers.size();
    char id[48];
    std::snprintf(id, sizeof id, "builtin_%03d_%s", i, names[family]);
    bank.add({id, makers[family](rng, kBuiltinSize), true});
  }
  return bank;
}

std::uint64_t TextureBank::fingerprint() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& id : ids_) {
    h = fnv1a64({reinterpret_cast<const std::uint8_t*>(id.data()), id.size()}, h);
    h = fnv1a64(textures_.at(id).pixels.pixels, h);
  }
  return h;
}

const TextureAsset& white_placeholder_texture() {
  static const TextureAsset tex = [] {
    TextureAsset t{"placeholder_white", Image(8, 8), true};
    std::fill(t.pixels.pixels.begin(), t.pixels.pixels.end(), std::uint8_t{255});
    return t;
  }();
  return tex;
}

const TextureAsset& pattern_placeholder_texture() {
  static const TextureAsset tex = [] {
    constexpr int kCell = 8;
    constexpr int kCells = 8;
    constexpr Rgb kLight{200, 200, 200};
    constexpr Rgb kDark{72, 72, 72};
    TextureAsset t{"placeholder_pattern", Image(kCell * kCells, kCell * kCells), true};
    for (int y = 0; y < kCell * kCells; ++y) {
      for (int x = 0; x < kCell * kCells; ++x) {
        const int cx = x / kCell, cy = y / kCell;
        const int lx = x % kCell, ly = y % kCell;
        const bool light = (cx + cy) % 2 == 0;
        // Cross glyph on the light cells, inset by one texel.
        const bool glyph = light && lx >= 1 && lx <= 6 && ly >= 1 && ly <= 6 &&
                           (lx == ly || lx + ly == kCell - 1);
        t.pixels.set(x, y, (light != glyph) ? kLight : kDark);
      }
    }
    return t;
  }();
  return tex;
}

LowResSurrogate make_lowres_surrogate(const TextureAsset& tex, double factor) {
  if (!(factor >= 1.0)) throw ParameterError("lowres factor must be >= 1");
  LowResSurrogate out;
  const int w = tex.width(), h = tex.height();
  const double rounded = std::nearbyint(factor);
  int block = rounded > 1e6 ? 1'000'000 : static_cast<int>(rounded);
  const int limit = std::min(w, h);
  if (block > limit) {
    block = limit;
    out.clamped = true;
  }
  out.block = block;
  out.texture = {tex.id + "@lowres" + std::to_string(block), Image(w, h), tex.tileable};
  for (int by = 0; by < h; by += block) {
    for (int bx = 0; bx < w; bx += block) {
      const int ex = std::min(bx + block, w), ey = std::min(by + block, h);
      double sum[3] = {0, 0, 0};
      for (int y = by; y < ey; ++y) {
        for (int x = bx; x < ex; ++x) {
          const Rgb c = tex.pixels.at(x, y);
          sum[0] += c.r;
          sum[1] += c.g;
          sum[2] += c.b;
        }
      }
      const double n = static_cast<double>((ex - bx) * (ey - by));
      // nearbyint under the default rounding mode rounds half to even.
      const Rgb avg{to_u8(sum[0] / n), to_u8(sum[1] / n), to_u8(sum[2] / n)};
      for (int y = by; y < ey; ++y) {
        for (int x = bx; x < ex; ++x) out.texture.pixels.set(x, y, avg);
      }
    }
  }
  return out;
}

}  // namespace glitchqa
