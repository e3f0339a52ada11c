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

// Shared fixtures for the unit tests.

#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <unistd.h>

#include "glitchqa/textures.hpp"

namespace glitchqa::testing {

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("glitchqa_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

template <typename F>
TextureAsset make_texture(const std::string& id, int w, int h, F&& color_at) {
  TextureAsset t;
  t.id = id;
  t.pixels = Image(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) t.pixels.set(x, y, color_at(x, y));
  }
  return t;
}

/// Pixel-level black/white checkerboard.
inline TextureAsset checker_texture(const std::string& id = "checker", int n = 8) {
  return make_texture(id, n, n, [](int x, int y) {
    const std::uint8_t v = ((x + y) % 2) ? 255 : 0;
    return Rgb{v, v, v};
  });
}

/// Stripes that vary along x (vertical bands) with the given period.
inline TextureAsset vstripe_texture(const std::string& id, int period, int n = 8) {
  return make_texture(id, n, n, [period](int x, int) {
    const std::uint8_t v = (x % period) < period / 2 ? 0 : 255;
    return Rgb{v, v, v};
  });
}

/// Stripes that vary along y (horizontal bands).
inline TextureAsset hstripe_texture(const std::string& id, int period, int n = 8) {
  return make_texture(id, n, n, [period](int, int y) {
    const std::uint8_t v = (y % period) < period / 2 ? 0 : 255;
    return Rgb{v, v, v};
  });
}

inline TextureAsset flat_texture(const std::string& id, Rgb c, int n = 8) {
  return make_texture(id, n, n, [c](int, int) { return c; });
}

inline std::shared_ptr<const TextureBank> builtin_bank() {
  static const auto bank = std::make_shared<const TextureBank>(TextureBank::builtin());
  return bank;
}

}  // namespace glitchqa::testing
