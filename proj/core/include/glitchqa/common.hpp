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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace glitchqa {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates an operation precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A named resource (texture id, file, tensor) could not be found.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Tensor or image dimensions disagree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Stored bytes failed an integrity check.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// A stored configuration disagrees with the one requested by the caller.
class ConfigConflictError : public Error {
 public:
  using Error::Error;
};

/// Input or output file could not be read, decoded or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

enum class GlitchClass : std::uint8_t {
  kNormal = 0,
  kStretched = 1,
  kLowRes = 2,
  kMissing = 3,
  kPlaceholder = 4,
};

inline constexpr int kNumClasses = 5;

inline constexpr std::array<GlitchClass, kNumClasses> kAllClasses = {
    GlitchClass::kNormal, GlitchClass::kStretched, GlitchClass::kLowRes,
    GlitchClass::kMissing, GlitchClass::kPlaceholder};

constexpr int class_index(GlitchClass c) { return static_cast<int>(c); }

inline GlitchClass class_from_index(int i) {
  if (i < 0 || i >= kNumClasses) {
    throw ParameterError("class index out of range: " + std::to_string(i));
  }
  return static_cast<GlitchClass>(i);
}

constexpr std::string_view to_string(GlitchClass c) {
  switch (c) {
    case GlitchClass::kNormal: return "normal";
    case GlitchClass::kStretched: return "stretched";
    case GlitchClass::kLowRes: return "lowres";
    case GlitchClass::kMissing: return "missing";
    case GlitchClass::kPlaceholder: return "placeholder";
  }
  return "?";
}

inline GlitchClass parse_glitch_class(std::string_view s) {
  for (GlitchClass c : kAllClasses) {
    if (to_string(c) == s) return c;
  }
  throw ParameterError("unknown glitch class '" + std::string(s) + "'");
}

constexpr bool is_glitch(GlitchClass c) { return c != GlitchClass::kNormal; }

enum class PlaceholderStyle : std::uint8_t { kWhite, kPattern };

constexpr std::string_view to_string(PlaceholderStyle s) {
  return s == PlaceholderStyle::kWhite ? "white" : "pattern";
}

inline PlaceholderStyle parse_placeholder_style(std::string_view s) {
  if (s == "white") return PlaceholderStyle::kWhite;
  if (s == "pattern") return PlaceholderStyle::kPattern;
  throw ParameterError("unknown placeholder style '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Hashing and deterministic random numbers
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// FNV-1a over a byte range; `state` allows incremental hashing.
inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                             std::uint64_t state = kFnvOffset) {
  for (std::uint8_t b : bytes) {
    state ^= b;
    state *= kFnvPrime;
  }
  return state;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Order-sensitive mix of several keys into one 64-bit seed.
template <typename... Keys>
constexpr std::uint64_t derive_seed(std::uint64_t base, Keys... keys) {
  std::uint64_t h = splitmix64(base);
  ((h = splitmix64(h ^ static_cast<std::uint64_t>(keys))), ...);
  return h;
}

/// SplitMix64 stream with platform-independent real and index draws.
/// std::uniform_*_distribution is not bit-stable across standard libraries,
/// and the synthetic corpus must be.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Multiply-shift keeps the bias below 2^-32 for
  /// the small n used here.
  std::uint64_t index(std::uint64_t n) {
    if (n == 0) throw ParameterError("SeededRng::index on empty range");
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller (one value per call).
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace glitchqa
