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

// Binary checkpoint container.
//
//   "GLQACKPT" | u32 version | u32 header_len | header JSON
//   | u32 tensor_count | { u32 name_len | name | u32 rank | u64 dims[rank]
//   | f32 data[] }* | u64 FNV-1a of every preceding byte
//
// All integers and floats are little-endian.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "glitchqa/net.hpp"

namespace glitchqa {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ClassifierConfig config;
  Parameters<float> params;
  nlohmann::json metadata = nlohmann::json::object();
};

std::vector<std::uint8_t> encode_checkpoint(const Parameters<float>& params,
                                            const ClassifierConfig& config,
                                            const nlohmann::json& metadata);

/// Throws IntegrityError on bad magic, truncation or checksum mismatch.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Writes atomically (temporary file, then rename).
void save_checkpoint(const std::filesystem::path& path, const Parameters<float>& params,
                     const ClassifierConfig& config, const nlohmann::json& metadata);

/// When `expected_family` is set and differs from the stored config, throws
/// ConfigConflictError.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<Family> expected_family = std::nullopt);

}  // namespace glitchqa
