/*
 * Copyright 2026 The milcke Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "milcke/aggregators.hpp"
#include "milcke/trainer.hpp"

namespace milcke {

// MILCKPT1 checkpoint, little-endian:
//   "MILCKPT1" | u8 variant | u32 R | u32 d | Q (R*d f64) | C (R*d f64) | b (R f64)
// optionally followed by optimizer state:
//   u64 step | first moments (Q, C, b) | second moments (Q, C, b)
inline constexpr char kCheckpointMagic[8] = {'M', 'I', 'L', 'C', 'K', 'P', 'T', '1'};

struct Checkpoint {
  ModelParams params;
  std::optional<AdamWState> optimizer;
};

std::vector<unsigned char> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace milcke
