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

#include <cstdint>
#include <random>
#include <string_view>

namespace milcke {

using Rng = std::mt19937_64;

// Counter-based seed derivation: every stage gets an independent stream from
// (root seed, stage name, counter) so stages reproduce in isolation.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view stage,
                                    std::uint64_t counter = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the stage name
  for (char c : stage) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(root ^ h) + counter);
}

inline Rng make_rng(std::uint64_t root, std::string_view stage, std::uint64_t counter = 0) {
  return Rng(derive_seed(root, stage, counter));
}

}  // namespace milcke
