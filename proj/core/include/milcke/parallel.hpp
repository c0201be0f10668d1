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

#include <cstddef>
#include <functional>

namespace milcke {

// Worker cap: MILCKE_THREADS if set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t worker_threads();

// Runs fn(i) for i in [0, n), split into contiguous chunks across at most
// worker_threads() threads. Falls back to a plain loop when there are fewer
// than `min_chunk` items per worker.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t min_chunk = 16);

}  // namespace milcke
