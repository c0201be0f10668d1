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

#include "milcke/types.hpp"

namespace milcke {

// Intersection over union in pixels; 0 for disjoint or edge-touching boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

// Euclidean distance between box centers.
double centroid_distance(const BoundingBox& a, const BoundingBox& b);

}  // namespace milcke
