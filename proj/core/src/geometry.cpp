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


#include "milcke/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace milcke {

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0 || h <= 0) return 0.0;
  const double inter = w * h;
  return inter / (a.area() + b.area() - inter);
}

double centroid_distance(const BoundingBox& a, const BoundingBox& b) {
  const double dx = (a.x_min + a.x_max) / 2 - (b.x_min + b.x_max) / 2;
  const double dy = (a.y_min + a.y_max) / 2 - (b.y_min + b.y_max) / 2;
  return std::hypot(dx, dy);
}

}  // namespace milcke
