/*
Copyright 2026 The roomsound Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "roomsound/room_model.hpp"

namespace roomsound {

namespace {

using Key = std::array<long long, 3>;

constexpr double kQuantum = 1e-6;

Key quantize(const Vec3& p) {
  return {std::llround(p.x / kQuantum), std::llround(p.y / kQuantum), std::llround(p.z / kQuantum)};
}

// Parameter of p along a->b when p lies strictly inside the segment, else -1.
double interior_param(const Vec3& a, const Vec3& b, const Vec3& p) {
  const Vec3 ab = b - a;
  const double len2 = dot(ab, ab);
  const double t = dot(p - a, ab) / len2;
  if (t <= 1e-9 || t >= 1.0 - 1e-9) return -1.0;
  const Vec3 off = a + ab * t - p;
  return dot(off, off) < 1e-14 ? t : -1.0;
}

}  // namespace

bool shell_is_watertight(const SceneGeometry& geometry) {
  std::vector<const Surface*> shell;
  std::vector<Vec3> vertices;
  for (const auto& s : geometry.surfaces) {
    if (!geometry.is_shell(s)) continue;
    if (s.vertices.size() < 3 || !(s.area > 0.0)) return false;
    shell.push_back(&s);
    vertices.insert(vertices.end(), s.vertices.begin(), s.vertices.end());
  }
  if (shell.empty()) return false;

  std::map<std::pair<Key, Key>, int> counts;
  for (const Surface* s : shell) {
    const auto n = s->vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3& a = s->vertices[i];
      const Vec3& b = s->vertices[(i + 1) % n];
      std::vector<double> cuts = {0.0, 1.0};
      for (const auto& v : vertices) {
        if (double t = interior_param(a, b, v); t > 0.0) cuts.push_back(t);
      }
      std::sort(cuts.begin(), cuts.end());
      cuts.erase(std::unique(cuts.begin(), cuts.end(), [](double x, double y) { return y - x < 1e-9; }),
                 cuts.end());
      for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        Key p = quantize(a + (b - a) * cuts[k]);
        Key q = quantize(a + (b - a) * cuts[k + 1]);
        if (q < p) std::swap(p, q);
        ++counts[{p, q}];
      }
    }
  }
  return std::all_of(counts.begin(), counts.end(), [](const auto& kv) { return kv.second == 2; });
}

}  // namespace roomsound
