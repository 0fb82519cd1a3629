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
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "roomsound/acoustics.hpp"
#include "roomsound/rng.hpp"

namespace roomsound {

namespace {

constexpr std::size_t kRaysPerBlock = 256;
constexpr double kEnergyFloor = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Rect {
  int axis;
  double lo[3];
  double hi[3];
};

// Axis-aligned scene: a box shell with box obstacles. Each face of a box
// holds the surfaces lying on it.
class Scene {
 public:
  explicit Scene(const SceneGeometry& g) : shell_(g.shell), obstacles_(g.obstacles) {
    face_lists_.resize(6 * (1 + obstacles_.size()));
    for (std::size_t i = 0; i < g.surfaces.size(); ++i) {
      const Surface& s = g.surfaces[i];
      if (s.vertices.size() != 4 || !(s.area > 1e-12)) {
        throw std::invalid_argument("degenerate surface '" + s.label + "' (zero area or not a quad)");
      }
      int axis = -1;
      for (int a = 0; a < 3; ++a) {
        if (std::abs(std::abs(s.normal[a]) - 1.0) < 1e-12) axis = a;
      }
      if (axis < 0) throw std::invalid_argument("surface '" + s.label + "' is not axis-aligned");
      Rect r{axis, {}, {}};
      for (int a = 0; a < 3; ++a) {
        r.lo[a] = r.hi[a] = s.vertices[0][a];
        for (const auto& v : s.vertices) {
          r.lo[a] = std::min(r.lo[a], v[a]);
          r.hi[a] = std::max(r.hi[a], v[a]);
        }
      }
      rects_.push_back(r);
      const double coord = r.lo[axis];
      const bool positive_normal = s.normal[axis] > 0;
      long face = -1;
      if (s.kind != SurfaceKind::kFurniture) {
        // Shell normals point inward: the lo face has a positive normal.
        if (positive_normal && std::abs(coord - shell_.lo[axis]) < 1e-9) face = face_id(0, axis, 0);
        if (!positive_normal && std::abs(coord - shell_.hi[axis]) < 1e-9) face = face_id(0, axis, 1);
      } else {
        for (std::size_t o = 0; o < obstacles_.size() && face < 0; ++o) {
          const Aabb& box = obstacles_[o];
          if (!positive_normal && std::abs(coord - box.lo[axis]) < 1e-9) face = face_id(o + 1, axis, 0);
          if (positive_normal && std::abs(coord - box.hi[axis]) < 1e-9) face = face_id(o + 1, axis, 1);
        }
      }
      if (face < 0) throw std::invalid_argument("surface '" + s.label + "' does not lie on a box face");
      face_lists_[static_cast<std::size_t>(face)].push_back(i);
    }
    for (int f = 0; f < 6; ++f) {
      if (face_lists_[static_cast<std::size_t>(f)].empty()) {
        throw std::invalid_argument("room shell is not closed: a box face has no surfaces");
      }
    }
  }

  struct Hit {
    double t = kInf;
    std::size_t surface = 0;
    int axis = 0;
    double coord = 0.0;
  };

  Hit intersect(const Vec3& p, const Vec3& d) const {
    Hit hit;
    int side = 0;
    for (int a = 0; a < 3; ++a) {
      if (d[a] > 0) {
        const double t = (shell_.hi[a] - p[a]) / d[a];
        if (t < hit.t) hit = {t, 0, a, shell_.hi[a]}, side = 1;
      } else if (d[a] < 0) {
        const double t = (shell_.lo[a] - p[a]) / d[a];
        if (t < hit.t) hit = {t, 0, a, shell_.lo[a]}, side = 0;
      }
    }
    std::size_t face = face_id(0, hit.axis, side);
    for (std::size_t o = 0; o < obstacles_.size(); ++o) {
      const Aabb& box = obstacles_[o];
      double t_near = -kInf, t_far = kInf;
      int near_axis = 0, near_side = 0;
      bool miss = false;
      for (int a = 0; a < 3; ++a) {
        if (d[a] == 0.0) {
          if (p[a] <= box.lo[a] || p[a] >= box.hi[a]) {
            miss = true;
            break;
          }
          continue;
        }
        const double inv = 1.0 / d[a];
        double t0 = (box.lo[a] - p[a]) * inv;
        double t1 = (box.hi[a] - p[a]) * inv;
        int entry_side = 0;
        if (t0 > t1) {
          std::swap(t0, t1);
          entry_side = 1;
        }
        if (t0 > t_near) {
          t_near = t0;
          near_axis = a;
          near_side = entry_side;
        }
        t_far = std::min(t_far, t1);
      }
      if (miss || !(t_near < t_far) || t_near <= 1e-10 || t_near >= hit.t) continue;
      hit = {t_near, 0, near_axis, near_side ? box.hi[near_axis] : box.lo[near_axis]};
      face = face_id(o + 1, near_axis, near_side);
    }
    // Pick the surface on the face containing the hit point.
    const auto& list = face_lists_[face];
    hit.surface = list.front();
    if (list.size() > 1) {
      const Vec3 x = p + d * hit.t;
      for (std::size_t idx : list) {
        const Rect& r = rects_[idx];
        bool inside = true;
        for (int a = 0; a < 3 && inside; ++a) {
          if (a == hit.axis) continue;
          inside = x[a] >= r.lo[a] - 1e-9 && x[a] <= r.hi[a] + 1e-9;
        }
        if (inside) {
          hit.surface = idx;
          break;
        }
      }
    }
    return hit;
  }

 private:
  static std::size_t face_id(std::size_t box, int axis, int side) {
    return box * 6 + static_cast<std::size_t>(axis) * 2 + static_cast<std::size_t>(side);
  }

  Aabb shell_;
  std::vector<Aabb> obstacles_;
  std::vector<Rect> rects_;
  std::vector<std::vector<std::size_t>> face_lists_;
};

Vec3 uniform_direction(Rng& rng) {
  const double z = 1.0 - 2.0 * rng.uniform();
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {s * std::cos(phi), s * std::sin(phi), z};
}

// Cosine-weighted direction about the axis-aligned normal +/- e_axis.
Vec3 lambert_direction(Rng& rng, int axis, double sign) {
  const double u1 = rng.uniform();
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  const double r = std::sqrt(u1);
  Vec3 d;
  d[axis] = sign * std::sqrt(std::max(0.0, 1.0 - u1));
  d[(axis + 1) % 3] = r * std::cos(phi);
  d[(axis + 2) % 3] = r * std::sin(phi);
  return d;
}

struct BlockResult {
  std::array<std::vector<double>, kNumBands> bins;
  BandArray in_flight{};
  BandArray surface_absorbed{};
  BandArray air_absorbed{};
  BandArray dropped{};
};

}  // namespace

LateTrace ray_trace_late(const SceneGeometry& geometry, const SimulationParams& params) {
  params.validate();
  const Scene scene(geometry);
  if (!geometry.shell.contains(geometry.source) || !geometry.shell.contains(geometry.receiver)) {
    throw std::invalid_argument("source and receiver must lie strictly inside the room shell");
  }

  const double c = speed_of_sound(params.temperature_c);
  const double cutoff_s = params.cutoff_ms / 1000.0;
  const double max_distance = c * cutoff_s;
  const std::size_t nbins = params.bin_count();
  const double bin_s = params.histogram_bin_ms / 1000.0;
  const double radius = params.receiver_radius_m;
  const double r2 = radius * radius;
  const Vec3 rcv = geometry.receiver;
  const int ism_order = params.image_source_order;
  const auto n_rays = static_cast<std::size_t>(params.ray_count);
  const double ray_energy = 1.0 / static_cast<double>(n_rays);
  const double deposit_scale = 1.0 / (c * cutoff_s);

  BandArray air{};
  if (params.air_absorption) {
    for (std::size_t b = 0; b < kNumBands; ++b) {
      air[b] = air_absorption(kBandHz[b], params.temperature_c, params.rel_humidity_pct, params.pressure_hpa);
    }
  }

  const std::size_t n_blocks = (n_rays + kRaysPerBlock - 1) / kRaysPerBlock;
  std::vector<BlockResult> blocks(n_blocks);

  auto trace_block = [&](std::size_t block) {
    BlockResult& out = blocks[block];
    for (auto& h : out.bins) h.assign(nbins, 0.0);
    const std::size_t first = block * kRaysPerBlock;
    const std::size_t last = std::min(n_rays, first + kRaysPerBlock);
    for (std::size_t band = 0; band < kNumBands; ++band) {
      auto& hist = out.bins[band];
      const double m = air[band];
      for (std::size_t ray = first; ray < last; ++ray) {
        Rng rng(mix_seed(params.rng_seed, ray));
        Vec3 pos = geometry.source;
        Vec3 dir = uniform_direction(rng);
        double energy = ray_energy;
        double travelled = 0.0;
        int reflections = 0;
        bool specular_only = true;
        while (true) {
          const auto hit = scene.intersect(pos, dir);
          if (!(hit.t > 0.0) || !std::isfinite(hit.t)) {
            out.dropped[band] += energy;
            break;
          }
          const double seg = std::min(hit.t, max_distance - travelled);

          if (!(specular_only && reflections <= ism_order)) {
            const Vec3 oc = pos - rcv;
            const double bq = dot(oc, dir);
            const double cq = dot(oc, oc) - r2;
            const double disc = bq * bq - cq;
            if (disc > 0.0) {
              const double s = std::sqrt(disc);
              const double t0 = std::max(-bq - s, 0.0);
              const double t1 = std::min(-bq + s, seg);
              if (t1 > t0) {
                const double mid = 0.5 * (t0 + t1);
                const double arrival = (travelled + mid) / c;
                const auto bin = static_cast<std::size_t>(arrival / bin_s);
                if (bin < nbins) hist[bin] += energy * std::exp(-m * mid) * (t1 - t0) * deposit_scale;
              }
            }
          }

          if (travelled + hit.t >= max_distance) {
            const double left = energy * std::exp(-m * seg);
            out.air_absorbed[band] += energy - left;
            out.in_flight[band] += left;
            break;
          }
          travelled += hit.t;
          const Surface& surface = geometry.surfaces[hit.surface];
          const double incident = energy * std::exp(-m * hit.t);
          out.air_absorbed[band] += energy - incident;
          energy = incident * (1.0 - surface.material.absorption[band]);
          out.surface_absorbed[band] += incident - energy;
          if (energy < kEnergyFloor * ray_energy) {
            out.dropped[band] += energy;
            break;
          }

          pos = pos + dir * hit.t;
          pos[hit.axis] = hit.coord;
          ++reflections;
          const double normal_sign = surface.normal[hit.axis];
          if (rng.uniform() < surface.material.scattering[band]) {
            dir = lambert_direction(rng, hit.axis, normal_sign);
            specular_only = false;
          } else {
            dir[hit.axis] = -dir[hit.axis];
          }
        }
      }
    }
  };

  const auto workers = static_cast<std::size_t>(std::max(1, params.worker_count));
  if (workers == 1 || n_blocks == 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) trace_block(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, n_blocks); ++w) {
      pool.emplace_back([&] {
        for (std::size_t b = next++; b < n_blocks; b = next++) trace_block(b);
      });
    }
  }

  // Fixed-order reduction keeps results independent of the worker count.
  LateTrace result;
  for (auto& h : result.bins) h.assign(nbins, 0.0);
  for (const auto& block : blocks) {
    for (std::size_t band = 0; band < kNumBands; ++band) {
      for (std::size_t i = 0; i < nbins; ++i) result.bins[band][i] += block.bins[band][i];
      result.in_flight[band] += block.in_flight[band];
      result.surface_absorbed[band] += block.surface_absorbed[band];
      result.air_absorbed[band] += block.air_absorbed[band];
      result.dropped[band] += block.dropped[band];
    }
  }
  return result;
}

}  // namespace roomsound
