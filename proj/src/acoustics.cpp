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

#include "roomsound/acoustics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace roomsound {

void SimulationParams::validate() const {
  if (ray_count < 1) throw std::invalid_argument("ray_count must be >= 1");
  if (!(cutoff_ms > 0.0)) throw std::invalid_argument("cutoff_ms must be > 0");
  if (!(histogram_bin_ms > 0.0)) throw std::invalid_argument("histogram_bin_ms must be > 0");
  const double ratio = cutoff_ms / histogram_bin_ms;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
    throw std::invalid_argument("histogram_bin_ms must divide cutoff_ms");
  }
  if (image_source_order < 0) throw std::invalid_argument("image_source_order must be >= 0");
  if (!(receiver_radius_m > 0.0)) throw std::invalid_argument("receiver_radius_m must be > 0");
  if (temperature_c < -30.0 || temperature_c > 50.0) {
    throw std::invalid_argument("temperature_c outside -30..50");
  }
  if (!(rel_humidity_pct >= 0.0 && rel_humidity_pct <= 100.0)) {
    throw std::invalid_argument("rel_humidity_pct outside 0..100");
  }
  if (!(pressure_hpa > 0.0)) throw std::invalid_argument("pressure_hpa must be > 0");
  if (worker_count < 1) throw std::invalid_argument("worker_count must be >= 1");
}

std::size_t SimulationParams::bin_count() const {
  return static_cast<std::size_t>(std::llround(cutoff_ms / histogram_bin_ms));
}

nlohmann::json to_json(const SimulationParams& p) {
  return {{"ray_count", p.ray_count},
          {"cutoff_ms", p.cutoff_ms},
          {"temperature_c", p.temperature_c},
          {"rel_humidity_pct", p.rel_humidity_pct},
          {"pressure_hpa", p.pressure_hpa},
          {"image_source_order", p.image_source_order},
          {"histogram_bin_ms", p.histogram_bin_ms},
          {"rng_seed", p.rng_seed},
          {"receiver_radius_m", p.receiver_radius_m},
          {"air_absorption", p.air_absorption}};
}

SimulationParams simulation_params_from_json(const nlohmann::json& doc) {
  SimulationParams p;
  p.ray_count = doc.value("ray_count", p.ray_count);
  p.cutoff_ms = doc.value("cutoff_ms", p.cutoff_ms);
  p.temperature_c = doc.value("temperature_c", p.temperature_c);
  p.rel_humidity_pct = doc.value("rel_humidity_pct", p.rel_humidity_pct);
  p.pressure_hpa = doc.value("pressure_hpa", p.pressure_hpa);
  p.image_source_order = doc.value("image_source_order", p.image_source_order);
  p.histogram_bin_ms = doc.value("histogram_bin_ms", p.histogram_bin_ms);
  p.rng_seed = doc.value("rng_seed", p.rng_seed);
  p.receiver_radius_m = doc.value("receiver_radius_m", p.receiver_radius_m);
  p.air_absorption = doc.value("air_absorption", p.air_absorption);
  p.validate();
  return p;
}

double EnergyImpulseResponse::band_total(std::size_t band) const {
  double sum = 0.0;
  for (double e : bins[band]) sum += e;
  return sum;
}

void write_columnar(std::ostream& out, const EnergyImpulseResponse& r) {
  out << "# bin_ms " << r.bin_ms << " direct_arrival_ms " << r.direct_arrival_ms << '\n';
  out << "time_ms";
  for (int hz : kBandHz) out << " e" << hz;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < r.bin_count(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6g", static_cast<double>(i) * r.bin_ms);
    out << buf;
    for (std::size_t b = 0; b < kNumBands; ++b) {
      std::snprintf(buf, sizeof buf, " %.17g", r.bins[b][i]);
      out << buf;
    }
    out << '\n';
  }
}

EnergyImpulseResponse read_columnar(std::istream& in) {
  EnergyImpulseResponse r;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# bin_ms", 0) != 0) {
    throw std::runtime_error("impulse response: missing '# bin_ms' preamble");
  }
  {
    std::istringstream pre(line.substr(1));
    std::string k1, k2;
    pre >> k1 >> r.bin_ms >> k2 >> r.direct_arrival_ms;
    if (pre.fail()) throw std::runtime_error("impulse response: malformed preamble");
  }
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    double t;
    row >> t;
    for (std::size_t b = 0; b < kNumBands; ++b) {
      double e;
      row >> e;
      r.bins[b].push_back(e);
    }
    if (row.fail()) throw std::runtime_error("impulse response: malformed row '" + line + "'");
  }
  return r;
}

double speed_of_sound(double temperature_c) {
  if (!(temperature_c >= -30.0 && temperature_c <= 50.0)) {
    throw std::invalid_argument("temperature outside -30..50 C");
  }
  return 331.4 + 0.6 * temperature_c;
}

double air_attenuation_db_per_m(double f, double temperature_c, double rel_humidity_pct, double pressure_hpa) {
  constexpr double kRefPressureKpa = 101.325;
  constexpr double kRefTemp = 293.15;
  constexpr double kTriplePoint = 273.16;
  const double T = temperature_c + 273.15;
  const double pr = (pressure_hpa / 10.0) / kRefPressureKpa;
  // Molar concentration of water vapour, percent.
  const double c_sat = -6.8346 * std::pow(kTriplePoint / T, 1.261) + 4.6151;
  const double h = rel_humidity_pct * std::pow(10.0, c_sat) / pr;
  const double tr = T / kRefTemp;
  const double fr_o = pr * (24.0 + 4.04e4 * h * (0.02 + h) / (0.391 + h));
  const double fr_n = pr * std::pow(tr, -0.5) * (9.0 + 280.0 * h * std::exp(-4.170 * (std::pow(tr, -1.0 / 3.0) - 1.0)));
  const double f2 = f * f;
  return 8.686 * f2 *
         (1.84e-11 / pr * std::sqrt(tr) +
          std::pow(tr, -2.5) * (0.01275 * std::exp(-2239.1 / T) / (fr_o + f2 / fr_o) +
                                0.1068 * std::exp(-3352.0 / T) / (fr_n + f2 / fr_n)));
}

double air_absorption(int band_hz, double temperature_c, double rel_humidity_pct, double pressure_hpa) {
  if (!band_index(band_hz)) {
    throw std::invalid_argument("unsupported band " + std::to_string(band_hz) + " Hz");
  }
  // dB -> nepers of energy: 10 log10(e) dB per neper.
  return air_attenuation_db_per_m(band_hz, temperature_c, rel_humidity_pct, pressure_hpa) /
         (10.0 * std::numbers::log10e);
}

namespace {

struct Reflector {
  int axis = 0;
  double coord = 0.0;
  double sign = 1.0;  // normal direction along axis (towards air)
  std::vector<std::size_t> surfaces;
};

struct RectBounds {
  double lo[3];
  double hi[3];
};

RectBounds bounds_of(const Surface& s) {
  RectBounds b;
  for (int a = 0; a < 3; ++a) {
    b.lo[a] = s.vertices[0][a];
    b.hi[a] = s.vertices[0][a];
    for (const auto& v : s.vertices) {
      b.lo[a] = std::min(b.lo[a], v[a]);
      b.hi[a] = std::max(b.hi[a], v[a]);
    }
  }
  return b;
}

int normal_axis(const Surface& s) {
  for (int a = 0; a < 3; ++a) {
    if (std::abs(std::abs(s.normal[a]) - 1.0) < 1e-12) return a;
  }
  throw std::invalid_argument("surface '" + s.label + "' is not axis-aligned");
}

bool segment_hits_box_interior(const Vec3& a, const Vec3& b, const Aabb& box) {
  constexpr double kShrink = 1e-7;
  double t0 = 0.0, t1 = 1.0;
  const Vec3 d = b - a;
  for (int ax = 0; ax < 3; ++ax) {
    const double lo = box.lo[ax] + kShrink, hi = box.hi[ax] - kShrink;
    if (std::abs(d[ax]) < 1e-15) {
      if (a[ax] <= lo || a[ax] >= hi) return false;
      continue;
    }
    double ta = (lo - a[ax]) / d[ax];
    double tb = (hi - a[ax]) / d[ax];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 >= t1) return false;
  }
  return true;
}

}  // namespace

std::vector<EarlyReflection> image_source_early(const SceneGeometry& geometry, const SimulationParams& params) {
  params.validate();
  const double c = speed_of_sound(params.temperature_c);
  BandArray air{};
  if (params.air_absorption) {
    for (std::size_t b = 0; b < kNumBands; ++b) {
      air[b] = air_absorption(kBandHz[b], params.temperature_c, params.rel_humidity_pct, params.pressure_hpa);
    }
  }

  std::vector<Reflector> reflectors;
  std::vector<RectBounds> bounds;
  std::map<std::tuple<int, long long, int>, std::size_t> plane_index;
  for (std::size_t i = 0; i < geometry.surfaces.size(); ++i) {
    const Surface& s = geometry.surfaces[i];
    bounds.push_back(bounds_of(s));
    const int axis = normal_axis(s);
    const double coord = s.vertices[0][axis];
    const int sign = s.normal[axis] > 0 ? 1 : -1;
    const auto key = std::make_tuple(axis, std::llround(coord * 1e9), sign);
    auto [it, inserted] = plane_index.emplace(key, reflectors.size());
    if (inserted) reflectors.push_back({axis, coord, static_cast<double>(sign), {}});
    reflectors[it->second].surfaces.push_back(i);
  }

  auto surface_at = [&](const Reflector& r, const Vec3& p) -> long {
    constexpr double kTol = 1e-9;
    for (std::size_t idx : r.surfaces) {
      const auto& b = bounds[idx];
      bool inside = true;
      for (int a = 0; a < 3 && inside; ++a) {
        if (a == r.axis) continue;
        inside = p[a] >= b.lo[a] - kTol && p[a] <= b.hi[a] + kTol;
      }
      if (inside) return static_cast<long>(idx);
    }
    return -1;
  };
  auto visible = [&](const Vec3& a, const Vec3& b) {
    for (const auto& box : geometry.obstacles) {
      if (segment_hits_box_interior(a, b, box)) return false;
    }
    return true;
  };

  const Vec3 src = geometry.source;
  const Vec3 rcv = geometry.receiver;
  std::vector<EarlyReflection> out;
  std::vector<std::size_t> sequence;
  std::vector<Vec3> images = {src};

  auto evaluate = [&]() {
    const std::size_t k = sequence.size();
    std::vector<Vec3> points(k + 2);
    std::vector<std::size_t> hit_surfaces(k);
    points[0] = src;
    points[k + 1] = rcv;
    Vec3 p = rcv;
    for (std::size_t j = k; j-- > 0;) {
      const Reflector& r = reflectors[sequence[j]];
      const Vec3& image = images[j + 1];
      if ((p[r.axis] - r.coord) * r.sign <= 1e-9) return;
      const double denom = image[r.axis] - p[r.axis];
      if (std::abs(denom) < 1e-12) return;
      const double t = (r.coord - p[r.axis]) / denom;
      if (!(t > 1e-12 && t < 1.0 - 1e-12)) return;
      Vec3 x = p + (image - p) * t;
      x[r.axis] = r.coord;
      const long surf = surface_at(r, x);
      if (surf < 0) return;
      hit_surfaces[j] = static_cast<std::size_t>(surf);
      points[j + 1] = x;
      p = x;
    }
    if (k > 0) {
      const Reflector& first = reflectors[sequence[0]];
      if ((src[first.axis] - first.coord) * first.sign <= 1e-9) return;
    }
    for (std::size_t j = 0; j + 1 < points.size(); ++j) {
      if (!visible(points[j], points[j + 1])) return;
    }
    EarlyReflection e;
    e.order = static_cast<int>(k);
    e.path_length_m = norm(images[k] - rcv);
    e.arrival_ms = 1000.0 * e.path_length_m / c;
    e.surfaces = hit_surfaces;
    const double spreading = 1.0 / (4.0 * std::numbers::pi * e.path_length_m * e.path_length_m);
    for (std::size_t b = 0; b < kNumBands; ++b) {
      double gain = spreading * std::exp(-air[b] * e.path_length_m);
      for (std::size_t idx : hit_surfaces) {
        const auto& m = geometry.surfaces[idx].material;
        gain *= (1.0 - m.absorption[b]) * (1.0 - m.scattering[b]);
      }
      e.energy[b] = gain;
    }
    out.push_back(std::move(e));
  };

  std::function<void()> recurse = [&]() {
    evaluate();
    if (static_cast<int>(sequence.size()) >= params.image_source_order) return;
    for (std::size_t r = 0; r < reflectors.size(); ++r) {
      if (!sequence.empty() && sequence.back() == r) continue;
      const Reflector& ref = reflectors[r];
      Vec3 img = images.back();
      img[ref.axis] = 2.0 * ref.coord - img[ref.axis];
      sequence.push_back(r);
      images.push_back(img);
      recurse();
      images.pop_back();
      sequence.pop_back();
    }
  };
  recurse();

  std::stable_sort(out.begin(), out.end(),
                   [](const EarlyReflection& a, const EarlyReflection& b) { return a.arrival_ms < b.arrival_ms; });
  return out;
}

EnergyImpulseResponse simulate(const SceneGeometry& geometry, const SimulationParams& params) {
  params.validate();
  const double c = speed_of_sound(params.temperature_c);
  const double r = params.receiver_radius_m;
  const double cutoff_s = params.cutoff_ms / 1000.0;
  const double sphere_volume = 4.0 / 3.0 * std::numbers::pi * r * r * r;
  // Intensity (per unit area) -> energy inside the sphere integrated over its
  // transit, normalised by the cutoff.
  const double kappa = sphere_volume / (c * cutoff_s);

  LateTrace late = ray_trace_late(geometry, params);
  EnergyImpulseResponse response;
  response.bin_ms = params.histogram_bin_ms;
  response.bins = std::move(late.bins);
  response.direct_arrival_ms = 1000.0 * norm(geometry.source - geometry.receiver) / c;

  const std::size_t nbins = params.bin_count();
  for (const auto& path : image_source_early(geometry, params)) {
    if (path.arrival_ms >= params.cutoff_ms) continue;
    const auto bin = static_cast<std::size_t>(path.arrival_ms / params.histogram_bin_ms);
    if (bin >= nbins) continue;
    const double d = path.path_length_m;
    const double near_field = d < r ? (d * d) / (r * r) : 1.0;
    for (std::size_t b = 0; b < kNumBands; ++b) {
      response.bins[b][bin] += path.energy[b] * kappa * near_field;
    }
  }
  return response;
}

}  // namespace roomsound
