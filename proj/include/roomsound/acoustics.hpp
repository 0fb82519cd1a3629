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

#ifndef ROOMSOUND_ACOUSTICS_HPP_
#define ROOMSOUND_ACOUSTICS_HPP_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "json.hpp"
#include "roomsound/bands.hpp"
#include "roomsound/room_model.hpp"

namespace roomsound {

struct SimulationParams {
  int ray_count = 10000;
  double cutoff_ms = 1000.0;
  double temperature_c = 20.0;
  double rel_humidity_pct = 50.0;
  double pressure_hpa = 1000.0;
  int image_source_order = 2;
  double histogram_bin_ms = 1.0;
  std::uint64_t rng_seed = 0;
  double receiver_radius_m = 0.5;
  bool air_absorption = true;
  // Worker threads for ray tracing. Results do not depend on this value.
  int worker_count = 1;

  void validate() const;
  std::size_t bin_count() const;
  friend bool operator==(const SimulationParams&, const SimulationParams&) = default;
};

nlohmann::json to_json(const SimulationParams& params);
SimulationParams simulation_params_from_json(const nlohmann::json& doc);

/// Received energy per octave band and time bin. The source emits unit energy
/// per band; a bin holds the energy present inside the receiver sphere,
/// integrated over the bin and divided by the cutoff time.
struct EnergyImpulseResponse {
  std::array<std::vector<double>, kNumBands> bins;
  double bin_ms = 1.0;
  double direct_arrival_ms = 0.0;

  std::size_t bin_count() const { return bins[0].size(); }
  double band_total(std::size_t band) const;
  friend bool operator==(const EnergyImpulseResponse&, const EnergyImpulseResponse&) = default;
};

/// Columnar text: header `time_ms e125 ... e4000`, one row per bin.
void write_columnar(std::ostream& out, const EnergyImpulseResponse& response);
EnergyImpulseResponse read_columnar(std::istream& in);

// c = 331.4 + 0.6 T (m/s). Valid for -30..50 C.
double speed_of_sound(double temperature_c);

/// ISO 9613-1 pure-tone atmospheric attenuation in dB/m.
double air_attenuation_db_per_m(double frequency_hz, double temperature_c, double rel_humidity_pct,
                                double pressure_hpa);

/// Energy attenuation coefficient m (1/m) for one of the six octave bands, so
/// that energy decays as exp(-m * distance).
double air_absorption(int band_hz, double temperature_c, double rel_humidity_pct, double pressure_hpa);

struct EarlyReflection {
  double arrival_ms = 0.0;
  double path_length_m = 0.0;
  int order = 0;
  // Intensity-style energy: product of (1-a)(1-s) per bounce / (4 pi d^2),
  // times air attenuation.
  BandArray energy{};
  std::vector<std::size_t> surfaces;  // reflecting surface indices, source to receiver
};

/// Specular paths up to params.image_source_order, checked for visibility
/// against the furniture boxes. Sorted by arrival time.
std::vector<EarlyReflection> image_source_early(const SceneGeometry& geometry, const SimulationParams& params);

/// Stochastic ray tracing. Purely specular paths with at most
/// image_source_order reflections are skipped so they are not counted twice.
/// Throws std::invalid_argument on degenerate geometry.
struct LateTrace {
  std::array<std::vector<double>, kNumBands> bins;
  // Energy carried by rays alive when they reached the cutoff.
  BandArray in_flight{};
  // Where the emitted energy went. With in_flight these sum to 1 per band.
  BandArray surface_absorbed{};
  BandArray air_absorbed{};
  BandArray dropped{};  // rays stopped at the energy floor
};

LateTrace ray_trace_late(const SceneGeometry& geometry, const SimulationParams& params);

/// Image-source early part plus ray-traced remainder, binned together.
EnergyImpulseResponse simulate(const SceneGeometry& geometry, const SimulationParams& params);

}  // namespace roomsound

#endif  // ROOMSOUND_ACOUSTICS_HPP_
