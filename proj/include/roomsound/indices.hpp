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

#ifndef ROOMSOUND_INDICES_HPP_
#define ROOMSOUND_INDICES_HPP_

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "roomsound/acoustics.hpp"
#include "roomsound/bands.hpp"

namespace roomsound {

/// Backward-integrated decay in dB, 0 dB at the first sample. Times are
/// relative to the first sample.
struct DecayCurve {
  std::vector<double> time_ms;
  std::vector<double> level_db;
};

// Level used in place of -inf once the remaining energy is exactly zero.
inline constexpr double kDecayFloorDb = -300.0;

class InsufficientDecay : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exponential continuation of a truncated histogram: bin energies beyond the
/// end are taken as last_bin * ratio^n, n >= 1.
struct DecayTail {
  double last_bin = 0.0;
  double ratio = 0.0;

  double energy() const { return ratio > 0.0 && ratio < 1.0 ? last_bin * ratio / (1.0 - ratio) : 0.0; }
};

/// Fits the late envelope of `bins` (last 30%, 10-bin windows). Returns a zero
/// tail when the response has already died out or is not decaying.
DecayTail estimate_tail(std::span<const double> bins);

DecayCurve schroeder_integrate(std::span<const double> bins, double bin_ms, double tail_energy = 0.0);

/// Schroeder curve of one band starting at the direct-arrival bin.
DecayCurve schroeder_integrate(const EnergyImpulseResponse& response, std::size_t band, double tail_energy = 0.0);

/// Least-squares line through the samples with upper_db >= level >= lower_db;
/// returns -60 / slope in seconds.
double fit_reverberation(const DecayCurve& curve, double upper_db, double lower_db);

// Early/late windows are measured from the direct-arrival bin.
double clarity_c80(const EnergyImpulseResponse& response, std::size_t band);  // +inf when late energy is 0
double definition_d50(const EnergyImpulseResponse& response, std::size_t band);

inline constexpr std::array<double, 14> kModulationHz = {0.63, 0.8, 1.0,  1.25, 1.6, 2.0, 2.5,
                                                         3.15, 4.0, 5.0, 6.3,  8.0, 10.0, 12.5};

// Male-speech octave weights for 125..4000 Hz (8 kHz dropped, renormalised).
inline constexpr std::array<double, kNumBands> kStiRawWeights = {0.13, 0.14, 0.11, 0.12, 0.19, 0.17};

/// Noise-free modulation transfer values of one band at each modulation
/// frequency; bin energy is placed at the bin centre.
std::array<double, kModulationHz.size()> modulation_transfer(std::span<const double> bins, double bin_ms,
                                                              const DecayTail& tail = {});

double transmission_index(double m);
double sti_from_mtf(const std::array<std::array<double, kModulationHz.size()>, kNumBands>& mtf);
double sti(const EnergyImpulseResponse& response);

double sabine_t(double volume_m3, double absorption_area_m2);
double eyring_t(double volume_m3, double total_area_m2, double mean_alpha);

// kTail: the curve never fell 15 dB below its start within the cutoff and the
// slope of the fitted late envelope was used.
enum class DecayRange { kT30, kT20, kT10, kTail };
std::string to_string(DecayRange range);

struct AcousticIndices {
  BandArray t30{};
  BandArray edt{};
  BandArray c80{};
  BandArray d50{};
  double sti = 0.0;
  // Decay range actually fitted for t30 (T20/T10 when the curve is short).
  std::array<DecayRange, kNumBands> t30_range{};
  std::array<bool, kNumBands> c80_infinite{};
  std::array<bool, kNumBands> edt_from_tail{};

  static constexpr std::size_t kTargetCount = 4 * kNumBands + 1;
  static const std::vector<std::string>& names();

  std::vector<double> flat() const;
  static AcousticIndices from_flat(std::span<const double> values);
  friend bool operator==(const AcousticIndices&, const AcousticIndices&) = default;
};

nlohmann::json to_json(const AcousticIndices& indices);
AcousticIndices indices_from_json(const nlohmann::json& doc);

class IndicesError : public std::runtime_error {
 public:
  explicit IndicesError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct IndexOptions {
  // Extend the Schroeder integral and MTF with an exponential tail when the
  // response is still alive at the cutoff.
  bool compensate_truncation = true;
};

/// All 25 indices. Throws IndicesError listing every band/index failure.
AcousticIndices compute_all(const EnergyImpulseResponse& response, const IndexOptions& options = {});

}  // namespace roomsound

#endif  // ROOMSOUND_INDICES_HPP_
