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

#include "roomsound/indices.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>

namespace roomsound {

namespace {

std::size_t direct_bin(const EnergyImpulseResponse& r) {
  const auto k = static_cast<std::size_t>(std::floor(r.direct_arrival_ms / r.bin_ms + 1e-9));
  return std::min(k, r.bin_count() == 0 ? 0 : r.bin_count() - 1);
}

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Early (before direct + window) and late energy of one band.
std::pair<double, double> split_energy(const EnergyImpulseResponse& r, std::size_t band, double window_ms) {
  const auto& bins = r.bins.at(band);
  const std::size_t edge =
      std::min(bins.size(), direct_bin(r) + static_cast<std::size_t>(std::llround(window_ms / r.bin_ms)));
  const double early = std::accumulate(bins.begin(), bins.begin() + static_cast<long>(edge), 0.0);
  const double late = std::accumulate(bins.begin() + static_cast<long>(edge), bins.end(), 0.0);
  return {early, late};
}

}  // namespace

DecayTail estimate_tail(std::span<const double> bins) {
  constexpr std::size_t kWindow = 10;
  const std::size_t n = bins.size();
  const std::size_t start = n - (3 * n) / 10;
  const std::size_t windows = (n - start) / kWindow;
  if (windows < 4) return {};
  const std::size_t first = n - windows * kWindow;
  std::vector<double> xs, ys;
  for (std::size_t w = 0; w < windows; ++w) {
    double e = 0.0;
    for (std::size_t i = 0; i < kWindow; ++i) e += bins[first + w * kWindow + i];
    if (!(e > 0.0)) return {};
    xs.push_back(static_cast<double>(w));
    ys.push_back(std::log(e));
  }
  const double mx = sum(xs) / static_cast<double>(windows);
  const double my = sum(ys) / static_cast<double>(windows);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t w = 0; w < windows; ++w) {
    sxy += (xs[w] - mx) * (ys[w] - my);
    sxx += (xs[w] - mx) * (xs[w] - mx);
  }
  const double slope = sxy / sxx;  // per window, natural log
  if (!(slope < 0.0)) return {};
  const double last_window = std::exp(my + slope * (static_cast<double>(windows - 1) - mx));
  const double ratio = std::exp(slope / static_cast<double>(kWindow));
  // Window energy sum_{i<10} a q^i  -> a; then step to the final bin.
  const double first_bin = last_window * (1.0 - ratio) / (1.0 - std::pow(ratio, kWindow));
  return {first_bin * std::pow(ratio, kWindow - 1), ratio};
}

DecayCurve schroeder_integrate(std::span<const double> bins, double bin_ms, double tail_energy) {
  const double total = sum(bins) + tail_energy;
  if (!(total > 0.0)) throw std::invalid_argument("zero-energy band");
  DecayCurve curve;
  curve.time_ms.resize(bins.size());
  curve.level_db.resize(bins.size());
  double remaining = tail_energy;
  for (std::size_t i = bins.size(); i-- > 0;) {
    remaining += bins[i];
    curve.time_ms[i] = static_cast<double>(i) * bin_ms;
    curve.level_db[i] = remaining > 0.0 ? std::max(kDecayFloorDb, 10.0 * std::log10(remaining / total))
                                        : kDecayFloorDb;
  }
  return curve;
}

DecayCurve schroeder_integrate(const EnergyImpulseResponse& response, std::size_t band, double tail_energy) {
  const auto& bins = response.bins.at(band);
  const std::size_t k0 = direct_bin(response);
  return schroeder_integrate(std::span<const double>(bins).subspan(k0), response.bin_ms, tail_energy);
}

namespace {

// Time at which the piecewise-linear decay curve first reaches `level`.
double crossing_time_s(const DecayCurve& curve, double level) {
  for (std::size_t i = 0; i < curve.level_db.size(); ++i) {
    if (curve.level_db[i] > level) continue;
    if (i == 0) return curve.time_ms[0] / 1000.0;
    const double l0 = curve.level_db[i - 1], l1 = curve.level_db[i];
    const double f = (l0 - level) / (l0 - l1);
    return (curve.time_ms[i - 1] + f * (curve.time_ms[i] - curve.time_ms[i - 1])) / 1000.0;
  }
  throw InsufficientDecay("decay curve never reaches " + std::to_string(level) + " dB");
}

}  // namespace

double fit_reverberation(const DecayCurve& curve, double upper_db, double lower_db) {
  if (!(upper_db > lower_db)) throw std::invalid_argument("fit range: upper_db must exceed lower_db");
  const double min_level = curve.level_db.empty()
                               ? 0.0
                               : *std::min_element(curve.level_db.begin(), curve.level_db.end());
  if (min_level > lower_db) {
    throw InsufficientDecay("decay curve stops at " + std::to_string(min_level) + " dB, above " +
                            std::to_string(lower_db) + " dB");
  }
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < curve.level_db.size(); ++i) {
    const double level = curve.level_db[i];
    if (level > upper_db || level < lower_db) continue;
    const double t = curve.time_ms[i] / 1000.0;
    n += 1;
    sx += t;
    sy += level;
    sxx += t * t;
    sxy += t * level;
  }
  if (n < 2) {
    // Decay steeper than the bin width resolves (very dead rooms): use the
    // interpolated crossing times of both limits instead of a regression.
    const double dt = crossing_time_s(curve, lower_db) - crossing_time_s(curve, upper_db);
    if (!(dt > 0.0)) throw InsufficientDecay("fewer than two decay samples between the fit limits");
    return 60.0 * dt / (upper_db - lower_db);
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  if (!(slope < 0.0)) throw InsufficientDecay("decay curve is not decreasing over the fit range");
  return -60.0 / slope;
}

double clarity_c80(const EnergyImpulseResponse& response, std::size_t band) {
  const auto [early, late] = split_energy(response, band, 80.0);
  if (!(early + late > 0.0)) throw std::invalid_argument("zero-energy band");
  if (late <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(early / late);
}

double definition_d50(const EnergyImpulseResponse& response, std::size_t band) {
  const auto [early, late] = split_energy(response, band, 50.0);
  if (!(early + late > 0.0)) throw std::invalid_argument("zero-energy band");
  return early / (early + late);
}

std::array<double, kModulationHz.size()> modulation_transfer(std::span<const double> bins, double bin_ms,
                                                              const DecayTail& tail) {
  const double total = sum(bins) + tail.energy();
  if (!(total > 0.0)) throw std::invalid_argument("zero-energy band");
  const double bin_s = bin_ms / 1000.0;
  std::array<double, kModulationHz.size()> m{};
  for (std::size_t f = 0; f < kModulationHz.size(); ++f) {
    const double w = 2.0 * std::numbers::pi * kModulationHz[f];
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < bins.size(); ++i) {
      if (bins[i] == 0.0) continue;
      acc += bins[i] * std::polar(1.0, -w * (static_cast<double>(i) + 0.5) * bin_s);
    }
    if (tail.energy() > 0.0 && !bins.empty()) {
      const double t_last = (static_cast<double>(bins.size() - 1) + 0.5) * bin_s;
      const std::complex<double> z = tail.ratio * std::polar(1.0, -w * bin_s);
      acc += tail.last_bin * std::polar(1.0, -w * t_last) * z / (1.0 - z);
    }
    m[f] = std::abs(acc) / total;
  }
  return m;
}

double transmission_index(double m) {
  double snr = 15.0;
  if (m < 1.0) snr = m <= 0.0 ? -15.0 : std::clamp(10.0 * std::log10(m / (1.0 - m)), -15.0, 15.0);
  return (snr + 15.0) / 30.0;
}

double sti_from_mtf(const std::array<std::array<double, kModulationHz.size()>, kNumBands>& mtf) {
  const double weight_sum = std::accumulate(kStiRawWeights.begin(), kStiRawWeights.end(), 0.0);
  double value = 0.0;
  for (std::size_t b = 0; b < kNumBands; ++b) {
    double ti = 0.0;
    for (double m : mtf[b]) ti += transmission_index(m);
    value += kStiRawWeights[b] / weight_sum * ti / static_cast<double>(kModulationHz.size());
  }
  return value;
}

double sti(const EnergyImpulseResponse& response) {
  std::array<std::array<double, kModulationHz.size()>, kNumBands> mtf{};
  for (std::size_t b = 0; b < kNumBands; ++b) mtf[b] = modulation_transfer(response.bins[b], response.bin_ms);
  return sti_from_mtf(mtf);
}

double sabine_t(double volume_m3, double absorption_area_m2) {
  if (!(volume_m3 > 0.0) || !(absorption_area_m2 > 0.0)) {
    throw std::invalid_argument("sabine: volume and absorption area must be positive");
  }
  return 0.161 * volume_m3 / absorption_area_m2;
}

double eyring_t(double volume_m3, double total_area_m2, double mean_alpha) {
  if (!(volume_m3 > 0.0) || !(total_area_m2 > 0.0)) {
    throw std::invalid_argument("eyring: volume and area must be positive");
  }
  if (!(mean_alpha > 0.0 && mean_alpha < 1.0)) throw std::invalid_argument("eyring: mean alpha must be in (0,1)");
  return 0.161 * volume_m3 / (-total_area_m2 * std::log1p(-mean_alpha));
}

std::string to_string(DecayRange range) {
  switch (range) {
    case DecayRange::kT30:
      return "T30";
    case DecayRange::kT20:
      return "T20";
    case DecayRange::kT10:
      return "T10";
    case DecayRange::kTail:
      return "tail";
  }
  return "T30";
}

const std::vector<std::string>& AcousticIndices::names() {
  static const std::vector<std::string> kNames = [] {
    std::vector<std::string> out;
    for (const char* index : {"t30", "edt", "c80", "d50"}) {
      for (std::size_t b = 0; b < kNumBands; ++b) out.push_back(std::string(index) + "_" + band_label(b));
    }
    out.push_back("sti");
    return out;
  }();
  return kNames;
}

std::vector<double> AcousticIndices::flat() const {
  std::vector<double> out;
  out.reserve(kTargetCount);
  for (const auto* arr : {&t30, &edt, &c80, &d50}) out.insert(out.end(), arr->begin(), arr->end());
  out.push_back(sti);
  return out;
}

AcousticIndices AcousticIndices::from_flat(std::span<const double> v) {
  if (v.size() != kTargetCount) throw std::invalid_argument("expected 25 index values");
  AcousticIndices a;
  std::size_t k = 0;
  for (auto* arr : {&a.t30, &a.edt, &a.c80, &a.d50}) {
    for (auto& x : *arr) x = v[k++];
  }
  a.sti = v[k];
  for (std::size_t b = 0; b < kNumBands; ++b) a.c80_infinite[b] = std::isinf(a.c80[b]);
  return a;
}

nlohmann::json to_json(const AcousticIndices& a) {
  nlohmann::json doc = nlohmann::json::object();
  const auto values = a.flat();
  const auto& names = AcousticIndices::names();
  for (std::size_t i = 0; i < values.size(); ++i) {
    doc[names[i]] = std::isfinite(values[i]) ? nlohmann::json(values[i]) : nlohmann::json(nullptr);
  }
  nlohmann::json flags = nlohmann::json::object();
  for (std::size_t b = 0; b < kNumBands; ++b) {
    flags["t30_" + band_label(b) + "_range"] = to_string(a.t30_range[b]);
    flags["c80_" + band_label(b) + "_infinite"] = a.c80_infinite[b];
    flags["edt_" + band_label(b) + "_tail"] = a.edt_from_tail[b];
  }
  doc["flags"] = flags;
  return doc;
}

AcousticIndices indices_from_json(const nlohmann::json& doc) {
  std::vector<double> values;
  for (const auto& name : AcousticIndices::names()) {
    const auto& v = doc.at(name);
    values.push_back(v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>());
  }
  AcousticIndices a = AcousticIndices::from_flat(values);
  if (auto it = doc.find("flags"); it != doc.end()) {
    for (std::size_t b = 0; b < kNumBands; ++b) {
      const auto range = it->value("t30_" + band_label(b) + "_range", std::string("T30"));
      a.t30_range[b] = range == "T20"    ? DecayRange::kT20
                       : range == "T10"  ? DecayRange::kT10
                       : range == "tail" ? DecayRange::kTail
                                         : DecayRange::kT30;
      a.edt_from_tail[b] = it->value("edt_" + band_label(b) + "_tail", false);
      a.c80_infinite[b] = it->value("c80_" + band_label(b) + "_infinite", false);
    }
  }
  return a;
}

IndicesError::IndicesError(std::vector<std::string> problems)
    : std::runtime_error([&] {
        std::string msg = "index extraction failed:";
        for (const auto& p : problems) msg += "\n  " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

AcousticIndices compute_all(const EnergyImpulseResponse& response, const IndexOptions& options) {
  AcousticIndices out;
  std::vector<std::string> problems;
  std::array<std::array<double, kModulationHz.size()>, kNumBands> mtf{};
  const std::size_t k0 = direct_bin(response);

  for (std::size_t b = 0; b < kNumBands; ++b) {
    const std::string label = band_label(b) + " Hz";
    if (!(response.band_total(b) > 0.0)) {
      problems.push_back(label + ": zero energy (t30, edt, c80, d50, sti)");
      continue;
    }
    const std::span<const double> from_direct = std::span<const double>(response.bins[b]).subspan(k0);
    const DecayTail tail = options.compensate_truncation ? estimate_tail(from_direct) : DecayTail{};
    const DecayCurve curve = schroeder_integrate(from_direct, response.bin_ms, tail.energy());

    bool fitted = false;
    for (auto [range, lower] : {std::pair{DecayRange::kT30, -35.0}, std::pair{DecayRange::kT20, -25.0},
                                std::pair{DecayRange::kT10, -15.0}}) {
      try {
        out.t30[b] = fit_reverberation(curve, -5.0, lower);
        out.t30_range[b] = range;
        fitted = true;
        break;
      } catch (const InsufficientDecay&) {
      }
    }
    // Very live rooms: fall back to the slope of the fitted late envelope.
    const double tail_t = tail.ratio > 0.0 && tail.ratio < 1.0
                              ? 60.0 * response.bin_ms / 1000.0 / (-10.0 * std::log10(tail.ratio))
                              : 0.0;
    if (!fitted && tail_t > 0.0) {
      out.t30[b] = tail_t;
      out.t30_range[b] = DecayRange::kTail;
      fitted = true;
    }
    if (!fitted) problems.push_back(label + " t30: decay does not reach -15 dB within the cutoff");
    try {
      out.edt[b] = fit_reverberation(curve, 0.0, -10.0);
    } catch (const InsufficientDecay& e) {
      if (tail_t > 0.0) {
        out.edt[b] = tail_t;
        out.edt_from_tail[b] = true;
      } else {
        problems.push_back(label + " edt: " + e.what());
      }
    }
    out.c80[b] = clarity_c80(response, b);
    out.c80_infinite[b] = std::isinf(out.c80[b]);
    out.d50[b] = definition_d50(response, b);
    mtf[b] = modulation_transfer(response.bins[b], response.bin_ms, tail);
  }
  if (!problems.empty()) throw IndicesError(std::move(problems));
  out.sti = sti_from_mtf(mtf);
  return out;
}

}  // namespace roomsound
