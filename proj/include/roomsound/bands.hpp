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

#ifndef ROOMSOUND_BANDS_HPP_
#define ROOMSOUND_BANDS_HPP_

#include <array>
#include <cstddef>
#include <optional>
#include <string>

namespace roomsound {

// Octave bands 125 Hz .. 4 kHz.
inline constexpr std::size_t kNumBands = 6;
inline constexpr std::array<int, kNumBands> kBandHz = {125, 250, 500, 1000, 2000, 4000};

using BandArray = std::array<double, kNumBands>;

inline std::optional<std::size_t> band_index(int hz) {
  for (std::size_t i = 0; i < kNumBands; ++i) {
    if (kBandHz[i] == hz) return i;
  }
  return std::nullopt;
}

inline std::string band_label(std::size_t band) { return std::to_string(kBandHz.at(band)); }

}  // namespace roomsound

#endif  // ROOMSOUND_BANDS_HPP_
