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


#ifndef ROOMSOUND_SURROGATE_HPP_
#define ROOMSOUND_SURROGATE_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "roomsound/mlp.hpp"
#include "roomsound/room_model.hpp"

namespace roomsound {

// Raw sigmoid outputs outside [low, high] are flagged as extrapolation.
inline constexpr double kExtrapolationLow = 0.02;
inline constexpr double kExtrapolationHigh = 0.98;

std::filesystem::path model_path(const std::filesystem::path& dir, const std::string& model_id);

struct SurrogatePrediction {
  std::vector<double> values;  // 25 targets, AcousticIndices::names() order
  std::vector<double> unit;    // raw sigmoid outputs
  std::vector<bool> extrapolated;
};

/// The seven models keyed by id. Immutable after loading, so concurrent
/// predictions are safe.
class SurrogateSet {
 public:
  SurrogateSet() = default;
  explicit SurrogateSet(std::map<std::string, MlpModel> models);

  /// Loads model_<id>.json for every id. Throws std::runtime_error naming
  /// missing files.
  static SurrogateSet load_dir(const std::filesystem::path& dir);

  const std::map<std::string, MlpModel>& models() const { return models_; }
  // Digest of the loaded model documents.
  const std::string& version() const { return version_; }

  SurrogatePrediction predict(const RoomConfig& config) const;
  // One row of 25 predictions per config.
  Eigen::MatrixXd predict_all(const std::vector<RoomConfig>& configs) const;

 private:
  std::map<std::string, MlpModel> models_;
  std::string version_;
};

}  // namespace roomsound

#endif  // ROOMSOUND_SURROGATE_HPP_
