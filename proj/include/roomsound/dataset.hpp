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


#ifndef ROOMSOUND_DATASET_HPP_
#define ROOMSOUND_DATASET_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "roomsound/acoustics.hpp"
#include "roomsound/room_model.hpp"

namespace roomsound {

inline constexpr std::size_t kGeometryFeatureCount = 6;
inline constexpr std::size_t kBandFeatureCount = kGeometryFeatureCount + 4;
inline constexpr std::size_t kStiFeatureCount = kGeometryFeatureCount + 4 * kNumBands;

// Surrogate model ids: "125" ... "4000" and "sti".
const std::vector<std::string>& model_ids();
// Band of a band model, nullopt for "sti". Throws std::invalid_argument on an
// unknown id.
std::optional<std::size_t> model_band(const std::string& model_id);

/// Geometry (length, width, height, volume, wwr, furniture fraction) followed
/// by wall, floor, ceiling and effective window absorption. A band selects the
/// 10-value band encoding; nullopt gives all six bands per surface (30 values).
std::vector<double> encode_features(const RoomConfig& config, std::optional<std::size_t> band);
std::vector<std::string> feature_names(std::optional<std::size_t> band);

// Positions of a model's outputs in AcousticIndices::flat().
std::vector<std::size_t> model_target_indices(const std::string& model_id);
std::vector<std::string> model_target_names(const std::string& model_id);

/// Per-column min-max map to [0, 1]. A constant column maps with unit range.
/// Values outside the fitted range are not clipped.
struct MinMaxScaling {
  std::vector<double> min;
  std::vector<double> max;

  static MinMaxScaling fit(const Eigen::MatrixXd& columns);
  std::size_t size() const { return min.size(); }
  double range(std::size_t i) const;
  double normalize(std::size_t i, double value) const { return (value - min[i]) / range(i); }
  double denormalize(std::size_t i, double unit) const { return min[i] + unit * range(i); }
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& values) const;
  Eigen::MatrixXd denormalize(const Eigen::MatrixXd& units) const;
  MinMaxScaling subset(std::span<const std::size_t> columns) const;

  friend bool operator==(const MinMaxScaling&, const MinMaxScaling&) = default;
};

nlohmann::json to_json(const MinMaxScaling& scaling);
MinMaxScaling min_max_scaling_from_json(const nlohmann::json& doc);

enum class Split : std::uint8_t { kTrain, kTest };

struct DatasetProvenance {
  std::string grid_id;
  std::string grid_hash;
  std::uint64_t base_seed = 0;
  std::uint64_t split_seed = 0;
  SimulationParams sim;

  friend bool operator==(const DatasetProvenance&, const DatasetProvenance&) = default;
};

/// Simulated configs with their 25 targets (AcousticIndices::names() order)
/// and a train/test assignment. `scaling` covers all 25 targets and is fitted
/// on train rows only.
struct Dataset {
  std::vector<std::size_t> config_index;
  std::vector<std::uint64_t> config_seed;
  std::vector<RoomConfig> configs;
  std::vector<std::vector<double>> targets;
  std::vector<Split> split;
  MinMaxScaling scaling;
  DatasetProvenance provenance;

  std::size_t size() const { return configs.size(); }
  std::size_t count(Split which) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Seeded uniform shuffle; the first train_n shuffled rows become train.
/// Refits the target scaling on train rows. Throws std::invalid_argument when
/// train_n + test_n differs from the row count.
Dataset split_dataset(Dataset dataset, std::size_t train_n, std::size_t test_n, std::uint64_t seed);

/// Writes `path` (comma-separated table: ids, material names, the 30 feature
/// columns, 25 targets, split) and `path` + ".meta.json" (materials,
/// normalisation, seeds, simulator parameters, grid hash).
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);
std::filesystem::path dataset_meta_path(const std::filesystem::path& path);

/// Feature matrix and raw targets of one surrogate model over the selected
/// rows (all rows when `which` is empty).
struct ModelData {
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
};
ModelData model_view(const Dataset& dataset, const std::string& model_id, std::optional<Split> which);

}  // namespace roomsound

#endif  // ROOMSOUND_DATASET_HPP_
