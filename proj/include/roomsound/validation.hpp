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


#ifndef ROOMSOUND_VALIDATION_HPP_
#define ROOMSOUND_VALIDATION_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "roomsound/acoustics.hpp"
#include "roomsound/dataset.hpp"
#include "roomsound/surrogate.hpp"

namespace roomsound {

/// Surrogate error on the held-out split next to its error on unseen
/// configs, per target.
struct ValidationReport {
  std::vector<std::string> targets;
  std::vector<double> test_mae;    // surrogate on the dataset's test rows
  std::vector<double> unseen_mae;  // surrogate against fresh simulations
  std::vector<double> train_range; // max - min of each target over train rows
  std::vector<std::size_t> failed_configs;  // excluded from unseen_mae
  std::vector<std::string> failure_messages;
  Eigen::MatrixXd simulated;  // rows: unseen configs (failed rows are NaN)
  Eigen::MatrixXd predicted;
};

/// MAE per column over rows where `truth` is finite.
std::vector<double> column_mae(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& truth);

/// Test-split MAE of every target, recomputed on the dataset's test rows.
std::vector<double> test_split_mae(const SurrogateSet& models, const Dataset& dataset);

/// Simulates the unseen configs (seeds from `grid_id` and `base_seed`) and
/// compares them with the surrogate predictions. Test MAE comes from the
/// report stored with each model and train ranges from its target scaling.
ValidationReport run_validation(const SurrogateSet& models, const std::vector<RoomConfig>& configs,
                                const std::string& grid_id, const SimulationParams& params, std::uint64_t base_seed,
                                int worker_count = 1);

/// Report assembly from precomputed matrices (rows = configs, 25 columns).
/// Throws std::invalid_argument when a model carries no test report.
ValidationReport compare(const Eigen::MatrixXd& simulated, const Eigen::MatrixXd& predicted,
                         const SurrogateSet& models);

struct PercentageSummary {
  std::vector<std::string> indicators;  // T30, EDT, C80, D50, STI
  std::vector<double> test_pct;
  std::vector<double> unseen_pct;
  std::vector<double> target_test_pct;    // per target
  std::vector<double> target_unseen_pct;
};

/// MAE as a percentage of each target's train range, averaged per indicator
/// over bands. Throws std::invalid_argument on a zero range.
PercentageSummary percentage_error_summary(const ValidationReport& report);

/// Writes mae_table.csv (target, test MAE, unseen MAE), percent_error.csv and
/// unseen_predictions.csv into `dir`.
void write_validation_report(const ValidationReport& report, const std::filesystem::path& dir);

}  // namespace roomsound

#endif  // ROOMSOUND_VALIDATION_HPP_
