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


#ifndef ROOMSOUND_MLP_HPP_
#define ROOMSOUND_MLP_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "roomsound/dataset.hpp"
#include "roomsound/rng.hpp"

namespace roomsound {

struct MlpSpec {
  int input_dim = 0;
  int hidden_layers = 5;
  int hidden_units = 100;
  int output_dim = 1;
  double dropout = 0.2;
  bool dropout_all_layers = false;  // false: one dropout layer, after the last hidden layer
  int batch_size = 128;
  int epochs = 100;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

nlohmann::json to_json(const MlpSpec& spec);
MlpSpec mlp_spec_from_json(const nlohmann::json& doc);

/// Architecture and schedule used for each surrogate model id, with the input
/// and output sizes of that model filled in.
MlpSpec default_spec(const std::string& model_id);

struct EvalReport {
  std::vector<std::string> names;
  std::vector<double> mse;
  std::vector<double> mae;
  std::vector<double> r2;
};

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& doc);

struct TrainingHistory {
  std::vector<double> train_mse;  // normalised target space, inference mode
  std::vector<double> test_mse;   // empty when no test rows were given
};

/// Fully connected ReLU network with a sigmoid output layer. Weights map row
/// batches: Z = A W + b, W is fan_in x fan_out. Inputs are min-max scaled with
/// `feature_scaling` and outputs live in the unit space of `target_scaling`.
struct MlpModel {
  MlpSpec spec;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::RowVectorXd> biases;

  std::string model_id;
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;
  MinMaxScaling feature_scaling;
  MinMaxScaling target_scaling;
  TrainingHistory history;
  std::optional<EvalReport> test_report;

  std::size_t layer_count() const { return weights.size(); }
  std::size_t parameter_count() const;
};

// He-normal weights (variance 2 / fan_in) from spec.seed, zero biases.
MlpModel init_model(const MlpSpec& spec);
MlpModel zero_model(const MlpSpec& spec);

/// Untrained model for `model_id` wired to the dataset: feature scaling fitted
/// on the train rows, target scaling taken from the dataset.
MlpModel make_model(const std::string& model_id, const MlpSpec& spec, const Dataset& dataset);

// Pre-sigmoid outputs for scaled inputs. Dropout is applied only when a
// generator is supplied (training mode).
Eigen::MatrixXd forward_logits(const MlpModel& model, const Eigen::MatrixXd& x, Rng* dropout_rng = nullptr);
Eigen::MatrixXd forward(const MlpModel& model, const Eigen::MatrixXd& x, Rng* dropout_rng = nullptr);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::RowVectorXd> biases;
};

/// Mean squared error over all outputs of the batch (scaled inputs, unit
/// targets). Fills `grad` when non-null.
double mse_loss(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Gradients* grad = nullptr,
                Rng* dropout_rng = nullptr);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using EpochCallback = std::function<void(int epoch, double train_mse, double test_mse)>;

/// Mini-batch Adam on MSE. Rows are reshuffled every epoch. Records the
/// per-epoch loss history and, when `test` is given, the final test report.
void train(MlpModel& model, const ModelData& train_rows, const ModelData* test_rows = nullptr,
           const EpochCallback& on_epoch = {});

// Sigmoid outputs for raw features.
Eigen::MatrixXd predict_unit(const MlpModel& model, const Eigen::MatrixXd& x_raw);
// Denormalised predictions for raw features.
Eigen::MatrixXd predict(const MlpModel& model, const Eigen::MatrixXd& x_raw);

EvalReport evaluate(const MlpModel& model, const ModelData& rows);
// Metrics of arbitrary predictions against truth, per column.
EvalReport score(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& truth, std::vector<std::string> names);

class ModelFormatError : public std::runtime_error {
 public:
  ModelFormatError(const std::string& message, std::size_t byte_offset = 0)
      : std::runtime_error(message), byte_offset_(byte_offset) {}
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

inline constexpr int kModelFormatVersion = 2;

nlohmann::json to_json(const MlpModel& model);
MlpModel model_from_json(const nlohmann::json& doc);
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace roomsound

#endif  // ROOMSOUND_MLP_HPP_
