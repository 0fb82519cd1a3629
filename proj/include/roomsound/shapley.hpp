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


#ifndef ROOMSOUND_SHAPLEY_HPP_
#define ROOMSOUND_SHAPLEY_HPP_

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "roomsound/room_model.hpp"

namespace roomsound {

enum class DesignVariable {
  kRoomDimensions,
  kWwr,
  kShading,
  kFurniture,
  kWallAlpha,
  kFloorAlpha,
  kCeilingAlpha,
  kWindowAlpha,
};

inline constexpr std::size_t kDesignVariableCount = 8;
std::string to_string(DesignVariable v);

/// Exact Shapley values of a cooperative game with `players` players
/// (at most 16). `value` maps a coalition bitmask to one value per output and
/// is called once per coalition. Returns players x outputs.
Eigen::MatrixXd shapley_exact(std::size_t players, const std::function<Eigen::MatrixXd(const std::vector<std::uint32_t>&)>& value);

/// Feature-replacement game for a plain feature vector: features outside the
/// coalition take the background value. `f` maps feature rows to outputs.
using BatchFunction = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;
Eigen::MatrixXd shapley_features(const BatchFunction& f, const Eigen::RowVectorXd& instance,
                                 const Eigen::RowVectorXd& background);

struct Attribution {
  Eigen::MatrixXd phi;     // kDesignVariableCount x outputs
  Eigen::RowVectorXd value;  // f(instance)
  Eigen::RowVectorXd base;   // f(background mean features)
};

/// Shapley attribution over the eight design variables of one surrogate
/// model. A feature whose variables are all outside the coalition takes its
/// background mean; the effective window absorption, which depends on both
/// window and shading, is averaged over the background rows with only the
/// coalition's variables taken from the instance.
class DesignSpaceExplainer {
 public:
  DesignSpaceExplainer(BatchFunction model, std::optional<std::size_t> band, std::vector<RoomConfig> background);

  Attribution explain(const RoomConfig& instance) const;
  std::size_t output_count() const { return outputs_; }

 private:
  // Background means with some variables taken from the instance, keyed by
  // those variables.
  using PartialCache = std::map<std::uint32_t, Eigen::RowVectorXd>;
  Eigen::RowVectorXd coalition_features(const RoomConfig& instance, std::uint32_t mask, PartialCache& partial) const;

  BatchFunction model_;
  std::optional<std::size_t> band_;
  std::vector<RoomConfig> background_;
  Eigen::RowVectorXd background_mean_;
  std::vector<std::uint32_t> feature_deps_;  // variable bitmask per feature
  std::size_t outputs_ = 0;
};

/// Mean |phi| per variable and target, plus the average over targets.
struct ShapReport {
  std::vector<std::string> targets;
  Eigen::MatrixXd mean_abs;  // kDesignVariableCount x targets
  std::size_t instances = 0;

  Eigen::VectorXd overall() const;
  // Variables sorted by decreasing overall importance.
  std::vector<DesignVariable> ranking() const;
};

class ShapAccumulator {
 public:
  void add(const std::vector<std::string>& target_names, const Attribution& attribution);
  ShapReport report() const;  // throws std::logic_error when nothing was added

 private:
  std::vector<std::string> targets_;
  std::vector<Eigen::VectorXd> sums_;
  std::vector<std::size_t> counts_;
};

// Ranked table: rank,variable,mean_abs_shap.
void write_ranking(std::ostream& out, const ShapReport& report);
// Long format: variable,target,value.
void write_long(std::ostream& out, const ShapReport& report);

}  // namespace roomsound

#endif  // ROOMSOUND_SHAPLEY_HPP_
