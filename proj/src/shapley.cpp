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


#include "roomsound/shapley.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "roomsound/dataset.hpp"

namespace roomsound {

namespace {

constexpr std::uint32_t bit(DesignVariable v) { return 1u << static_cast<unsigned>(v); }

// Copies the variables in `mask` from `from` into `to`.
void assign_variables(RoomConfig& to, const RoomConfig& from, std::uint32_t mask) {
  if (mask & bit(DesignVariable::kRoomDimensions)) {
    to.length = from.length;
    to.width = from.width;
    to.height = from.height;
  }
  if (mask & bit(DesignVariable::kWwr)) to.wwr = from.wwr;
  if (mask & bit(DesignVariable::kShading)) {
    to.shading = from.shading;
    to.shading_material = from.shading_material;
  }
  if (mask & bit(DesignVariable::kFurniture)) to.furniture_fraction = from.furniture_fraction;
  if (mask & bit(DesignVariable::kWallAlpha)) to.wall = from.wall;
  if (mask & bit(DesignVariable::kFloorAlpha)) to.floor = from.floor;
  if (mask & bit(DesignVariable::kCeilingAlpha)) to.ceiling = from.ceiling;
  if (mask & bit(DesignVariable::kWindowAlpha)) to.window = from.window;
}

}  // namespace

std::string to_string(DesignVariable v) {
  switch (v) {
    case DesignVariable::kRoomDimensions: return "room_dimensions";
    case DesignVariable::kWwr: return "wwr";
    case DesignVariable::kShading: return "shading";
    case DesignVariable::kFurniture: return "furniture";
    case DesignVariable::kWallAlpha: return "wall_alpha";
    case DesignVariable::kFloorAlpha: return "floor_alpha";
    case DesignVariable::kCeilingAlpha: return "ceiling_alpha";
    case DesignVariable::kWindowAlpha: return "window_alpha";
  }
  return "?";
}

Eigen::MatrixXd shapley_exact(std::size_t players,
                              const std::function<Eigen::MatrixXd(const std::vector<std::uint32_t>&)>& value) {
  if (players == 0 || players > 16) throw std::invalid_argument("shapley_exact supports 1..16 players");
  const std::uint32_t n_coalitions = 1u << players;
  std::vector<std::uint32_t> masks(n_coalitions);
  std::iota(masks.begin(), masks.end(), 0u);
  const Eigen::MatrixXd v = value(masks);
  if (v.rows() != static_cast<Eigen::Index>(n_coalitions)) throw std::invalid_argument("value function row count");

  // weight[s] = s! (n - s - 1)! / n!
  std::vector<double> weight(players);
  for (std::size_t s = 0; s < players; ++s) {
    double w = 1.0 / static_cast<double>(players);
    for (std::size_t k = 1; k <= s; ++k) w *= static_cast<double>(k) / static_cast<double>(players - k);
    weight[s] = w;
  }
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(players), v.cols());
  for (std::size_t i = 0; i < players; ++i) {
    const std::uint32_t b = 1u << i;
    for (std::uint32_t s = 0; s < n_coalitions; ++s) {
      if (s & b) continue;
      phi.row(static_cast<Eigen::Index>(i)) +=
          weight[static_cast<std::size_t>(std::popcount(s))] * (v.row(s | b) - v.row(s));
    }
  }
  return phi;
}

Eigen::MatrixXd shapley_features(const BatchFunction& f, const Eigen::RowVectorXd& instance,
                                 const Eigen::RowVectorXd& background) {
  if (instance.size() != background.size()) throw std::invalid_argument("instance/background size mismatch");
  const auto n = static_cast<std::size_t>(instance.size());
  return shapley_exact(n, [&](const std::vector<std::uint32_t>& masks) {
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(masks.size()), instance.size());
    for (std::size_t r = 0; r < masks.size(); ++r) {
      for (std::size_t j = 0; j < n; ++j) {
        rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
            (masks[r] >> j) & 1u ? instance(static_cast<Eigen::Index>(j)) : background(static_cast<Eigen::Index>(j));
      }
    }
    return f(rows);
  });
}

DesignSpaceExplainer::DesignSpaceExplainer(BatchFunction model, std::optional<std::size_t> band,
                                           std::vector<RoomConfig> background)
    : model_(std::move(model)), band_(band), background_(std::move(background)) {
  if (background_.empty()) throw std::invalid_argument("empty Shapley background");
  const std::size_t n_features = band_ ? kBandFeatureCount : kStiFeatureCount;
  background_mean_ = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(n_features));
  for (const auto& c : background_) {
    const auto f = encode_features(c, band_);
    for (std::size_t j = 0; j < n_features; ++j) background_mean_(static_cast<Eigen::Index>(j)) += f[j];
  }
  background_mean_ /= static_cast<double>(background_.size());

  const std::uint32_t per_surface[4] = {bit(DesignVariable::kWallAlpha), bit(DesignVariable::kFloorAlpha),
                                        bit(DesignVariable::kCeilingAlpha),
                                        bit(DesignVariable::kWindowAlpha) | bit(DesignVariable::kShading)};
  const std::uint32_t dims = bit(DesignVariable::kRoomDimensions);
  feature_deps_ = {dims, dims, dims, dims, bit(DesignVariable::kWwr), bit(DesignVariable::kFurniture)};
  const std::size_t per = band_ ? 1 : kNumBands;
  for (std::uint32_t deps : per_surface) feature_deps_.insert(feature_deps_.end(), per, deps);

  outputs_ = static_cast<std::size_t>(model_(background_mean_).cols());
}

Eigen::RowVectorXd DesignSpaceExplainer::coalition_features(const RoomConfig& instance, std::uint32_t mask,
                                                            PartialCache& partial) const {
  const auto own = encode_features(instance, band_);
  Eigen::RowVectorXd out(background_mean_.size());
  for (std::size_t j = 0; j < feature_deps_.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const std::uint32_t deps = feature_deps_[j];
    const std::uint32_t present = deps & mask;
    if (present == deps) {
      out(jj) = own[j];
    } else if (present == 0) {
      out(jj) = background_mean_(jj);
    } else {
      auto it = partial.find(present);
      if (it == partial.end()) {
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(background_mean_.size());
        for (const auto& row : background_) {
          RoomConfig hybrid = row;
          assign_variables(hybrid, instance, present);
          const auto f = encode_features(hybrid, band_);
          for (std::size_t k = 0; k < f.size(); ++k) mean(static_cast<Eigen::Index>(k)) += f[k];
        }
        mean /= static_cast<double>(background_.size());
        it = partial.emplace(present, std::move(mean)).first;
      }
      out(jj) = it->second(jj);
    }
  }
  return out;
}

Attribution DesignSpaceExplainer::explain(const RoomConfig& instance) const {
  Attribution a;
  PartialCache partial;
  a.phi = shapley_exact(kDesignVariableCount, [&](const std::vector<std::uint32_t>& masks) {
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(masks.size()), background_mean_.size());
    for (std::size_t r = 0; r < masks.size(); ++r) rows.row(static_cast<Eigen::Index>(r)) = coalition_features(instance, masks[r], partial);
    const Eigen::MatrixXd v = model_(rows);
    a.base = v.row(0);
    a.value = v.row(v.rows() - 1);
    return v;
  });
  return a;
}

Eigen::VectorXd ShapReport::overall() const { return mean_abs.rowwise().mean(); }

std::vector<DesignVariable> ShapReport::ranking() const {
  const Eigen::VectorXd o = overall();
  std::vector<DesignVariable> vars;
  for (std::size_t i = 0; i < kDesignVariableCount; ++i) vars.push_back(static_cast<DesignVariable>(i));
  std::stable_sort(vars.begin(), vars.end(), [&](DesignVariable a, DesignVariable b) {
    return o(static_cast<Eigen::Index>(a)) > o(static_cast<Eigen::Index>(b));
  });
  return vars;
}

void ShapAccumulator::add(const std::vector<std::string>& target_names, const Attribution& attribution) {
  if (static_cast<Eigen::Index>(target_names.size()) != attribution.phi.cols()) {
    throw std::invalid_argument("target names do not match attribution outputs");
  }
  for (std::size_t t = 0; t < target_names.size(); ++t) {
    auto it = std::find(targets_.begin(), targets_.end(), target_names[t]);
    std::size_t k = static_cast<std::size_t>(it - targets_.begin());
    if (it == targets_.end()) {
      targets_.push_back(target_names[t]);
      sums_.push_back(Eigen::VectorXd::Zero(kDesignVariableCount));
      counts_.push_back(0);
    }
    sums_[k] += attribution.phi.col(static_cast<Eigen::Index>(t)).cwiseAbs();
    ++counts_[k];
  }
}

ShapReport ShapAccumulator::report() const {
  if (targets_.empty()) throw std::logic_error("no attributions to aggregate");
  ShapReport r;
  r.targets = targets_;
  r.mean_abs.resize(kDesignVariableCount, static_cast<Eigen::Index>(targets_.size()));
  for (std::size_t t = 0; t < targets_.size(); ++t) {
    r.mean_abs.col(static_cast<Eigen::Index>(t)) = sums_[t] / static_cast<double>(counts_[t]);
    r.instances = std::max(r.instances, counts_[t]);
  }
  return r;
}

void write_ranking(std::ostream& out, const ShapReport& report) {
  const Eigen::VectorXd o = report.overall();
  out << "rank,variable,mean_abs_shap\n";
  int rank = 1;
  for (DesignVariable v : report.ranking()) {
    out << rank++ << ',' << to_string(v) << ',' << o(static_cast<Eigen::Index>(v)) << '\n';
  }
}

void write_long(std::ostream& out, const ShapReport& report) {
  out << "variable,target,value\n";
  for (std::size_t i = 0; i < kDesignVariableCount; ++i) {
    for (std::size_t t = 0; t < report.targets.size(); ++t) {
      out << to_string(static_cast<DesignVariable>(i)) << ',' << report.targets[t] << ','
          << report.mean_abs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) << '\n';
    }
  }
}

}  // namespace roomsound
