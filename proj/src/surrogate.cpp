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


#include "roomsound/surrogate.hpp"

#include <cstdio>
#include <stdexcept>

#include "roomsound/indices.hpp"
#include "roomsound/rng.hpp"

namespace roomsound {

std::filesystem::path model_path(const std::filesystem::path& dir, const std::string& model_id) {
  return dir / ("model_" + model_id + ".json");
}

SurrogateSet::SurrogateSet(std::map<std::string, MlpModel> models) : models_(std::move(models)) {
  std::vector<std::string> missing;
  for (const auto& id : model_ids()) {
    if (!models_.count(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string msg = "surrogate set is missing models:";
    for (const auto& id : missing) msg += " " + id;
    throw std::invalid_argument(msg);
  }
  std::uint64_t h = 0;
  for (const auto& [id, model] : models_) {
    if (model.model_id != id) throw std::invalid_argument("model stored as '" + id + "' reports id '" + model.model_id + "'");
    h = mix_seed(h, fnv1a64(to_json(model).dump()));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  version_ = buf;
}

SurrogateSet SurrogateSet::load_dir(const std::filesystem::path& dir) {
  std::map<std::string, MlpModel> models;
  std::vector<std::string> missing;
  for (const auto& id : model_ids()) {
    const auto path = model_path(dir, id);
    if (!std::filesystem::exists(path)) {
      missing.push_back(path.string());
      continue;
    }
    models.emplace(id, load_model(path));
  }
  if (!missing.empty()) {
    std::string msg = "missing model files:";
    for (const auto& p : missing) msg += "\n  " + p;
    throw std::runtime_error(msg);
  }
  return SurrogateSet(std::move(models));
}

Eigen::MatrixXd SurrogateSet::predict_all(const std::vector<RoomConfig>& configs) const {
  const auto n = static_cast<Eigen::Index>(configs.size());
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(AcousticIndices::kTargetCount));
  for (const auto& [id, model] : models_) {
    const auto band = model_band(id);
    Eigen::MatrixXd x(n, model.spec.input_dim);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto f = encode_features(configs[static_cast<std::size_t>(i)], band);
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = f[static_cast<std::size_t>(j)];
    }
    const Eigen::MatrixXd y = roomsound::predict(model, x);
    const auto targets = model_target_indices(id);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      out.col(static_cast<Eigen::Index>(targets[t])) = y.col(static_cast<Eigen::Index>(t));
    }
  }
  return out;
}

SurrogatePrediction SurrogateSet::predict(const RoomConfig& config) const {
  SurrogatePrediction p;
  p.values.assign(AcousticIndices::kTargetCount, 0.0);
  p.unit.assign(AcousticIndices::kTargetCount, 0.0);
  p.extrapolated.assign(AcousticIndices::kTargetCount, false);
  for (const auto& [id, model] : models_) {
    const auto f = encode_features(config, model_band(id));
    const Eigen::MatrixXd x = Eigen::Map<const Eigen::RowVectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
    const Eigen::MatrixXd unit = predict_unit(model, x);
    const auto targets = model_target_indices(id);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const double u = unit(0, static_cast<Eigen::Index>(t));
      p.unit[targets[t]] = u;
      p.values[targets[t]] = model.target_scaling.denormalize(t, u);
      p.extrapolated[targets[t]] = u < kExtrapolationLow || u > kExtrapolationHigh;
    }
  }
  return p;
}

}  // namespace roomsound
