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


#include "roomsound/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "roomsound/indices.hpp"
#include "roomsound/rng.hpp"

namespace roomsound {

namespace {

constexpr const char* kSurfaceNames[4] = {"wall", "floor", "ceiling", "window"};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view text, std::size_t line, const std::string& column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::runtime_error("line " + std::to_string(line) + ": column '" + column + "' is not a number: '" +
                             std::string(text) + "'");
  }
  return v;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

nlohmann::json material_json(const MaterialSpec& m) {
  return {{"absorption", m.absorption}, {"scattering", m.scattering}};
}

}  // namespace

const std::vector<std::string>& model_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> v;
    for (std::size_t b = 0; b < kNumBands; ++b) v.push_back(band_label(b));
    v.push_back("sti");
    return v;
  }();
  return ids;
}

std::optional<std::size_t> model_band(const std::string& model_id) {
  if (model_id == "sti") return std::nullopt;
  for (std::size_t b = 0; b < kNumBands; ++b) {
    if (band_label(b) == model_id) return b;
  }
  throw std::invalid_argument("unknown model '" + model_id + "' (expected 125|250|500|1000|2000|4000|sti)");
}

std::vector<double> encode_features(const RoomConfig& config, std::optional<std::size_t> band) {
  const MaterialSpec window = effective_window(config);
  const MaterialSpec* surfaces[4] = {&config.wall, &config.floor, &config.ceiling, &window};
  std::vector<double> f = {config.length, config.width, config.height,
                           config.volume(), config.wwr,  config.furniture_fraction};
  f.reserve(band ? kBandFeatureCount : kStiFeatureCount);
  for (const MaterialSpec* s : surfaces) {
    if (band) {
      f.push_back(s->absorption.at(*band));
    } else {
      f.insert(f.end(), s->absorption.begin(), s->absorption.end());
    }
  }
  return f;
}

std::vector<std::string> feature_names(std::optional<std::size_t> band) {
  std::vector<std::string> names = {"length", "width", "height", "volume", "wwr", "furniture"};
  for (const char* surface : kSurfaceNames) {
    if (band) {
      names.push_back(std::string("alpha_") + surface + "_" + band_label(*band));
    } else {
      for (std::size_t b = 0; b < kNumBands; ++b) names.push_back(std::string("alpha_") + surface + "_" + band_label(b));
    }
  }
  return names;
}

std::vector<std::size_t> model_target_indices(const std::string& model_id) {
  const auto band = model_band(model_id);
  if (!band) return {4 * kNumBands};
  return {*band, kNumBands + *band, 2 * kNumBands + *band, 3 * kNumBands + *band};
}

std::vector<std::string> model_target_names(const std::string& model_id) {
  std::vector<std::string> out;
  for (std::size_t i : model_target_indices(model_id)) out.push_back(AcousticIndices::names()[i]);
  return out;
}

MinMaxScaling MinMaxScaling::fit(const Eigen::MatrixXd& columns) {
  if (columns.rows() == 0) throw std::invalid_argument("cannot fit a scaling on zero rows");
  MinMaxScaling s;
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    s.min.push_back(columns.col(j).minCoeff());
    s.max.push_back(columns.col(j).maxCoeff());
  }
  return s;
}

double MinMaxScaling::range(std::size_t i) const {
  const double r = max[i] - min[i];
  return r > 0.0 ? r : 1.0;
}

Eigen::MatrixXd MinMaxScaling::normalize(const Eigen::MatrixXd& values) const {
  if (static_cast<std::size_t>(values.cols()) != size()) throw std::invalid_argument("scaling column mismatch");
  Eigen::MatrixXd out(values.rows(), values.cols());
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    const auto i = static_cast<std::size_t>(j);
    out.col(j) = (values.col(j).array() - min[i]) / range(i);
  }
  return out;
}

Eigen::MatrixXd MinMaxScaling::denormalize(const Eigen::MatrixXd& units) const {
  if (static_cast<std::size_t>(units.cols()) != size()) throw std::invalid_argument("scaling column mismatch");
  Eigen::MatrixXd out(units.rows(), units.cols());
  for (Eigen::Index j = 0; j < units.cols(); ++j) {
    const auto i = static_cast<std::size_t>(j);
    out.col(j) = units.col(j).array() * range(i) + min[i];
  }
  return out;
}

MinMaxScaling MinMaxScaling::subset(std::span<const std::size_t> columns) const {
  MinMaxScaling s;
  for (std::size_t c : columns) {
    s.min.push_back(min.at(c));
    s.max.push_back(max.at(c));
  }
  return s;
}

nlohmann::json to_json(const MinMaxScaling& scaling) { return {{"min", scaling.min}, {"max", scaling.max}}; }

MinMaxScaling min_max_scaling_from_json(const nlohmann::json& doc) {
  MinMaxScaling s;
  s.min = doc.at("min").get<std::vector<double>>();
  s.max = doc.at("max").get<std::vector<double>>();
  if (s.min.size() != s.max.size()) throw std::invalid_argument("scaling min/max length mismatch");
  return s;
}

std::size_t Dataset::count(Split which) const {
  return static_cast<std::size_t>(std::count(split.begin(), split.end(), which));
}

Dataset split_dataset(Dataset dataset, std::size_t train_n, std::size_t test_n, std::uint64_t seed) {
  const std::size_t n = dataset.size();
  if (train_n + test_n != n) {
    throw std::invalid_argument("split " + std::to_string(train_n) + ":" + std::to_string(test_n) +
                                " does not partition " + std::to_string(n) + " rows");
  }
  if (train_n == 0) throw std::invalid_argument("split needs at least one training row");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x5b1d));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(order[i - 1], order[j]);
  }
  dataset.split.assign(n, Split::kTest);
  for (std::size_t k = 0; k < train_n; ++k) dataset.split[order[k]] = Split::kTrain;

  Eigen::MatrixXd train(static_cast<Eigen::Index>(train_n), static_cast<Eigen::Index>(AcousticIndices::kTargetCount));
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (dataset.split[i] != Split::kTrain) continue;
    for (std::size_t t = 0; t < AcousticIndices::kTargetCount; ++t) {
      train(row, static_cast<Eigen::Index>(t)) = dataset.targets[i].at(t);
    }
    ++row;
  }
  dataset.scaling = MinMaxScaling::fit(train);
  dataset.provenance.split_seed = seed;
  return dataset;
}

std::filesystem::path dataset_meta_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".meta.json");
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::map<std::string, MaterialSpec> materials;
  auto remember = [&](const MaterialSpec& m) {
    if (m.name.empty()) return;
    if (m.name.find(',') != std::string::npos) throw std::invalid_argument("material name contains ',': " + m.name);
    auto [it, inserted] = materials.emplace(m.name, m);
    if (!inserted && !(it->second == m)) {
      throw std::invalid_argument("two different materials share the name '" + m.name + "'");
    }
  };
  for (const RoomConfig& c : dataset.configs) {
    for (const MaterialSpec* m :
         {&c.wall, &c.floor, &c.ceiling, &c.window, &c.shading_material, &c.furniture_material}) {
      remember(*m);
    }
  }

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "index,seed,shading,wall,floor,ceiling,window,shading_material,furniture_material";
  for (const auto& name : feature_names(std::nullopt)) out << ',' << name;
  for (const auto& name : AcousticIndices::names()) out << ',' << name;
  out << ",split\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const RoomConfig& c = dataset.configs[i];
    out << dataset.config_index[i] << ',' << dataset.config_seed[i] << ',' << to_string(c.shading) << ','
        << c.wall.name << ',' << c.floor.name << ',' << c.ceiling.name << ',' << c.window.name << ','
        << c.shading_material.name << ',' << c.furniture_material.name;
    for (double v : encode_features(c, std::nullopt)) out << ',' << format_double(v);
    for (double v : dataset.targets[i]) out << ',' << format_double(v);
    out << ',' << (dataset.split.empty() ? "" : dataset.split[i] == Split::kTrain ? "train" : "test") << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());

  nlohmann::json meta;
  meta["format"] = "roomsound-dataset";
  meta["version"] = 1;
  meta["rows"] = dataset.size();
  meta["grid_id"] = dataset.provenance.grid_id;
  meta["grid_hash"] = dataset.provenance.grid_hash;
  meta["base_seed"] = dataset.provenance.base_seed;
  meta["split_seed"] = dataset.provenance.split_seed;
  meta["simulation"] = to_json(dataset.provenance.sim);
  meta["target_names"] = AcousticIndices::names();
  meta["target_scaling"] = to_json(dataset.scaling);
  nlohmann::json mats = nlohmann::json::object();
  for (const auto& [name, m] : materials) mats[name] = material_json(m);
  meta["materials"] = mats;
  std::ofstream mout(dataset_meta_path(path));
  mout << meta.dump(2) << '\n';
  if (!mout) throw std::runtime_error("failed writing " + dataset_meta_path(path).string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream mfile(dataset_meta_path(path));
  if (!mfile) throw std::runtime_error("missing dataset metadata " + dataset_meta_path(path).string());
  const nlohmann::json meta = nlohmann::json::parse(mfile);
  if (meta.value("format", "") != "roomsound-dataset") throw std::runtime_error("not a roomsound dataset");
  if (meta.value("version", 0) != 1) {
    throw std::runtime_error("unsupported dataset version " + meta.at("version").dump());
  }

  Dataset ds;
  ds.provenance.grid_id = meta.at("grid_id").get<std::string>();
  ds.provenance.grid_hash = meta.at("grid_hash").get<std::string>();
  ds.provenance.base_seed = meta.at("base_seed").get<std::uint64_t>();
  ds.provenance.split_seed = meta.at("split_seed").get<std::uint64_t>();
  ds.provenance.sim = simulation_params_from_json(meta.at("simulation"));
  ds.scaling = min_max_scaling_from_json(meta.at("target_scaling"));

  std::map<std::string, MaterialSpec> materials;
  for (const auto& [name, m] : meta.at("materials").items()) {
    MaterialSpec spec{name, m.at("absorption").get<BandArray>(), m.at("scattering").get<BandArray>()};
    materials.emplace(name, spec);
  }
  auto material = [&](std::string_view name, std::size_t line) -> MaterialSpec {
    if (name.empty()) return {};
    auto it = materials.find(std::string(name));
    if (it == materials.end()) {
      throw std::runtime_error("line " + std::to_string(line) + ": material '" + std::string(name) +
                               "' missing from metadata");
    }
    return it->second;
  };

  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = split_csv(line);
  const std::size_t n_features = kStiFeatureCount;
  const std::size_t n_cols = 9 + n_features + AcousticIndices::kTargetCount + 1;
  if (header.size() != n_cols) throw std::runtime_error("dataset header has " + std::to_string(header.size()) + " columns");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != n_cols) throw std::runtime_error("line " + std::to_string(line_no) + ": wrong column count");
    auto num = [&](std::size_t col) { return parse_double(cells[col], line_no, std::string(header[col])); };
    RoomConfig c;
    c.shading = parse_shading(cells[2]);
    c.wall = material(cells[3], line_no);
    c.floor = material(cells[4], line_no);
    c.ceiling = material(cells[5], line_no);
    c.window = material(cells[6], line_no);
    c.shading_material = material(cells[7], line_no);
    c.furniture_material = material(cells[8], line_no);
    c.length = num(9);
    c.width = num(10);
    c.height = num(11);
    c.wwr = num(13);
    c.furniture_fraction = num(14);
    ds.config_index.push_back(static_cast<std::size_t>(std::stoull(std::string(cells[0]))));
    ds.config_seed.push_back(std::stoull(std::string(cells[1])));
    ds.configs.push_back(std::move(c));
    std::vector<double> targets;
    for (std::size_t t = 0; t < AcousticIndices::kTargetCount; ++t) targets.push_back(num(9 + n_features + t));
    ds.targets.push_back(std::move(targets));
    const std::string_view s = cells.back();
    if (s == "train") {
      ds.split.push_back(Split::kTrain);
    } else if (s == "test") {
      ds.split.push_back(Split::kTest);
    } else if (!s.empty()) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": bad split '" + std::string(s) + "'");
    }
  }
  if (!ds.split.empty() && ds.split.size() != ds.size()) throw std::runtime_error("split column partially filled");
  if (meta.at("rows").get<std::size_t>() != ds.size()) throw std::runtime_error("row count differs from metadata");
  return ds;
}

ModelData model_view(const Dataset& dataset, const std::string& model_id, std::optional<Split> which) {
  const auto band = model_band(model_id);
  const auto targets = model_target_indices(model_id);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!which || (!dataset.split.empty() && dataset.split[i] == *which)) rows.push_back(i);
  }
  const auto n_features = static_cast<Eigen::Index>(band ? kBandFeatureCount : kStiFeatureCount);
  ModelData data{Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), n_features),
                 Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(targets.size()))};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto f = encode_features(dataset.configs[rows[r]], band);
    const auto ri = static_cast<Eigen::Index>(r);
    for (Eigen::Index j = 0; j < n_features; ++j) data.x(ri, j) = f[static_cast<std::size_t>(j)];
    for (std::size_t t = 0; t < targets.size(); ++t) {
      data.y(ri, static_cast<Eigen::Index>(t)) = dataset.targets[rows[r]].at(targets[t]);
    }
  }
  return data;
}

}  // namespace roomsound
