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

#include "roomsound/room_model.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace roomsound {

namespace {

bool in_unit_interval(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ", ";
    out += item;
  }
  return out;
}

Surface make_rect(std::string label, SurfaceKind kind, std::vector<Vec3> vertices, Vec3 normal,
                  const MaterialSpec& material) {
  const Vec3 e1 = vertices[1] - vertices[0];
  const Vec3 e2 = vertices[3] - vertices[0];
  Surface s;
  s.label = std::move(label);
  s.kind = kind;
  s.vertices = std::move(vertices);
  s.normal = normal;
  s.area = norm(cross(e1, e2));
  s.material = material;
  return s;
}

// Rectangle on the plane axis == coord, spanning [u0,u1] x [v0,v1] on the
// other two axes (in cyclic order). Vertex winding follows `normal_sign`.
Surface axis_rect(std::string label, SurfaceKind kind, int axis, double coord, double normal_sign, double u0,
                  double u1, double v0, double v1, const MaterialSpec& material) {
  const int ua = (axis + 1) % 3;
  const int va = (axis + 2) % 3;
  auto point = [&](double u, double v) {
    Vec3 p;
    p[axis] = coord;
    p[ua] = u;
    p[va] = v;
    return p;
  };
  std::vector<Vec3> verts = {point(u0, v0), point(u1, v0), point(u1, v1), point(u0, v1)};
  if (normal_sign < 0) std::swap(verts[1], verts[3]);
  Vec3 n;
  n[axis] = normal_sign;
  return make_rect(std::move(label), kind, std::move(verts), n, material);
}

}  // namespace

void MaterialSpec::validate() const {
  for (std::size_t b = 0; b < kNumBands; ++b) {
    if (!in_unit_interval(absorption[b])) {
      throw std::invalid_argument("material '" + name + "': absorption at " + band_label(b) +
                                  " Hz outside [0,1]");
    }
    if (!in_unit_interval(scattering[b])) {
      throw std::invalid_argument("material '" + name + "': scattering at " + band_label(b) +
                                  " Hz outside [0,1]");
    }
  }
}

MaterialNotFound::MaterialNotFound(std::string name, std::vector<std::string> valid_names)
    : std::runtime_error("unknown material '" + name + "'; valid names: " + join(valid_names)),
      name_(std::move(name)),
      valid_names_(std::move(valid_names)) {}

MaterialDatabase::MaterialDatabase(std::vector<MaterialSpec> materials) : materials_(std::move(materials)) {
  for (std::size_t i = 0; i < materials_.size(); ++i) {
    materials_[i].validate();
    if (!index_.emplace(materials_[i].name, i).second) {
      throw std::invalid_argument("duplicate material '" + materials_[i].name + "'");
    }
  }
}

MaterialDatabase MaterialDatabase::parse(std::string_view text) {
  std::vector<MaterialSpec> materials;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    MaterialSpec m;
    if (!(row >> m.name)) continue;
    for (auto& a : m.absorption) row >> a;
    for (auto& s : m.scattering) row >> s;
    if (row.fail()) {
      throw std::invalid_argument("material table line " + std::to_string(line_no) +
                                  ": expected name followed by 12 coefficients");
    }
    std::string extra;
    if (row >> extra) {
      throw std::invalid_argument("material table line " + std::to_string(line_no) + ": trailing field '" +
                                  extra + "'");
    }
    materials.push_back(std::move(m));
  }
  return MaterialDatabase(std::move(materials));
}

MaterialDatabase MaterialDatabase::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open material table " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::filesystem::path MaterialDatabase::builtin_path() {
  if (const char* dir = std::getenv("ROOMSOUND_DATA_DIR"); dir != nullptr && *dir != '\0') {
    return std::filesystem::path(dir) / "materials.tsv";
  }
  return std::filesystem::path(ROOMSOUND_DEFAULT_DATA_DIR) / "materials.tsv";
}

MaterialDatabase MaterialDatabase::builtin() { return load(builtin_path()); }

const MaterialSpec& MaterialDatabase::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw MaterialNotFound(name, names());
  return materials_[it->second];
}

std::vector<std::string> MaterialDatabase::names() const {
  std::vector<std::string> out;
  out.reserve(materials_.size());
  for (const auto& m : materials_) out.push_back(m.name);
  return out;
}

std::string to_string(Shading shading) {
  switch (shading) {
    case Shading::kNone:
      return "none";
    case Shading::kRollerBlind:
      return "roller_blind";
    case Shading::kCurtain:
      return "curtain";
  }
  return "none";
}

Shading parse_shading(std::string_view text) {
  if (text == "none") return Shading::kNone;
  if (text == "roller_blind") return Shading::kRollerBlind;
  if (text == "curtain") return Shading::kCurtain;
  throw std::invalid_argument("unknown shading '" + std::string(text) + "' (none, roller_blind, curtain)");
}

MaterialSpec effective_window(const RoomConfig& config) {
  if (config.shading == Shading::kNone) return config.window;
  MaterialSpec m = config.shading_material;
  m.name = config.window.name + "+" + config.shading_material.name;
  return m;
}

ConfigError::ConfigError(std::vector<FieldError> errors)
    : std::invalid_argument([&] {
        std::string msg = "invalid room config:";
        for (const auto& e : errors) msg += " " + e.field + ": " + e.message + ";";
        return msg;
      }()),
      errors_(std::move(errors)) {}

std::vector<FieldError> validate(const RoomConfig& c) {
  std::vector<FieldError> errors;
  auto dim = [&](const char* field, double v, double min_exclusive) {
    if (!std::isfinite(v) || v <= 0.0) {
      errors.push_back({field, "must be a positive length in meters"});
    } else if (v <= min_exclusive) {
      errors.push_back({field, "must exceed " + std::to_string(min_exclusive) +
                                   " m so source and receiver fit inside the room"});
    }
  };
  dim("length", c.length, 2.0 * kSourceWallOffset);
  dim("width", c.width, 2.0 * kSourceWallOffset);
  dim("height", c.height, kSourceHeight);
  if (!std::isfinite(c.wwr) || c.wwr <= 0.0 || c.wwr >= 1.0) {
    errors.push_back({"wwr", "must lie strictly between 0 and 1"});
  }
  if (!std::isfinite(c.furniture_fraction) || c.furniture_fraction <= 0.0 || c.furniture_fraction >= 1.0) {
    errors.push_back({"furniture_fraction", "must lie strictly between 0 and 1"});
  }
  auto material = [&](const char* field, const MaterialSpec& m) {
    try {
      m.validate();
    } catch (const std::invalid_argument& e) {
      errors.push_back({field, e.what()});
    }
  };
  material("wall", c.wall);
  material("floor", c.floor);
  material("ceiling", c.ceiling);
  material("window", c.window);
  material("furniture_material", c.furniture_material);
  if (c.shading != Shading::kNone) material("shading", c.shading_material);
  return errors;
}

nlohmann::json to_json(const RoomConfig& c) {
  return {
      {"length", c.length},
      {"width", c.width},
      {"height", c.height},
      {"wwr", c.wwr},
      {"shading", to_string(c.shading)},
      {"furniture_fraction", c.furniture_fraction},
      {"wall", c.wall.name},
      {"floor", c.floor.name},
      {"ceiling", c.ceiling.name},
      {"window", c.window.name},
  };
}

RoomConfig config_from_json(const nlohmann::json& doc, const MaterialDatabase& db) {
  std::vector<FieldError> errors;
  if (!doc.is_object()) throw ConfigError(std::vector<FieldError>{{"", "request body must be an object"}});

  auto number = [&](const char* field, double fallback) -> double {
    auto it = doc.find(field);
    if (it == doc.end()) {
      errors.push_back({field, "missing"});
      return fallback;
    }
    if (!it->is_number()) {
      errors.push_back({field, "must be a number"});
      return fallback;
    }
    return it->get<double>();
  };

  RoomConfig c;
  c.length = number("length", 0.0);
  c.width = number("width", 0.0);
  c.height = number("height", 0.0);
  c.wwr = number("wwr", 0.0);
  c.furniture_fraction = number("furniture_fraction", 0.0);

  if (auto it = doc.find("shading"); it == doc.end()) {
    errors.push_back({"shading", "missing"});
  } else if (!it->is_string()) {
    errors.push_back({"shading", "must be one of none, roller_blind, curtain"});
  } else {
    try {
      c.shading = parse_shading(it->get<std::string>());
    } catch (const std::invalid_argument& e) {
      errors.push_back({"shading", e.what()});
    }
  }

  // Unknown names are collected and reported separately from shape errors.
  std::vector<std::string> unknown;
  auto material = [&](const char* field, MaterialSpec& out) {
    auto it = doc.find(field);
    if (it == doc.end()) {
      errors.push_back({field, "missing"});
      return;
    }
    if (it->is_string()) {
      const auto name = it->get<std::string>();
      if (db.contains(name)) {
        out = db.at(name);
      } else {
        unknown.push_back(name);
      }
      return;
    }
    if (!it->is_object()) {
      errors.push_back({field, "must be a material name or {absorption:[6], scattering:[6]}"});
      return;
    }
    auto read_row = [&](const char* key, BandArray& row, bool required, double fallback) {
      auto r = it->find(key);
      if (r == it->end()) {
        if (required) errors.push_back({std::string(field) + "." + key, "missing"});
        row.fill(fallback);
        return;
      }
      if (!r->is_array() || r->size() != kNumBands) {
        errors.push_back({std::string(field) + "." + key, "must be an array of 6 numbers"});
        return;
      }
      for (std::size_t b = 0; b < kNumBands; ++b) {
        if (!(*r)[b].is_number()) {
          errors.push_back({std::string(field) + "." + key, "must be an array of 6 numbers"});
          return;
        }
        row[b] = (*r)[b].get<double>();
      }
    };
    out.name = it->value("name", std::string("custom_") + field);
    read_row("absorption", out.absorption, true, 0.0);
    read_row("scattering", out.scattering, false, 0.1);
  };
  material("wall", c.wall);
  material("floor", c.floor);
  material("ceiling", c.ceiling);
  material("window", c.window);

  if (!unknown.empty()) throw MaterialNotFound(unknown.front(), db.names());

  if (db.contains("furniture")) c.furniture_material = db.at("furniture");
  if (c.shading != Shading::kNone) {
    const auto shade = to_string(c.shading);
    if (!db.contains(shade)) throw MaterialNotFound(shade, db.names());
    c.shading_material = db.at(shade);
  }

  if (errors.empty()) {
    auto semantic = validate(c);
    errors.insert(errors.end(), semantic.begin(), semantic.end());
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

std::size_t GridSpec::size() const {
  return dimensions.size() * wwr.size() * shading.size() * furniture.size() * wall.size() * floor.size() *
         ceiling.size() * window.size();
}

GridSpec training_grid_spec() {
  GridSpec g;
  g.id = "train";
  g.dimensions = {{3, 4, 3.5}, {6, 7, 3.5}, {8, 10, 3.5}};
  g.wwr = {0.2, 0.5, 0.8};
  g.shading = {Shading::kNone, Shading::kRollerBlind, Shading::kCurtain};
  g.furniture = {0.2, 0.4};
  g.wall = {"gypsum", "wooden", "acoustic_coating"};
  g.floor = {"ceramic", "parquet", "carpet"};
  g.ceiling = {"concrete", "gypsum", "acoustic_tile"};
  g.window = {"single_glazed", "double_glazed"};
  return g;
}

GridSpec validation_grid_spec() {
  GridSpec g;
  g.id = "validation";
  g.dimensions = {{6, 7, 3.5}};
  g.wwr = {0.5};
  g.shading = {Shading::kNone};
  g.furniture = {0.2, 0.4};
  g.wall = {"gypsum_panel", "brick", "concrete"};
  g.floor = {"pvc", "thin_carpet"};
  g.ceiling = {"slotted_panel", "acoustic_tile"};
  g.window = {"single_glazed", "double_glazed"};
  return g;
}

GridSpec reduced_grid_spec() {
  GridSpec g;
  g.id = "reduced";
  g.dimensions = {{3, 4, 3.5}, {8, 10, 3.5}};
  g.wwr = {0.2, 0.5, 0.8};
  g.shading = {Shading::kNone};
  g.furniture = {0.2, 0.4};
  g.wall = {"gypsum", "acoustic_coating"};
  g.floor = {"ceramic", "carpet"};
  g.ceiling = {"concrete", "acoustic_tile"};
  g.window = {"single_glazed", "double_glazed"};
  return g;
}

nlohmann::json to_json(const GridSpec& g) {
  nlohmann::json dims = nlohmann::json::array();
  for (const auto& d : g.dimensions) dims.push_back({d.x, d.y, d.z});
  nlohmann::json shading = nlohmann::json::array();
  for (auto s : g.shading) shading.push_back(to_string(s));
  return {{"id", g.id},           {"dimensions", dims}, {"wwr", g.wwr},         {"shading", shading},
          {"furniture", g.furniture}, {"wall", g.wall},     {"floor", g.floor},     {"ceiling", g.ceiling},
          {"window", g.window}};
}

GridSpec grid_spec_from_json(const nlohmann::json& doc) {
  GridSpec g;
  g.id = doc.value("id", std::string("custom"));
  for (const auto& d : doc.at("dimensions")) {
    if (!d.is_array() || d.size() != 3) throw std::invalid_argument("grid dimensions entries must be [L, W, H]");
    g.dimensions.push_back({d[0].get<double>(), d[1].get<double>(), d[2].get<double>()});
  }
  g.wwr = doc.at("wwr").get<std::vector<double>>();
  for (const auto& s : doc.at("shading")) g.shading.push_back(parse_shading(s.get<std::string>()));
  g.furniture = doc.at("furniture").get<std::vector<double>>();
  g.wall = doc.at("wall").get<std::vector<std::string>>();
  g.floor = doc.at("floor").get<std::vector<std::string>>();
  g.ceiling = doc.at("ceiling").get<std::vector<std::string>>();
  g.window = doc.at("window").get<std::vector<std::string>>();
  if (g.size() == 0) throw std::invalid_argument("grid '" + g.id + "' has an empty variable list");
  return g;
}

std::vector<RoomConfig> enumerate_grid(const GridSpec& g, const MaterialDatabase& db) {
  std::vector<RoomConfig> out;
  out.reserve(g.size());
  const MaterialSpec furniture = db.at("furniture");
  for (const auto& dims : g.dimensions)
    for (double wwr : g.wwr)
      for (Shading shading : g.shading)
        for (double furn : g.furniture)
          for (const auto& wall : g.wall)
            for (const auto& floor : g.floor)
              for (const auto& ceiling : g.ceiling)
                for (const auto& window : g.window) {
                  RoomConfig c;
                  c.length = dims.x;
                  c.width = dims.y;
                  c.height = dims.z;
                  c.wwr = wwr;
                  c.shading = shading;
                  c.furniture_fraction = furn;
                  c.wall = db.at(wall);
                  c.floor = db.at(floor);
                  c.ceiling = db.at(ceiling);
                  c.window = db.at(window);
                  if (shading != Shading::kNone) c.shading_material = db.at(to_string(shading));
                  c.furniture_material = furniture;
                  if (auto errors = validate(c); !errors.empty()) throw ConfigError(std::move(errors));
                  out.push_back(std::move(c));
                }
  return out;
}

std::vector<RoomConfig> enumerate_training_grid(const MaterialDatabase& db) {
  return enumerate_grid(training_grid_spec(), db);
}

std::vector<RoomConfig> enumerate_validation_grid(const MaterialDatabase& db) {
  return enumerate_grid(validation_grid_spec(), db);
}

double SceneGeometry::volume() const {
  const Vec3 e = shell.extent();
  double v = e.x * e.y * e.z;
  for (const auto& box : obstacles) {
    const Vec3 b = box.extent();
    v -= b.x * b.y * b.z;
  }
  return v;
}

double SceneGeometry::total_area() const {
  double a = 0.0;
  for (const auto& s : surfaces) a += s.area;
  return a;
}

SceneGeometry build_geometry(const RoomConfig& c) {
  if (auto errors = validate(c); !errors.empty()) throw ConfigError(std::move(errors));

  const double L = c.length, W = c.width, H = c.height;
  const double scale = std::sqrt(c.wwr);
  const double win_w = W * scale, win_h = H * scale;
  const double y0 = 0.5 * (W - win_w), y1 = y0 + win_w;
  const double z0 = 0.5 * (H - win_h), z1 = z0 + win_h;
  if (!(y0 > 0.0 && z0 > 0.0 && y1 < W && z1 < H)) {
    throw ConfigError(std::vector<FieldError>{{"wwr", "window rectangle does not fit inside the window wall"}});
  }

  SceneGeometry g;
  g.shell = {{0, 0, 0}, {L, W, H}};
  auto& s = g.surfaces;
  const auto K = SurfaceKind::kShell;
  // axis_rect spans (u, v) on axes (axis+1, axis+2): x -> (y, z), y -> (z, x), z -> (x, y).
  s.push_back(axis_rect("floor", K, 2, 0.0, +1, 0, L, 0, W, c.floor));
  s.push_back(axis_rect("ceiling", K, 2, H, -1, 0, L, 0, W, c.ceiling));
  s.push_back(axis_rect("wall_x0_bottom", K, 0, 0.0, +1, 0, W, 0, z0, c.wall));
  s.push_back(axis_rect("wall_x0_top", K, 0, 0.0, +1, 0, W, z1, H, c.wall));
  s.push_back(axis_rect("wall_x0_left", K, 0, 0.0, +1, 0, y0, z0, z1, c.wall));
  s.push_back(axis_rect("wall_x0_right", K, 0, 0.0, +1, y1, W, z0, z1, c.wall));
  s.push_back(axis_rect("window", SurfaceKind::kWindow, 0, 0.0, +1, y0, y1, z0, z1, effective_window(c)));
  s.push_back(axis_rect("wall_xL", K, 0, L, -1, 0, W, 0, H, c.wall));
  s.push_back(axis_rect("wall_y0", K, 1, 0.0, +1, 0, H, 0, L, c.wall));
  s.push_back(axis_rect("wall_yW", K, 1, W, -1, 0, H, 0, L, c.wall));

  const double fscale = std::sqrt(c.furniture_fraction);
  const double fx = L * fscale, fy = W * fscale;
  const Aabb box{{0.5 * (L - fx), 0.5 * (W - fy), 0.0}, {0.5 * (L + fx), 0.5 * (W + fy), kFurnitureHeight}};
  g.obstacles.push_back(box);
  const auto F = SurfaceKind::kFurniture;
  const auto& fm = c.furniture_material;
  s.push_back(axis_rect("furniture_top", F, 2, box.hi.z, +1, box.lo.x, box.hi.x, box.lo.y, box.hi.y, fm));
  s.push_back(axis_rect("furniture_x0", F, 0, box.lo.x, -1, box.lo.y, box.hi.y, box.lo.z, box.hi.z, fm));
  s.push_back(axis_rect("furniture_x1", F, 0, box.hi.x, +1, box.lo.y, box.hi.y, box.lo.z, box.hi.z, fm));
  s.push_back(axis_rect("furniture_y0", F, 1, box.lo.y, -1, box.lo.z, box.hi.z, box.lo.x, box.hi.x, fm));
  s.push_back(axis_rect("furniture_y1", F, 1, box.hi.y, +1, box.lo.z, box.hi.z, box.lo.x, box.hi.x, fm));

  g.source = {L - kSourceWallOffset, kSourceWallOffset, kSourceHeight};
  g.receiver = {0.5 * L, 0.5 * W, kReceiverHeight};
  return g;
}

SceneGeometry make_empty_box(double L, double W, double H, const MaterialSpec& m, const Vec3& source,
                             const Vec3& receiver) {
  SceneGeometry g;
  g.shell = {{0, 0, 0}, {L, W, H}};
  const auto K = SurfaceKind::kShell;
  g.surfaces.push_back(axis_rect("floor", K, 2, 0.0, +1, 0, L, 0, W, m));
  g.surfaces.push_back(axis_rect("ceiling", K, 2, H, -1, 0, L, 0, W, m));
  g.surfaces.push_back(axis_rect("wall_x0", K, 0, 0.0, +1, 0, W, 0, H, m));
  g.surfaces.push_back(axis_rect("wall_xL", K, 0, L, -1, 0, W, 0, H, m));
  g.surfaces.push_back(axis_rect("wall_y0", K, 1, 0.0, +1, 0, H, 0, L, m));
  g.surfaces.push_back(axis_rect("wall_yW", K, 1, W, -1, 0, H, 0, L, m));
  if (!g.shell.contains(source) || !g.shell.contains(receiver)) {
    throw std::invalid_argument("source and receiver must lie strictly inside the box");
  }
  g.source = source;
  g.receiver = receiver;
  return g;
}

}  // namespace roomsound
