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

#ifndef ROOMSOUND_ROOM_MODEL_HPP_
#define ROOMSOUND_ROOM_MODEL_HPP_

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "roomsound/bands.hpp"
#include "roomsound/vec3.hpp"

namespace roomsound {

/// Per-band surface properties. Absorption and scattering are energy
/// fractions in [0, 1].
struct MaterialSpec {
  std::string name;
  BandArray absorption{};
  BandArray scattering{};

  // Throws std::invalid_argument on out-of-range coefficients.
  void validate() const;
  friend bool operator==(const MaterialSpec&, const MaterialSpec&) = default;
};

class MaterialNotFound : public std::runtime_error {
 public:
  MaterialNotFound(std::string name, std::vector<std::string> valid_names);
  const std::string& name() const { return name_; }
  const std::vector<std::string>& valid_names() const { return valid_names_; }

 private:
  std::string name_;
  std::vector<std::string> valid_names_;
};

/// Named materials loaded from a whitespace-delimited table:
///
///   name a125 a250 a500 a1000 a2000 a4000 s125 s250 s500 s1000 s2000 s4000
///
/// Lines starting with '#' are comments. A trailing `# source...` note on a
/// data row is ignored as well.
class MaterialDatabase {
 public:
  MaterialDatabase() = default;
  explicit MaterialDatabase(std::vector<MaterialSpec> materials);

  static MaterialDatabase load(const std::filesystem::path& path);
  static MaterialDatabase parse(std::string_view text);
  // The bundled table (ROOMSOUND_DATA_DIR env var or the compiled-in data dir).
  static MaterialDatabase builtin();
  static std::filesystem::path builtin_path();

  const MaterialSpec& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::vector<std::string> names() const;
  const std::vector<MaterialSpec>& materials() const { return materials_; }

 private:
  std::vector<MaterialSpec> materials_;
  std::map<std::string, std::size_t> index_;
};

enum class Shading { kNone, kRollerBlind, kCurtain };

std::string to_string(Shading shading);
Shading parse_shading(std::string_view text);

struct RoomConfig {
  double length = 0.0;  // x extent, m
  double width = 0.0;   // y extent, m; the window wall spans width x height
  double height = 0.0;  // z extent, m
  double wwr = 0.0;
  Shading shading = Shading::kNone;
  double furniture_fraction = 0.0;
  MaterialSpec wall;
  MaterialSpec floor;
  MaterialSpec ceiling;
  MaterialSpec window;
  // Used when shading != kNone; replaces the glazing coefficients.
  MaterialSpec shading_material;
  MaterialSpec furniture_material;

  double volume() const { return length * width * height; }
  double window_wall_area() const { return width * height; }
  double window_area() const { return wwr * window_wall_area(); }

  friend bool operator==(const RoomConfig&, const RoomConfig&) = default;
};

/// Window surface properties after applying the shading override.
MaterialSpec effective_window(const RoomConfig& config);

struct FieldError {
  std::string field;
  std::string message;
};

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<FieldError> errors);
  const std::vector<FieldError>& errors() const { return errors_; }

 private:
  std::vector<FieldError> errors_;
};

// Empty when the config satisfies every invariant.
std::vector<FieldError> validate(const RoomConfig& config);

// Flat key-value document. Materials are written by name.
nlohmann::json to_json(const RoomConfig& config);

/// Parses the flat document. Material fields are either a database name or an
/// object {"absorption": [6], "scattering": [6]} (scattering optional, 0.1).
/// Throws ConfigError for malformed fields and MaterialNotFound for unknown
/// names.
RoomConfig config_from_json(const nlohmann::json& doc, const MaterialDatabase& db);

/// Value lists per design variable. Enumeration order is lexicographic with
/// dimensions outermost and window innermost.
struct GridSpec {
  std::string id;
  std::vector<Vec3> dimensions;
  std::vector<double> wwr;
  std::vector<Shading> shading;
  std::vector<double> furniture;
  std::vector<std::string> wall;
  std::vector<std::string> floor;
  std::vector<std::string> ceiling;
  std::vector<std::string> window;

  std::size_t size() const;
};

GridSpec training_grid_spec();
GridSpec validation_grid_spec();
// 2 dims x 2 wall x 2 floor x 2 ceiling x 3 WWR x 2 furniture x 2 window.
GridSpec reduced_grid_spec();
GridSpec grid_spec_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const GridSpec& grid);

std::vector<RoomConfig> enumerate_grid(const GridSpec& grid, const MaterialDatabase& db);
std::vector<RoomConfig> enumerate_training_grid(const MaterialDatabase& db);
std::vector<RoomConfig> enumerate_validation_grid(const MaterialDatabase& db);

enum class SurfaceKind { kShell, kWindow, kFurniture };

struct Surface {
  std::string label;
  SurfaceKind kind = SurfaceKind::kShell;
  std::vector<Vec3> vertices;  // counter-clockwise seen from the air side
  Vec3 normal;                 // unit normal pointing into the air volume
  double area = 0.0;
  MaterialSpec material;
};

struct SceneGeometry {
  std::vector<Surface> surfaces;
  Aabb shell;
  std::vector<Aabb> obstacles;
  Vec3 source;
  Vec3 receiver;

  double volume() const;
  double total_area() const;
  bool is_shell(const Surface& s) const { return s.kind != SurfaceKind::kFurniture; }
};

inline constexpr double kFurnitureHeight = 0.75;
inline constexpr double kSourceWallOffset = 0.5;
inline constexpr double kSourceHeight = 1.5;
inline constexpr double kReceiverHeight = 1.2;

/// Axis-aligned shoebox with the window carved into the x = 0 wall, one
/// centered furniture box, a corner source and a centered receiver.
SceneGeometry build_geometry(const RoomConfig& config);

/// Every shell edge segment is shared by exactly two shell polygons. Edges
/// are split at all shell vertices first, so T-junctions around the window
/// are handled.
bool shell_is_watertight(const SceneGeometry& geometry);

/// Convenience: a uniform empty box (no window, no furniture) for engine tests.
SceneGeometry make_empty_box(double length, double width, double height, const MaterialSpec& material,
                             const Vec3& source, const Vec3& receiver);

}  // namespace roomsound

#endif  // ROOMSOUND_ROOM_MODEL_HPP_
