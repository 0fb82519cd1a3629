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


#ifndef ROOMSOUND_SWEEP_HPP_
#define ROOMSOUND_SWEEP_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "roomsound/acoustics.hpp"
#include "roomsound/dataset.hpp"
#include "roomsound/indices.hpp"
#include "roomsound/room_model.hpp"

namespace roomsound {

// Per-config simulation seed.
std::uint64_t config_seed(const std::string& grid_id, std::size_t index, std::uint64_t base_seed);

// Hex digest of the grid and the coefficients of every material it uses.
std::string grid_hash(const GridSpec& grid, const MaterialDatabase& db);

struct SweepOptions {
  int worker_count = 1;
  // Stop after this many newly simulated configs (used to test resumption).
  std::optional<std::size_t> max_new;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

struct SweepSummary {
  std::size_t total = 0;
  std::size_t skipped = 0;  // already in the journal
  std::size_t computed = 0;
  std::vector<std::pair<std::size_t, std::string>> failures;
  bool complete = false;
};

/// Simulates every config of `grid` into `dir`:
///   manifest.json   grid, materials, simulator parameters, base seed
///   journal.ndjson  one record per finished config, append-only
///   results.csv     written once every config succeeded, sorted by index
/// Configs with a successful journal record are skipped, so an interrupted
/// sweep resumes where it stopped. Failed configs are retried on the next run.
/// Throws std::runtime_error when `dir` holds a sweep with different inputs.
SweepSummary run_sweep(const GridSpec& grid, const MaterialDatabase& db, const SimulationParams& params,
                       std::uint64_t base_seed, const std::filesystem::path& dir, const SweepOptions& options = {});

struct SweepRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::optional<AcousticIndices> indices;
  std::string error;
};

struct SweepStore {
  GridSpec grid;
  MaterialDatabase materials;
  std::string grid_hash;
  SimulationParams params;
  std::uint64_t base_seed = 0;
  std::vector<RoomConfig> configs;
  // Latest record per config, sorted by index. Missing configs are absent.
  std::vector<SweepRecord> records;

  bool complete() const;
};

SweepStore load_sweep(const std::filesystem::path& dir);

/// Unsplit dataset over every config of a complete sweep. Throws
/// std::runtime_error listing missing or failed configs.
Dataset dataset_from_sweep(const SweepStore& store);

}  // namespace roomsound

#endif  // ROOMSOUND_SWEEP_HPP_
