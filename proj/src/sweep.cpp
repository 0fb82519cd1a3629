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


#include "roomsound/sweep.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "roomsound/rng.hpp"

namespace roomsound {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kJournal = "journal.ndjson";
constexpr const char* kResults = "results.csv";

std::set<std::string> grid_material_names(const GridSpec& grid) {
  std::set<std::string> names = {"furniture"};
  for (const auto* list : {&grid.wall, &grid.floor, &grid.ceiling, &grid.window}) names.insert(list->begin(), list->end());
  for (Shading s : grid.shading) {
    if (s != Shading::kNone) names.insert(to_string(s));
  }
  return names;
}

nlohmann::json materials_json(const GridSpec& grid, const MaterialDatabase& db) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& name : grid_material_names(grid)) {
    const MaterialSpec& m = db.at(name);
    out[name] = {{"absorption", m.absorption}, {"scattering", m.scattering}};
  }
  return out;
}

MaterialDatabase materials_from_json(const nlohmann::json& doc) {
  std::vector<MaterialSpec> specs;
  for (const auto& [name, m] : doc.items()) {
    specs.push_back({name, m.at("absorption").get<BandArray>(), m.at("scattering").get<BandArray>()});
  }
  return MaterialDatabase(std::move(specs));
}

nlohmann::json make_manifest(const GridSpec& grid, const MaterialDatabase& db, const SimulationParams& params,
                             std::uint64_t base_seed) {
  return {{"format", "roomsound-sweep"},
          {"version", 1},
          {"grid", to_json(grid)},
          {"materials", materials_json(grid, db)},
          {"grid_hash", grid_hash(grid, db)},
          {"simulation", to_json(params)},
          {"base_seed", base_seed},
          {"count", grid.size()}};
}

// Drops a partially written last line left by an interrupted run.
void repair_journal(const fs::path& path) {
  if (!fs::exists(path)) return;
  std::ifstream in(path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.empty() || text.back() == '\n') return;
  const std::size_t keep = text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1;
  in.close();
  fs::resize_file(path, keep);
}

std::map<std::size_t, SweepRecord> read_journal(const fs::path& path) {
  std::map<std::size_t, SweepRecord> records;
  std::ifstream in(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      if (in.peek() == EOF) break;  // torn final record
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": corrupt journal record");
    }
    SweepRecord r;
    r.index = doc.at("index").get<std::size_t>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("indices")) {
      r.indices = indices_from_json(doc.at("indices"));
    } else {
      r.error = doc.value("error", std::string("unknown failure"));
    }
    records[r.index] = std::move(r);
  }
  return records;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_results(const fs::path& path, const std::vector<RoomConfig>& configs,
                   const std::map<std::size_t, SweepRecord>& records) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << "index,seed,length,width,height,wwr,shading,furniture,wall,floor,ceiling,window";
    for (const auto& n : AcousticIndices::names()) out << ',' << n;
    out << '\n';
    for (const auto& [index, r] : records) {
      const RoomConfig& c = configs[index];
      out << index << ',' << r.seed << ',' << format_double(c.length) << ',' << format_double(c.width) << ','
          << format_double(c.height) << ',' << format_double(c.wwr) << ',' << to_string(c.shading) << ','
          << format_double(c.furniture_fraction) << ',' << c.wall.name << ',' << c.floor.name << ','
          << c.ceiling.name << ',' << c.window.name;
      for (double v : r.indices->flat()) out << ',' << format_double(v);
      out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

std::uint64_t config_seed(const std::string& grid_id, std::size_t index, std::uint64_t base_seed) {
  return mix_seed(mix_seed(base_seed, fnv1a64(grid_id)), index);
}

std::string grid_hash(const GridSpec& grid, const MaterialDatabase& db) {
  const std::string text = to_json(grid).dump() + materials_json(grid, db).dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

SweepSummary run_sweep(const GridSpec& grid, const MaterialDatabase& db, const SimulationParams& params,
                       std::uint64_t base_seed, const fs::path& dir, const SweepOptions& options) {
  params.validate();
  const std::vector<RoomConfig> configs = enumerate_grid(grid, db);
  fs::create_directories(dir);

  const nlohmann::json manifest = make_manifest(grid, db, params, base_seed);
  const fs::path manifest_path = dir / kManifest;
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    const nlohmann::json existing = nlohmann::json::parse(in);
    if (existing != manifest) {
      throw std::runtime_error(dir.string() + " holds a sweep with a different grid, materials, seed or simulator "
                                              "parameters; use a fresh directory");
    }
  } else {
    const fs::path tmp = manifest_path.string() + ".tmp";
    std::ofstream(tmp) << manifest.dump(2) << '\n';
    fs::rename(tmp, manifest_path);
  }

  const fs::path journal_path = dir / kJournal;
  repair_journal(journal_path);
  std::map<std::size_t, SweepRecord> records = read_journal(journal_path);

  SweepSummary summary;
  summary.total = configs.size();
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    auto it = records.find(i);
    if (it != records.end() && it->second.indices) {
      ++summary.skipped;
    } else {
      todo.push_back(i);
    }
  }
  if (options.max_new && todo.size() > *options.max_new) todo.resize(*options.max_new);

  std::ofstream journal(journal_path, std::ios::app);
  if (!journal) throw std::runtime_error("cannot append to " + journal_path.string());
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::size_t done = summary.skipped;

  auto work = [&] {
    for (std::size_t k = next++; k < todo.size(); k = next++) {
      const std::size_t index = todo[k];
      SweepRecord r;
      r.index = index;
      r.seed = config_seed(grid.id, index, base_seed);
      SimulationParams p = params;
      p.rng_seed = r.seed;
      p.worker_count = 1;
      try {
        r.indices = compute_all(simulate(build_geometry(configs[index]), p));
      } catch (const std::exception& e) {
        r.error = e.what();
      }
      nlohmann::json line = {{"index", r.index}, {"seed", r.seed}};
      if (r.indices) {
        line["indices"] = to_json(*r.indices);
      } else {
        line["error"] = r.error;
      }
      std::lock_guard lock(mu);
      journal << line.dump() << '\n';
      journal.flush();
      records[index] = std::move(r);
      ++done;
      if (options.progress) options.progress(done, configs.size());
    }
  };

  const auto workers = static_cast<std::size_t>(std::max(1, options.worker_count));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, todo.size()); ++w) pool.emplace_back(work);
  }
  journal.close();

  summary.computed = todo.size();
  for (const auto& [index, r] : records) {
    if (!r.indices) summary.failures.emplace_back(index, r.error);
  }
  std::size_t ok = 0;
  for (const auto& [index, r] : records) ok += r.indices ? 1 : 0;
  summary.complete = ok == configs.size();
  if (summary.complete) write_results(dir / kResults, configs, records);
  return summary;
}

bool SweepStore::complete() const {
  if (records.size() != configs.size()) return false;
  for (const auto& r : records) {
    if (!r.indices) return false;
  }
  return true;
}

SweepStore load_sweep(const fs::path& dir) {
  std::ifstream in(dir / kManifest);
  if (!in) throw std::runtime_error("no sweep manifest in " + dir.string());
  const nlohmann::json manifest = nlohmann::json::parse(in);
  if (manifest.value("format", "") != "roomsound-sweep" || manifest.value("version", 0) != 1) {
    throw std::runtime_error(dir.string() + ": unsupported sweep manifest");
  }
  SweepStore store;
  store.grid = grid_spec_from_json(manifest.at("grid"));
  store.materials = materials_from_json(manifest.at("materials"));
  store.grid_hash = manifest.at("grid_hash").get<std::string>();
  store.params = simulation_params_from_json(manifest.at("simulation"));
  store.base_seed = manifest.at("base_seed").get<std::uint64_t>();
  store.configs = enumerate_grid(store.grid, store.materials);
  for (auto& [index, r] : read_journal(dir / kJournal)) {
    if (index < store.configs.size()) store.records.push_back(std::move(r));
  }
  return store;
}

Dataset dataset_from_sweep(const SweepStore& store) {
  std::vector<std::string> problems;
  std::size_t next = 0;
  for (const auto& r : store.records) {
    for (; next < r.index; ++next) problems.push_back("config " + std::to_string(next) + ": not simulated");
    next = r.index + 1;
    if (!r.indices) {
      problems.push_back("config " + std::to_string(r.index) + ": " + r.error);
      continue;
    }
    const auto values = r.indices->flat();
    for (std::size_t t = 0; t < values.size(); ++t) {
      if (!std::isfinite(values[t])) {
        problems.push_back("config " + std::to_string(r.index) + ": " + AcousticIndices::names()[t] + " is not finite");
      }
    }
  }
  for (; next < store.configs.size(); ++next) problems.push_back("config " + std::to_string(next) + ": not simulated");
  if (!problems.empty()) {
    std::string msg = "sweep is not usable as a dataset (" + std::to_string(problems.size()) + " problems):";
    for (std::size_t i = 0; i < problems.size() && i < 20; ++i) msg += "\n  " + problems[i];
    throw std::runtime_error(msg);
  }
  Dataset ds;
  ds.provenance.grid_id = store.grid.id;
  ds.provenance.grid_hash = store.grid_hash;
  ds.provenance.base_seed = store.base_seed;
  ds.provenance.sim = store.params;
  for (const auto& r : store.records) {
    ds.config_index.push_back(r.index);
    ds.config_seed.push_back(r.seed);
    ds.configs.push_back(store.configs[r.index]);
    ds.targets.push_back(r.indices->flat());
  }
  return ds;
}

}  // namespace roomsound
