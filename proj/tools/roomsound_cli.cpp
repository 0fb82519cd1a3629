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


// roomsound command-line front end. Exit codes: 0 success, 1 usage error,
// 2 runtime failure (message on stderr).

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "roomsound/acoustics.hpp"
#include "roomsound/dataset.hpp"
#include "roomsound/indices.hpp"
#include "roomsound/mlp.hpp"
#include "roomsound/room_model.hpp"
#include "roomsound/service.hpp"
#include "roomsound/shapley.hpp"
#include "roomsound/surrogate.hpp"
#include "roomsound/sweep.hpp"
#include "roomsound/validation.hpp"

namespace fs = std::filesystem;
using namespace roomsound;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void print_indices(std::ostream& out, const AcousticIndices& a) {
  char line[160];
  std::snprintf(line, sizeof line, "%-8s", "index");
  out << line;
  for (int hz : kBandHz) {
    std::snprintf(line, sizeof line, "%10d", hz);
    out << line;
  }
  out << '\n';
  auto row = [&](const char* name, const BandArray& v) {
    std::snprintf(line, sizeof line, "%-8s", name);
    out << line;
    for (double x : v) {
      std::snprintf(line, sizeof line, "%10.3f", x);
      out << line;
    }
    out << '\n';
  };
  row("T30 s", a.t30);
  row("EDT s", a.edt);
  row("C80 dB", a.c80);
  row("D50", a.d50);
  std::snprintf(line, sizeof line, "%-8s%10.3f\n", "STI", a.sti);
  out << line;
  for (std::size_t b = 0; b < kNumBands; ++b) {
    if (a.t30_range[b] != DecayRange::kT30) {
      out << "note: " << kBandHz[b] << " Hz reverberation time from " << to_string(a.t30_range[b]) << " range\n";
    }
  }
}

GridSpec grid_from_arg(const std::string& arg) {
  if (arg == "train") return training_grid_spec();
  if (arg == "validation") return validation_grid_spec();
  if (arg == "reduced") return reduced_grid_spec();
  std::ifstream in(arg);
  if (!in) throw UsageError("--grid must be train, validation, reduced or a grid file; cannot open '" + arg + "'");
  return grid_spec_from_json(nlohmann::json::parse(in));
}

std::pair<std::size_t, std::size_t> parse_split(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("--split must look like TRAIN:TEST, e.g. 2624:292");
  try {
    return {std::stoul(text.substr(0, colon)), std::stoul(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw UsageError("--split must look like TRAIN:TEST, e.g. 2624:292");
  }
}

std::optional<Split> parse_rows(const std::string& rows) {
  if (rows == "test") return Split::kTest;
  if (rows == "train") return Split::kTrain;
  if (rows == "all") return std::nullopt;
  throw UsageError("--rows must be test, train or all");
}

void print_report(std::ostream& out, const EvalReport& r) {
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %12s %12s %9s\n", "target", "MSE", "MAE", "R2");
  out << line;
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    std::snprintf(line, sizeof line, "%-12s %12.5g %12.5g %9.4f\n", r.names[i].c_str(), r.mse[i], r.mae[i], r.r2[i]);
    out << line;
  }
}

ApiServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"roomsound: room acoustics simulation and surrogate models"};
  app.require_subcommand(1);
  std::string materials_path;
  app.add_option("--materials", materials_path, "Material table (default: bundled data/materials.tsv)");

  auto load_db = [&] { return materials_path.empty() ? MaterialDatabase::builtin() : MaterialDatabase::load(materials_path); };

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Simulate every config of a grid (resumable)");
  std::string grid_arg = "train", sweep_out;
  int sweep_rays = 10000, sweep_workers = 1;
  std::uint64_t sweep_seed = 1;
  sweep->add_option("--grid", grid_arg, "train | validation | reduced | grid file")->capture_default_str();
  sweep->add_option("--rays", sweep_rays, "Rays per simulation")->capture_default_str()->check(CLI::PositiveNumber);
  sweep->add_option("--seed", sweep_seed, "Base seed")->capture_default_str();
  sweep->add_option("--out", sweep_out, "Sweep directory")->required();
  sweep->add_option("--workers", sweep_workers, "Parallel configs")->capture_default_str()->check(CLI::PositiveNumber);

  // dataset
  auto* dataset = app.add_subcommand("dataset", "Build a split dataset from a finished sweep");
  std::string ds_sweep, ds_split = "2624:292", ds_out;
  std::uint64_t ds_seed = 1;
  dataset->add_option("--sweep", ds_sweep, "Sweep directory")->required();
  dataset->add_option("--split", ds_split, "TRAIN:TEST row counts")->capture_default_str();
  dataset->add_option("--seed", ds_seed, "Split seed")->capture_default_str();
  dataset->add_option("--out", ds_out, "Dataset CSV path")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one surrogate model");
  std::string tr_dataset, tr_model, tr_out, tr_history;
  std::optional<int> tr_layers, tr_units, tr_batch, tr_epochs;
  std::optional<double> tr_dropout, tr_lr;
  std::uint64_t tr_seed = 1;
  bool tr_quiet = false;
  train_cmd->add_option("--dataset", tr_dataset, "Dataset CSV")->required();
  train_cmd->add_option("--model", tr_model, "125 | 250 | 500 | 1000 | 2000 | 4000 | sti")->required();
  train_cmd->add_option("--out", tr_out, "Model file")->required();
  train_cmd->add_option("--layers", tr_layers, "Hidden layers");
  train_cmd->add_option("--units", tr_units, "Hidden units per layer");
  train_cmd->add_option("--batch", tr_batch, "Batch size");
  train_cmd->add_option("--epochs", tr_epochs, "Epochs");
  train_cmd->add_option("--dropout", tr_dropout, "Dropout rate");
  bool tr_dropout_all = false;
  train_cmd->add_flag("--dropout-all-layers", tr_dropout_all, "Dropout after every hidden layer, not just the last");
  train_cmd->add_option("--lr", tr_lr, "Adam learning rate");
  train_cmd->add_option("--seed", tr_seed, "Initialisation and shuffling seed")->capture_default_str();
  train_cmd->add_option("--history", tr_history, "Write per-epoch losses to this CSV");
  train_cmd->add_flag("--quiet", tr_quiet, "No per-epoch progress");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score a model on dataset rows");
  std::string ev_model, ev_dataset, ev_rows = "test";
  eval_cmd->add_option("--model", ev_model, "Model file")->required();
  eval_cmd->add_option("--dataset", ev_dataset, "Dataset CSV")->required();
  eval_cmd->add_option("--rows", ev_rows, "test | train | all")->capture_default_str();

  // validate
  auto* validate_cmd = app.add_subcommand("validate", "Compare the surrogates with fresh simulations of the unseen grid");
  std::string va_models, va_out;
  int va_rays = 10000, va_workers = 1;
  std::uint64_t va_seed = 1;
  validate_cmd->add_option("--models", va_models, "Directory of model_<id>.json files")->envname("ROOMSOUND_MODELS_DIR")->required();
  validate_cmd->add_option("--out", va_out, "Report directory")->required();
  validate_cmd->add_option("--rays", va_rays, "Rays per simulation")->capture_default_str()->check(CLI::PositiveNumber);
  validate_cmd->add_option("--seed", va_seed, "Base seed")->capture_default_str();
  validate_cmd->add_option("--workers", va_workers, "Parallel simulations")->capture_default_str();

  // explain
  auto* explain_cmd = app.add_subcommand("explain", "Shapley attribution over the design variables");
  std::string ex_models, ex_dataset, ex_out, ex_rows = "test";
  explain_cmd->add_option("--models", ex_models, "Directory of model_<id>.json files")->envname("ROOMSOUND_MODELS_DIR")->required();
  explain_cmd->add_option("--dataset", ex_dataset, "Dataset CSV (background = train rows)")->required();
  explain_cmd->add_option("--out", ex_out, "Report directory")->required();
  explain_cmd->add_option("--rows", ex_rows, "Rows to explain: test | train | all")->capture_default_str();

  // simulate
  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate one room and print its indices");
  std::string si_config, si_ir;
  int si_rays = 10000;
  std::uint64_t si_seed = 1;
  bool si_json = false;
  simulate_cmd->add_option("--config", si_config, "Room config JSON")->required();
  simulate_cmd->add_option("--rays", si_rays, "Rays")->capture_default_str()->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--seed", si_seed, "Seed")->capture_default_str();
  simulate_cmd->add_option("--ir", si_ir, "Also write the energy response as columnar text");
  simulate_cmd->add_flag("--json", si_json, "Print JSON instead of a table");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "HTTP prediction service");
  std::string se_models, se_host = "127.0.0.1", se_static;
  int se_port = 8080;
  serve_cmd->add_option("--models", se_models, "Directory of model_<id>.json files")->envname("ROOMSOUND_MODELS_DIR");
  serve_cmd->add_option("--port", se_port, "Port")->capture_default_str();
  serve_cmd->add_option("--host", se_host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--static", se_static, "Serve static web assets from this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sweep) {
      const GridSpec grid = grid_from_arg(grid_arg);
      SimulationParams params;
      params.ray_count = sweep_rays;
      SweepOptions options;
      options.worker_count = sweep_workers;
      const auto start = std::chrono::steady_clock::now();
      options.progress = [&](std::size_t done, std::size_t total) {
        if (done % 25 == 0 || done == total) {
          const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          std::fprintf(stderr, "\r%zu / %zu configs (%.0f s)", done, total, s);
        }
      };
      const SweepSummary s = run_sweep(grid, load_db(), params, sweep_seed, sweep_out, options);
      std::fprintf(stderr, "\n");
      std::cout << "grid " << grid.id << ": " << s.total << " configs, " << s.skipped << " already done, "
                << s.computed << " simulated, " << s.failures.size() << " failed\n";
      for (const auto& [index, message] : s.failures) std::cout << "  config " << index << ": " << message << '\n';
      return s.complete ? 0 : 2;
    }

    if (*dataset) {
      const auto [train_n, test_n] = parse_split(ds_split);
      Dataset ds = split_dataset(dataset_from_sweep(load_sweep(ds_sweep)), train_n, test_n, ds_seed);
      save_dataset(ds, ds_out);
      std::cout << "wrote " << ds_out << ": " << ds.count(Split::kTrain) << " train, " << ds.count(Split::kTest)
                << " test rows\n";
      return 0;
    }

    if (*train_cmd) {
      const Dataset ds = load_dataset(tr_dataset);
      MlpSpec spec = default_spec(tr_model);
      if (tr_layers) spec.hidden_layers = *tr_layers;
      if (tr_units) spec.hidden_units = *tr_units;
      if (tr_batch) spec.batch_size = *tr_batch;
      if (tr_epochs) spec.epochs = *tr_epochs;
      if (tr_dropout) spec.dropout = *tr_dropout;
      spec.dropout_all_layers = tr_dropout_all;
      if (tr_lr) spec.learning_rate = *tr_lr;
      spec.seed = tr_seed;
      MlpModel model = make_model(tr_model, spec, ds);
      const ModelData train_rows = model_view(ds, tr_model, Split::kTrain);
      const ModelData test_rows = model_view(ds, tr_model, Split::kTest);
      std::cerr << "model " << tr_model << ": " << spec.hidden_layers << " x " << spec.hidden_units << ", batch "
                << spec.batch_size << ", " << spec.epochs << " epochs, " << model.parameter_count()
                << " parameters\n";
      train(model, train_rows, test_rows.x.rows() ? &test_rows : nullptr, [&](int epoch, double tr, double te) {
        if (!tr_quiet && (epoch % 10 == 0 || epoch == spec.epochs)) {
          std::fprintf(stderr, "epoch %4d  train mse %.6f  test mse %.6f\n", epoch, tr, te);
        }
      });
      save_model(model, tr_out);
      if (!tr_history.empty()) {
        std::ofstream h(tr_history);
        h << "epoch,train_mse,test_mse\n";
        for (std::size_t e = 0; e < model.history.train_mse.size(); ++e) {
          h << e + 1 << ',' << model.history.train_mse[e] << ','
            << (e < model.history.test_mse.size() ? model.history.test_mse[e] : std::nan("")) << '\n';
        }
      }
      if (model.test_report) print_report(std::cout, *model.test_report);
      return 0;
    }

    if (*eval_cmd) {
      const MlpModel model = load_model(ev_model);
      const ModelData rows = model_view(load_dataset(ev_dataset), model.model_id, parse_rows(ev_rows));
      if (rows.x.rows() == 0) throw std::runtime_error("no rows selected");
      print_report(std::cout, evaluate(model, rows));
      return 0;
    }

    if (*validate_cmd) {
      const SurrogateSet models = SurrogateSet::load_dir(va_models);
      SimulationParams params;
      params.ray_count = va_rays;
      const GridSpec grid = validation_grid_spec();
      const ValidationReport report =
          run_validation(models, enumerate_grid(grid, load_db()), grid.id, params, va_seed, va_workers);
      write_validation_report(report, va_out);
      const PercentageSummary pct = percentage_error_summary(report);
      char line[160];
      std::snprintf(line, sizeof line, "%-12s %12s %12s\n", "target", "test MAE", "unseen MAE");
      std::cout << line;
      for (std::size_t t = 0; t < report.targets.size(); ++t) {
        std::snprintf(line, sizeof line, "%-12s %12.4f %12.4f\n", report.targets[t].c_str(), report.test_mae[t],
                      report.unseen_mae[t]);
        std::cout << line;
      }
      std::cout << "\nmean error, % of training range\n";
      for (std::size_t k = 0; k < pct.indicators.size(); ++k) {
        std::snprintf(line, sizeof line, "%-12s %11.2f%% %11.2f%%\n", pct.indicators[k].c_str(), pct.test_pct[k],
                      pct.unseen_pct[k]);
        std::cout << line;
      }
      for (std::size_t k = 0; k < report.failed_configs.size(); ++k) {
        std::cerr << "config " << report.failed_configs[k] << " failed: " << report.failure_messages[k] << '\n';
      }
      return 0;
    }

    if (*explain_cmd) {
      const SurrogateSet models = SurrogateSet::load_dir(ex_models);
      const Dataset ds = load_dataset(ex_dataset);
      const auto which = parse_rows(ex_rows);
      std::vector<RoomConfig> background, instances;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.split[i] == Split::kTrain) background.push_back(ds.configs[i]);
        if (!which || ds.split[i] == *which) instances.push_back(ds.configs[i]);
      }
      ShapAccumulator acc;
      for (const auto& [id, model] : models.models()) {
        const MlpModel* m = &model;
        DesignSpaceExplainer explainer([m](const Eigen::MatrixXd& x) { return predict_unit(*m, x); }, model_band(id),
                                       background);
        for (const auto& c : instances) acc.add(model.target_names, explainer.explain(c));
      }
      const ShapReport report = acc.report();
      fs::create_directories(ex_out);
      std::ofstream(fs::path(ex_out) / "shap_ranking.csv") << [&] {
        std::ostringstream s;
        write_ranking(s, report);
        return s.str();
      }();
      std::ofstream long_out(fs::path(ex_out) / "shap_long.csv");
      write_long(long_out, report);
      write_ranking(std::cout, report);
      return 0;
    }

    if (*simulate_cmd) {
      std::ifstream in(si_config);
      if (!in) throw UsageError("cannot open config file '" + si_config + "'");
      const RoomConfig config = config_from_json(nlohmann::json::parse(in), load_db());
      SimulationParams params;
      params.ray_count = si_rays;
      params.rng_seed = si_seed;
      const EnergyImpulseResponse response = simulate(build_geometry(config), params);
      if (!si_ir.empty()) {
        std::ofstream ir(si_ir);
        write_columnar(ir, response);
      }
      const AcousticIndices indices = compute_all(response);
      if (si_json) {
        std::cout << to_json(indices).dump(2) << '\n';
      } else {
        print_indices(std::cout, indices);
      }
      return 0;
    }

    if (*serve_cmd) {
      std::optional<SurrogateSet> models;
      if (!se_models.empty()) {
        models = SurrogateSet::load_dir(se_models);
      } else {
        std::cerr << "warning: no --models directory; /api/predict will answer 503\n";
      }
      const PredictionService service(load_db(), std::move(models));
      ApiServer server(service, se_static.empty() ? std::nullopt : std::optional<fs::path>(se_static));
      const int port = server.bind(se_host, se_port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on http://" << se_host << ':' << port << '\n';
      server.listen();
      g_server = nullptr;
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: invalid room config:\n";
    for (const auto& f : e.errors()) std::cerr << "  " << f.field << ": " << f.message << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
