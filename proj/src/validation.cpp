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


#include "roomsound/validation.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

#include "roomsound/indices.hpp"
#include "roomsound/sweep.hpp"

namespace roomsound {

std::vector<double> column_mae(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& truth) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
    throw std::invalid_argument("prediction and truth shapes differ");
  }
  std::vector<double> out;
  for (Eigen::Index j = 0; j < truth.cols(); ++j) {
    double sum = 0.0;
    std::size_t n = 0;
    for (Eigen::Index i = 0; i < truth.rows(); ++i) {
      if (!std::isfinite(truth(i, j))) continue;
      sum += std::abs(predicted(i, j) - truth(i, j));
      ++n;
    }
    out.push_back(n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

std::vector<double> test_split_mae(const SurrogateSet& models, const Dataset& dataset) {
  std::vector<double> mae(AcousticIndices::kTargetCount, 0.0);
  for (const auto& [id, model] : models.models()) {
    const ModelData rows = model_view(dataset, id, Split::kTest);
    if (rows.x.rows() == 0) throw std::invalid_argument("dataset has no test rows");
    const EvalReport r = evaluate(model, rows);
    const auto targets = model_target_indices(id);
    for (std::size_t t = 0; t < targets.size(); ++t) mae[targets[t]] = r.mae[t];
  }
  return mae;
}

ValidationReport compare(const Eigen::MatrixXd& simulated, const Eigen::MatrixXd& predicted,
                         const SurrogateSet& models) {
  ValidationReport r;
  r.targets = AcousticIndices::names();
  r.simulated = simulated;
  r.predicted = predicted;
  r.unseen_mae = column_mae(predicted, simulated);
  r.test_mae.assign(AcousticIndices::kTargetCount, 0.0);
  r.train_range.assign(AcousticIndices::kTargetCount, 0.0);
  for (const auto& [id, model] : models.models()) {
    if (!model.test_report) throw std::invalid_argument("model " + id + " has no stored test report");
    const auto targets = model_target_indices(id);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      r.test_mae[targets[t]] = model.test_report->mae.at(t);
      r.train_range[targets[t]] = model.target_scaling.max.at(t) - model.target_scaling.min.at(t);
    }
  }
  return r;
}

ValidationReport run_validation(const SurrogateSet& models, const std::vector<RoomConfig>& configs,
                                const std::string& grid_id, const SimulationParams& params, std::uint64_t base_seed,
                                int worker_count) {
  if (configs.empty()) throw std::invalid_argument("no validation configs");
  const auto n = static_cast<Eigen::Index>(configs.size());
  const auto n_targets = static_cast<Eigen::Index>(AcousticIndices::kTargetCount);
  Eigen::MatrixXd simulated(n, n_targets);
  std::vector<std::string> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      SimulationParams p = params;
      p.rng_seed = config_seed(grid_id, i, base_seed);
      p.worker_count = 1;
      const auto row = static_cast<Eigen::Index>(i);
      try {
        const auto values = compute_all(simulate(build_geometry(configs[i]), p)).flat();
        for (Eigen::Index t = 0; t < n_targets; ++t) simulated(row, t) = values[static_cast<std::size_t>(t)];
      } catch (const std::exception& e) {
        errors[i] = e.what();
        simulated.row(row).setConstant(std::numeric_limits<double>::quiet_NaN());
      }
    }
  };
  if (worker_count <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < worker_count; ++w) pool.emplace_back(work);
  }

  ValidationReport r = compare(simulated, models.predict_all(configs), models);
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      r.failed_configs.push_back(i);
      r.failure_messages.push_back(errors[i]);
    }
  }
  return r;
}

PercentageSummary percentage_error_summary(const ValidationReport& report) {
  if (report.targets.empty()) throw std::invalid_argument("empty validation report");
  PercentageSummary s;
  for (std::size_t t = 0; t < report.targets.size(); ++t) {
    if (!(report.train_range[t] > 0.0)) {
      throw std::invalid_argument("target " + report.targets[t] + " has zero training range");
    }
    s.target_test_pct.push_back(100.0 * report.test_mae[t] / report.train_range[t]);
    s.target_unseen_pct.push_back(100.0 * report.unseen_mae[t] / report.train_range[t]);
  }
  s.indicators = {"T30", "EDT", "C80", "D50", "STI"};
  for (std::size_t k = 0; k < s.indicators.size(); ++k) {
    const std::size_t first = k * kNumBands;
    const std::size_t count = k + 1 < s.indicators.size() ? kNumBands : 1;
    double a = 0.0, b = 0.0;
    for (std::size_t t = first; t < first + count; ++t) {
      a += s.target_test_pct[t];
      b += s.target_unseen_pct[t];
    }
    s.test_pct.push_back(a / static_cast<double>(count));
    s.unseen_pct.push_back(b / static_cast<double>(count));
  }
  return s;
}

void write_validation_report(const ValidationReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "mae_table.csv");
    out << "target,test_mae,unseen_mae,train_range\n";
    for (std::size_t t = 0; t < report.targets.size(); ++t) {
      out << report.targets[t] << ',' << report.test_mae[t] << ',' << report.unseen_mae[t] << ','
          << report.train_range[t] << '\n';
    }
  }
  {
    const PercentageSummary s = percentage_error_summary(report);
    std::ofstream out(dir / "percent_error.csv");
    out << "indicator,test_pct,unseen_pct\n";
    for (std::size_t k = 0; k < s.indicators.size(); ++k) {
      out << s.indicators[k] << ',' << s.test_pct[k] << ',' << s.unseen_pct[k] << '\n';
    }
  }
  {
    std::ofstream out(dir / "unseen_predictions.csv");
    out << "config,target,simulated,predicted\n";
    for (Eigen::Index i = 0; i < report.simulated.rows(); ++i) {
      for (std::size_t t = 0; t < report.targets.size(); ++t) {
        const auto tt = static_cast<Eigen::Index>(t);
        out << i << ',' << report.targets[t] << ',' << report.simulated(i, tt) << ',' << report.predicted(i, tt)
            << '\n';
      }
    }
  }
  if (!report.failed_configs.empty()) {
    std::ofstream out(dir / "failures.txt");
    for (std::size_t k = 0; k < report.failed_configs.size(); ++k) {
      out << report.failed_configs[k] << ": " << report.failure_messages[k] << '\n';
    }
  }
}

}  // namespace roomsound
