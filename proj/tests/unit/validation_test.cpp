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


#include <gtest/gtest.h>

#include "roomsound/surrogate.hpp"
#include "roomsound/validation.hpp"
#include "test_support.hpp"

namespace roomsound {
namespace {

using testing::synthetic_dataset;

class Surrogates : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dataset_ = new Dataset(synthetic_dataset());
    models_ = new SurrogateSet(testing::small_surrogates(*dataset_));
  }
  static void TearDownTestSuite() {
    delete models_;
    delete dataset_;
  }
  static Dataset* dataset_;
  static SurrogateSet* models_;
};

Dataset* Surrogates::dataset_ = nullptr;
SurrogateSet* Surrogates::models_ = nullptr;

TEST_F(Surrogates, PredictionMatchesIndividualModels) {
  const RoomConfig c = testing::classroom();
  const SurrogatePrediction p = models_->predict(c);
  ASSERT_EQ(p.values.size(), 25u);
  for (const auto& id : model_ids()) {
    const MlpModel& m = models_->models().at(id);
    const auto x = encode_features(c, model_band(id));
    const Eigen::MatrixXd row = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::MatrixXd y = predict(m, row);
    const auto targets = model_target_indices(id);
    for (std::size_t k = 0; k < targets.size(); ++k) EXPECT_DOUBLE_EQ(p.values[targets[k]], y(0, static_cast<Eigen::Index>(k)));
  }
  const Eigen::MatrixXd all = models_->predict_all({c, c});
  for (std::size_t t = 0; t < 25; ++t) {
    EXPECT_NEAR(all(1, static_cast<Eigen::Index>(t)), p.values[t], 1e-12 * std::abs(p.values[t]));
  }
}

TEST_F(Surrogates, ExtrapolationFlagFollowsUnitOutput) {
  RoomConfig c = testing::classroom();
  c.length = 40;
  c.width = 50;
  c.height = 12;
  c.wall = testing::uniform_material(0.01);
  const SurrogatePrediction p = models_->predict(c);
  bool any = false;
  for (std::size_t t = 0; t < 25; ++t) {
    EXPECT_EQ(p.extrapolated[t], p.unit[t] < kExtrapolationLow || p.unit[t] > kExtrapolationHigh);
    any |= p.extrapolated[t];
  }
  EXPECT_TRUE(any);
}

TEST_F(Surrogates, SaveAndLoadDirectory) {
  testing::TempDir dir("surrogates");
  for (const auto& [id, m] : models_->models()) save_model(m, model_path(dir.path, id));
  const SurrogateSet loaded = SurrogateSet::load_dir(dir.path);
  EXPECT_EQ(loaded.version(), models_->version());
  EXPECT_EQ(loaded.predict(testing::classroom()).values, models_->predict(testing::classroom()).values);
  std::filesystem::remove(model_path(dir.path, "sti"));
  try {
    SurrogateSet::load_dir(dir.path);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("model_sti.json"), std::string::npos);
  }
}

TEST_F(Surrogates, IncompleteSetRejected) {
  auto models = models_->models();
  models.erase("500");
  EXPECT_THROW(SurrogateSet{models}, std::invalid_argument);
}

TEST_F(Surrogates, VersionTracksWeights) {
  auto models = models_->models();
  models.at("250").weights[0](0, 0) += 1e-3;
  EXPECT_NE(SurrogateSet(models).version(), models_->version());
}

TEST_F(Surrogates, PerfectSurrogateHasZeroUnseenError) {
  const auto configs = enumerate_validation_grid(testing::db());
  const Eigen::MatrixXd predicted = models_->predict_all(configs);
  const ValidationReport r = compare(predicted, predicted, *models_);
  ASSERT_EQ(r.unseen_mae.size(), 25u);
  for (double e : r.unseen_mae) EXPECT_EQ(e, 0.0);
  for (double range : r.train_range) EXPECT_GT(range, 0.0);
}

TEST_F(Surrogates, StoredTestErrorMatchesRecomputation) {
  const auto recomputed = test_split_mae(*models_, *dataset_);
  const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(2, 25);
  const ValidationReport r = compare(zeros, zeros, *models_);
  for (std::size_t t = 0; t < 25; ++t) EXPECT_NEAR(r.test_mae[t], recomputed[t], 1e-12) << t;
}

TEST_F(Surrogates, RunValidationSimulatesEachConfig) {
  testing::TempDir dir("validation");
  auto configs = enumerate_validation_grid(testing::db());
  configs.resize(2);
  SimulationParams p;
  p.ray_count = 300;
  const ValidationReport r = run_validation(*models_, configs, "validation", p, 1);
  EXPECT_EQ(r.simulated.rows(), 2);
  EXPECT_EQ(r.simulated.cols(), 25);
  EXPECT_TRUE(r.failed_configs.empty());
  EXPECT_TRUE(r.predicted.isApprox(models_->predict_all(configs)));
  write_validation_report(r, dir.path);
  for (const char* f : {"mae_table.csv", "percent_error.csv", "unseen_predictions.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.path / f)) << f;
  }
}

TEST(ColumnMae, SkipsNonFiniteTruth) {
  Eigen::MatrixXd pred(3, 2), truth(3, 2);
  pred << 1, 2, 3, 4, 5, 6;
  truth << 2, 2, std::nan(""), 5, 5, 8;
  const auto mae = column_mae(pred, truth);
  EXPECT_DOUBLE_EQ(mae[0], 0.5);
  EXPECT_DOUBLE_EQ(mae[1], 1.0);
}

TEST(Percentages, RangeRelativeError) {
  ValidationReport r;
  r.targets = AcousticIndices::names();
  r.test_mae.assign(25, 0.007);
  r.unseen_mae.assign(25, 0.035);
  r.train_range.assign(25, 0.35);
  const PercentageSummary s = percentage_error_summary(r);
  ASSERT_EQ(s.indicators, (std::vector<std::string>{"T30", "EDT", "C80", "D50", "STI"}));
  for (double v : s.test_pct) EXPECT_NEAR(v, 2.0, 1e-12);
  for (double v : s.unseen_pct) EXPECT_NEAR(v, 10.0, 1e-12);
  r.train_range[3] = 0.0;
  EXPECT_THROW(percentage_error_summary(r), std::invalid_argument);
}

TEST(Percentages, AveragesBandsPerIndicator) {
  ValidationReport r;
  r.targets = AcousticIndices::names();
  r.train_range.assign(25, 1.0);
  r.unseen_mae.assign(25, 0.0);
  r.test_mae.assign(25, 0.0);
  for (std::size_t b = 0; b < 6; ++b) r.test_mae[12 + b] = 0.01 * static_cast<double>(b + 1);  // C80
  const PercentageSummary s = percentage_error_summary(r);
  EXPECT_NEAR(s.test_pct[2], 3.5, 1e-12);
  EXPECT_EQ(s.test_pct[0], 0.0);
}

}  // namespace
}  // namespace roomsound
