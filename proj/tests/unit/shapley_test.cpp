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

#include <sstream>

#include "roomsound/shapley.hpp"
#include "test_support.hpp"

namespace roomsound {
namespace {

using testing::classroom;

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& x, const std::function<double(const Eigen::RowVectorXd&)>& f) {
  Eigen::MatrixXd out(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i, 0) = f(x.row(i));
  return out;
}

std::vector<RoomConfig> background() {
  const auto all = enumerate_grid(reduced_grid_spec(), testing::db());
  std::vector<RoomConfig> out;
  for (std::size_t i = 0; i < all.size(); i += 5) out.push_back(all[i]);
  // Reduced grid has no shading; add a few shaded rooms.
  for (std::size_t i = 0; i < 6; ++i) {
    RoomConfig c = all[i * 17];
    c.shading = i % 2 ? Shading::kCurtain : Shading::kRollerBlind;
    c.shading_material = testing::db().at(to_string(c.shading));
    out.push_back(c);
  }
  return out;
}

TEST(Exact, EfficiencyOnRandomGame) {
  Rng rng(12);
  std::vector<double> table(1u << 6);
  for (double& v : table) v = rng.uniform();
  const auto phi = shapley_exact(6, [&](const std::vector<std::uint32_t>& masks) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(masks.size()), 1);
    for (std::size_t i = 0; i < masks.size(); ++i) out(static_cast<Eigen::Index>(i), 0) = table[masks[i]];
    return out;
  });
  EXPECT_NEAR(phi.sum(), table[63] - table[0], 1e-12);
}

TEST(Exact, LinearModelClosedForm) {
  const Eigen::RowVectorXd w = (Eigen::RowVectorXd(4) << 0.5, -2.0, 3.0, 0.0).finished();
  const BatchFunction f = [&](const Eigen::MatrixXd& x) { return rows_of(x, [&](auto r) { return w.dot(r) + 1.5; }); };
  const Eigen::RowVectorXd inst = (Eigen::RowVectorXd(4) << 1, 2, 3, 4).finished();
  const Eigen::RowVectorXd base = (Eigen::RowVectorXd(4) << 0.2, 0.1, -1, 9).finished();
  const auto phi = shapley_features(f, inst, base);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(phi(i, 0), w(i) * (inst(i) - base(i)), 1e-12);
}

TEST(Exact, SymmetryAndNullPlayer) {
  const BatchFunction f = [](const Eigen::MatrixXd& x) { return rows_of(x, [](auto r) { return r(0) * r(1); }); };
  const auto phi = shapley_features(f, Eigen::RowVector3d(1, 1, 5), Eigen::RowVector3d(0, 0, 0));
  EXPECT_NEAR(phi(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(phi(1, 0), 0.5, 1e-12);
  EXPECT_NEAR(phi(2, 0), 0.0, 1e-12);
}

TEST(Exact, RejectsTooManyPlayers) {
  EXPECT_THROW(shapley_exact(17, [](const std::vector<std::uint32_t>&) { return Eigen::MatrixXd(); }),
               std::invalid_argument);
}

TEST(DesignSpace, EfficiencyForNonlinearModel) {
  const BatchFunction f = [](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out(x.rows(), 2);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out(i, 0) = std::tanh(0.01 * x(i, 3) * x(i, 6) + x(i, 9) - x(i, 4) * x(i, 8));
      out(i, 1) = x(i, 0) * x(i, 5) + std::sqrt(x(i, 7) + x(i, 9));
    }
    return out;
  };
  const DesignSpaceExplainer explainer(f, 3, background());
  for (const RoomConfig& c : {classroom(), background()[3]}) {
    const Attribution a = explainer.explain(c);
    ASSERT_EQ(a.phi.rows(), 8);
    for (Eigen::Index t = 0; t < 2; ++t) {
      const double gap = a.value(t) - a.base(t);
      EXPECT_NEAR(a.phi.col(t).sum(), gap, 1e-9 * std::max(1.0, std::abs(gap)));
    }
  }
}

TEST(DesignSpace, SingleFeatureModelsCreditTheirVariable) {
  struct Case {
    Eigen::Index feature;
    DesignVariable variable;
  };
  for (const Case k : {Case{0, DesignVariable::kRoomDimensions}, Case{3, DesignVariable::kRoomDimensions},
                       Case{4, DesignVariable::kWwr}, Case{5, DesignVariable::kFurniture},
                       Case{6, DesignVariable::kWallAlpha}, Case{7, DesignVariable::kFloorAlpha},
                       Case{8, DesignVariable::kCeilingAlpha}}) {
    const BatchFunction f = [&](const Eigen::MatrixXd& x) { return Eigen::MatrixXd(x.col(k.feature)); };
    const DesignSpaceExplainer explainer(f, 2, background());
    const Attribution a = explainer.explain(classroom());
    for (std::size_t v = 0; v < kDesignVariableCount; ++v) {
      const double expected = static_cast<DesignVariable>(v) == k.variable ? a.value(0) - a.base(0) : 0.0;
      EXPECT_NEAR(a.phi(static_cast<Eigen::Index>(v), 0), expected, 1e-12) << k.feature << " " << v;
    }
  }
}

TEST(DesignSpace, WindowFeatureSplitsBetweenWindowAndShading) {
  const BatchFunction f = [](const Eigen::MatrixXd& x) { return Eigen::MatrixXd(x.col(9)); };
  const DesignSpaceExplainer explainer(f, 2, background());
  const Attribution a = explainer.explain(classroom());  // curtain over double glazing
  const auto idx = [](DesignVariable v) { return static_cast<Eigen::Index>(v); };
  EXPECT_NE(a.phi(idx(DesignVariable::kShading), 0), 0.0);
  EXPECT_NEAR(a.phi(idx(DesignVariable::kShading), 0) + a.phi(idx(DesignVariable::kWindowAlpha), 0),
              a.value(0) - a.base(0), 1e-12);
  EXPECT_EQ(a.phi(idx(DesignVariable::kWallAlpha), 0), 0.0);
}

TEST(Report, SingleInstanceIsAbsolutePhi) {
  const BatchFunction f = [](const Eigen::MatrixXd& x) {
    return Eigen::MatrixXd((x.col(6) * 3 - x.col(3) * 0.001 + x.col(8)).eval());
  };
  const DesignSpaceExplainer explainer(f, 1, background());
  const Attribution a = explainer.explain(classroom());
  ShapAccumulator acc;
  acc.add({"t30_250"}, a);
  const ShapReport r = acc.report();
  EXPECT_EQ(r.instances, 1u);
  for (Eigen::Index v = 0; v < 8; ++v) EXPECT_DOUBLE_EQ(r.mean_abs(v, 0), std::abs(a.phi(v, 0)));
  const auto rank = r.ranking();
  const Eigen::VectorXd o = r.overall();
  for (std::size_t i = 1; i < rank.size(); ++i) {
    EXPECT_GE(o(static_cast<Eigen::Index>(rank[i - 1])), o(static_cast<Eigen::Index>(rank[i])));
  }
  std::ostringstream csv;
  write_ranking(csv, r);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "rank,variable,mean_abs_shap");
  std::ostringstream long_csv;
  write_long(long_csv, r);
  EXPECT_NE(long_csv.str().find("wall_alpha,t30_250,"), std::string::npos);
}

TEST(Report, EmptyAccumulatorThrows) { EXPECT_THROW(ShapAccumulator{}.report(), std::logic_error); }

}  // namespace
}  // namespace roomsound
