// Copyright 2026 The filterlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "support/systems.hpp"

namespace filterlab {
namespace {

using testing::constant;
using testing::scalar;

TEST(NormalizePeriodTest, CombinesBenchmarkPeriods) {
  std::vector<PeriodicSequence> seqs;
  for (std::size_t T : {6, 10, 2}) {
    std::vector<MatrixXd> items;
    for (std::size_t k = 0; k < T; ++k) items.push_back(scalar(static_cast<double>(k)));
    seqs.emplace_back(items);
  }
  const auto out = normalize_period(seqs);
  for (const auto& s : out) EXPECT_EQ(s.period(), 30u);
  for (std::size_t j = 0; j < seqs.size(); ++j)
    for (std::size_t k = 0; k < 90; ++k) EXPECT_EQ(out[j][k](0, 0), seqs[j][k](0, 0));
}

TEST(NormalizePeriodTest, SinglePeriodOneIsUnchanged) {
  const auto out = normalize_period({constant(2.5)});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].period(), 1u);
  EXPECT_EQ(out[0][0](0, 0), 2.5);
}

TEST(NormalizePeriodTest, PeriodsTwoAndThreeMatchModularIndexing) {
  const PeriodicSequence a({scalar(1.0), scalar(1.0)});
  const PeriodicSequence b({scalar(4.0), scalar(4.0), scalar(4.0)});
  const PeriodicSequence c({scalar(7.0), scalar(8.0)});
  const auto out = normalize_period({a, b, c});
  for (const auto& s : out) EXPECT_EQ(s.period(), 6u);
  const std::vector<PeriodicSequence> in{a, b, c};
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t k = 0; k < 6; ++k) {
      EXPECT_EQ(out[j].items()[k](0, 0), in[j].items()[k % in[j].period()](0, 0));
    }
  }
}

TEST(PeriodicSequenceTest, AccessIsPeriodic) {
  const PeriodicSequence s({scalar(1.0), scalar(2.0), scalar(3.0)});
  for (std::size_t k = 0; k < 50; ++k) EXPECT_EQ(s[k + 3](0, 0), s[k](0, 0));
  EXPECT_EQ(s[7](0, 0), 2.0);
}

TEST(PeriodicSequenceTest, RejectsMismatchedOrEmptyItems) {
  EXPECT_THROW(PeriodicSequence({MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 3)}), ValidationError);
  EXPECT_THROW(PeriodicSequence(std::vector<MatrixXd>{}), ValidationError);
  EXPECT_THROW(normalize_period({constant(1.0)}).front().expanded(0), ValidationError);
}

TEST(PlantModelTest, ValidatesCovariances) {
  const auto A = constant(1.0);
  EXPECT_THROW(PlantModel(A, constant(-1.0), {{constant(1.0), constant(1.0)}}), ValidationError);
  EXPECT_THROW(PlantModel(A, constant(1.0), {{constant(1.0), constant(0.0)}}), ValidationError);
  EXPECT_THROW(PlantModel(A, constant(1.0), {}), ValidationError);
  MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.0, 1.0;
  EXPECT_THROW(PlantModel(constant(MatrixXd::Identity(2, 2)), constant(asym),
                          {{constant(MatrixXd::Ones(1, 2)), constant(1.0)}}),
               ValidationError);
}

TEST(PlantModelTest, ValidatesDimensions) {
  const auto I2 = constant(MatrixXd::Identity(2, 2));
  EXPECT_THROW(PlantModel(I2, I2, {{constant(MatrixXd::Ones(1, 3)), constant(1.0)}}), ValidationError);
  EXPECT_THROW(PlantModel(I2, constant(1.0), {{constant(MatrixXd::Ones(1, 2)), constant(1.0)}}),
               ValidationError);
  EXPECT_THROW(PlantModel(I2, I2, {{constant(MatrixXd::Ones(2, 2)), constant(1.0)}}), ValidationError);
}

TEST(PlantModelTest, NormalizesPeriodsAndCountsRows) {
  const PeriodicSequence A({scalar(0.5), scalar(0.6)});
  const PeriodicSequence C({MatrixXd::Ones(2, 1), MatrixXd::Ones(2, 1), MatrixXd::Ones(2, 1)});
  PlantModel m(A, constant(1.0), {{constant(1.0), constant(1.0)}, {C, constant(MatrixXd::Identity(2, 2))}});
  EXPECT_EQ(m.period(), 6u);
  EXPECT_EQ(m.m(), 3);
  EXPECT_EQ(m.N(), 2u);
  EXPECT_EQ(m.A().period(), 6u);
  EXPECT_EQ(m.sensor(0).C.period(), 6u);
}

TEST(StackedObservationTest, BenchmarkOddStepRows) {
  const auto m = paper_plant();
  for (std::size_t k : {1, 3, 29}) {
    const auto s = stacked_observation(m, k);
    Eigen::RowVectorXd expected(4);
    expected << 1, 0, 0, 0;
    for (Eigen::Index r = 0; r < 3; ++r) EXPECT_EQ(s.C.row(r), expected);
  }
}

TEST(StackedObservationTest, SingleSensorIsItself) {
  MatrixXd C(1, 2);
  C << 1.0, 2.0;
  PlantModel m(constant(MatrixXd::Identity(2, 2)), constant(MatrixXd::Identity(2, 2)),
               {{constant(C), constant(3.0)}});
  const auto s = stacked_observation(m, 5);
  EXPECT_EQ(s.C, C);
  EXPECT_EQ(s.R, scalar(3.0));
}

TEST(StackedObservationTest, BlockDiagonalNoise) {
  MatrixXd C2(2, 2), R2(2, 2);
  C2 << 1, 0, 0, 1;
  R2 << 2.0, 0.3, 0.3, 1.0;
  MatrixXd C1(1, 2);
  C1 << 1.0, 1.0;
  PlantModel m(constant(MatrixXd::Identity(2, 2)), constant(MatrixXd::Identity(2, 2)),
               {{constant(C1), constant(0.7)}, {constant(C2), constant(R2)}});
  const auto s = stacked_observation(m, 0);
  MatrixXd C(3, 2), R = MatrixXd::Zero(3, 3);
  C << C1, C2;
  R(0, 0) = 0.7;
  R.block(1, 1, 2, 2) = R2;
  EXPECT_EQ(m.m(), 3);
  EXPECT_EQ(s.C, C);
  EXPECT_EQ(s.R, R);
}

TEST(SimulateTrajectoryTest, NoiselessIdentityHoldsState) {
  PlantModel m(constant(MatrixXd::Identity(2, 2)), constant(MatrixXd::Identity(2, 2)),
               {{constant(MatrixXd::Ones(1, 2)), constant(1.0)}});
  const auto t = simulate_trajectory(m, 20, 3, VectorXd::Ones(2), 0.0);
  ASSERT_EQ(t.states.size(), 21u);
  for (const auto& x : t.states) EXPECT_EQ(x, VectorXd::Ones(2));
  for (const auto& y : t.measurements) EXPECT_EQ(y[0](0), 2.0);
}

TEST(SimulateTrajectoryTest, NoiselessGeometricDecay) {
  PlantModel m(constant(0.5), constant(1.0), {{constant(1.0), constant(1.0)}});
  const auto t = simulate_trajectory(m, 3, 1, VectorXd::Ones(1), 0.0);
  const std::vector<double> expected{1.0, 0.5, 0.25, 0.125};
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(t.states[k](0), expected[k]);
}

TEST(SimulateTrajectoryTest, SameSeedIsBitIdentical) {
  const auto m = paper_plant();
  const auto a = simulate_trajectory(m, 60, 42, VectorXd::Zero(4));
  const auto b = simulate_trajectory(m, 60, 42, VectorXd::Zero(4));
  const auto c = simulate_trajectory(m, 60, 43, VectorXd::Zero(4));
  for (std::size_t k = 0; k <= 60; ++k) {
    EXPECT_EQ(a.states[k], b.states[k]);
    EXPECT_EQ(a.stacked_measurement(k), b.stacked_measurement(k));
  }
  EXPECT_NE(a.states[30], c.states[30]);
}

TEST(SimulateTrajectoryTest, ProcessNoiseCovarianceMatchesQ) {
  const auto m = paper_plant();
  const std::size_t trials = 10000, K = 100, k = 57;
  MatrixXd S = MatrixXd::Zero(4, 4);
  for (std::size_t l = 0; l < trials; ++l) {
    const auto t = simulate_trajectory(m, K, 1000 + l, VectorXd::Zero(4));
    const VectorXd w = t.states[k + 1] - m.A()[k] * t.states[k];
    S += w * w.transpose();
  }
  S /= static_cast<double>(trials);
  const MatrixXd& Q = m.Q()[k];
  EXPECT_LT(linalg::spectral_norm(S - Q), 0.05 * linalg::spectral_norm(Q));
}

TEST(SimulateTrajectoryTest, ProcessAndMeasurementNoiseUncorrelated) {
  const auto m = paper_plant();
  const std::size_t samples = 10000, k = 41;
  const std::vector<std::size_t> sensors{0, 4, 10};
  // Running sums for correlation of each process-noise component with v_i.
  std::vector<std::array<double, 5>> acc(4 * sensors.size(), std::array<double, 5>{});
  for (std::size_t l = 0; l < samples; ++l) {
    const auto t = simulate_trajectory(m, k + 1, 77 + l, VectorXd::Zero(4));
    const VectorXd w = t.states[k + 1] - m.A()[k] * t.states[k];
    for (std::size_t s = 0; s < sensors.size(); ++s) {
      const std::size_t i = sensors[s];
      const double v = (t.measurements[k][i] - m.sensor(i).C[k] * t.states[k])(0);
      for (Eigen::Index c = 0; c < 4; ++c) {
        auto& a = acc[s * 4 + c];
        a[0] += w(c);
        a[1] += v;
        a[2] += w(c) * v;
        a[3] += w(c) * w(c);
        a[4] += v * v;
      }
    }
  }
  const double n = static_cast<double>(samples);
  for (const auto& a : acc) {
    const double cov = a[2] / n - (a[0] / n) * (a[1] / n);
    const double sw = std::sqrt(a[3] / n - (a[0] / n) * (a[0] / n));
    const double sv = std::sqrt(a[4] / n - (a[1] / n) * (a[1] / n));
    EXPECT_LT(std::abs(cov / (sw * sv)), 3.0 / std::sqrt(n));
  }
}

TEST(SimulateTrajectoryTest, RejectsBadArguments) {
  PlantModel m(constant(0.5), constant(1.0), {{constant(1.0), constant(1.0)}});
  EXPECT_THROW(simulate_trajectory(m, 0, 1, VectorXd::Zero(1)), ValidationError);
  EXPECT_THROW(simulate_trajectory(m, 5, 1, VectorXd::Zero(1), -1.0), ValidationError);
  EXPECT_THROW(simulate_trajectory(m, 5, 1, VectorXd::Zero(2)), ValidationError);
}

TEST(SimulateTrajectoryTest, NonfiniteStateIsReported) {
  PlantModel m(constant(1e200), constant(1.0), {{constant(1.0), constant(1.0)}});
  EXPECT_THROW(simulate_trajectory(m, 10, 1, VectorXd::Ones(1)), NumericalError);
}

TEST(BenchmarkPlantTest, Structure) {
  const auto m = paper_plant();
  EXPECT_EQ(m.period(), 30u);
  EXPECT_EQ(m.N(), 20u);
  EXPECT_EQ(m.n(), 4);
  std::size_t naive = 0;
  for (std::size_t i = 0; i < m.N(); ++i) {
    bool zero = true;
    for (std::size_t k = 0; k < m.period(); ++k) zero = zero && m.sensor(i).C[k].isZero(0.0);
    naive += zero ? 1 : 0;
    EXPECT_EQ(m.sensor(i).R[0], scalar(1.0));
  }
  EXPECT_EQ(naive, 14u);
}

TEST(BenchmarkPlantTest, ProcessNoiseBlock) {
  const auto m = paper_plant();
  MatrixXd G(2, 2);
  G << 1.0 / 3.0, 0.5, 0.5, 1.0;
  const MatrixXd& Q = m.Q()[0];
  EXPECT_LT((Q.topLeftCorner(2, 2) - G).norm(), 1e-15);
  EXPECT_LT((Q.bottomRightCorner(2, 2) - G).norm(), 1e-15);
  EXPECT_LT((Q.topRightCorner(2, 2) - 0.5 * G).norm(), 1e-15);
}

TEST(BenchmarkPlantTest, EvenStepsSeeNothing) {
  const auto m = paper_plant();
  for (std::size_t k = 0; k < 30; k += 2) EXPECT_TRUE(stacked_observation(m, k).C.isZero(0.0));
  Eigen::RowVectorXd x3(4);
  x3 << 0, 0, 1, 0;
  for (Eigen::Index r = 3; r < 6; ++r) EXPECT_EQ(stacked_observation(m, 1).C.row(r), x3);
}

}  // namespace
}  // namespace filterlab
