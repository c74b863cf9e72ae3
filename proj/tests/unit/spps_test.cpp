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

#include <chrono>
#include <cmath>
#include <random>

#include "support/systems.hpp"

namespace filterlab {
namespace {

using testing::constant;
using testing::golden_ratio;
using testing::scalar;

TEST(DpreSppsTest, ScalarGoldenRatio) {
  const auto one = constant(1.0);
  const auto t0 = std::chrono::steady_clock::now();
  const auto sol = dpre_spps(one, one, one, one);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ASSERT_EQ(sol.period(), 1u);
  EXPECT_NEAR(sol.P[0](0, 0), golden_ratio(), 1e-12);
  EXPECT_LE(sol.residual, 1e-10);
  EXPECT_LT(secs, 1.0);

  const auto brute = testing::brute_riccati(one, one, one, one, scalar(1.0), 200);
  EXPECT_NEAR(brute.back()(0, 0), golden_ratio(), 1e-14);
}

TEST(DpreSppsTest, NoObservationGivesLyapunovFixedPoint) {
  const auto sol = dpre_spps(constant(0.5), constant(0.0), constant(0.75), constant(1.0));
  EXPECT_NEAR(sol.P[0](0, 0), 1.0, 1e-12);
  const auto empty = PeriodicSequence::constant(MatrixXd(0, 1));
  const auto sol0 = dpre_spps(constant(0.5), empty, constant(0.75), PeriodicSequence::constant(MatrixXd(0, 0)));
  EXPECT_NEAR(sol0.P[0](0, 0), 1.0, 1e-12);
}

TEST(DpreSppsTest, AlternatingPairConvergesToBruteForce) {
  const auto m = testing::alternating_plant();
  const auto [C, R] = stacked_sequences(m);
  const auto sol = dpre_spps(m.A(), C, m.Q(), R);
  ASSERT_EQ(sol.period(), 2u);
  const auto brute = testing::brute_riccati(m.A(), C, m.Q(), R, MatrixXd::Identity(2, 2), 10000);
  EXPECT_LT(linalg::spectral_norm(sol.at(0) - brute[10000]), 1e-8);
  EXPECT_LT(linalg::spectral_norm(sol.at(1) - brute[9999]), 1e-8);
  EXPECT_GT(linalg::spectral_norm(sol.at(0) - sol.at(1)), 1e-3);
}

TEST(DpreSppsTest, FixedPointDefectAndPeriodicity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = testing::random_observable_system(seed);
    const SolveOptions opt{1e-10, 0};
    const auto sol = dpre_spps(s.A, s.C, s.Q, s.R, std::nullopt, opt);
    EXPECT_LE(sol.residual, opt.tol);
    EXPECT_LE(dpre_defect(s.A, s.C, s.Q, s.R, sol), 10 * opt.tol * std::max(1.0, linalg::symmetric_norm(sol.at(0))));
    MatrixXd P = sol.at(0);
    for (std::size_t k = 0; k < sol.period(); ++k) {
      EXPECT_LT(linalg::asymmetry(sol.at(k)), 1e-10);
      P = riccati_step(s.A[k], s.C[k], s.Q[k], s.R[k], P);
    }
    EXPECT_LT(linalg::spectral_norm(P - sol.at(0)), 10 * opt.tol * std::max(1.0, linalg::symmetric_norm(P)));
  }
}

TEST(DpreSppsTest, ReportsNonConvergence) {
  // Unstable and unobserved: the iterate grows without bound.
  EXPECT_THROW(dpre_spps(constant(2.0), constant(0.0), constant(1.0), constant(1.0), std::nullopt, {1e-10, 50}),
               NumericalError);
}

TEST(DpreSppsTest, RejectsIndefiniteNoise) {
  EXPECT_THROW(dpre_spps(constant(1.0), constant(1.0), constant(1.0), constant(-5.0)), NumericalError);
  EXPECT_THROW(dpre_spps(constant(1.0), constant(MatrixXd::Ones(1, 2)), constant(1.0), constant(1.0)),
               ValidationError);
}

TEST(DpleSppsTest, ScalarFixedPoint) {
  const auto sol = dple_spps(constant(0.5), constant(0.75));
  EXPECT_NEAR(sol.P[0](0, 0), 1.0, 1e-14);
}

TEST(DpleSppsTest, ZeroDynamicsRemembersOneStep) {
  const PeriodicSequence Q({scalar(1.0), scalar(2.0), scalar(5.0)});
  const auto sol = dple_spps(constant(0.0), Q);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(sol.at(k)(0, 0), Q[k + 2](0, 0), 1e-15);
}

TEST(DpleSppsTest, TwoPeriodicScalarMatchesIteration) {
  const PeriodicSequence A({scalar(0.5), scalar(0.2)});
  const PeriodicSequence Q({scalar(1.0), scalar(2.0)});
  const auto sol = dple_spps(A, Q);
  const auto brute = testing::brute_lyapunov(A, Q, scalar(0.0), 400);
  EXPECT_LT(std::abs(brute[400](0, 0) - brute[398](0, 0)), 1e-14);
  EXPECT_NEAR(sol.at(0)(0, 0), brute[400](0, 0), 1e-13);
  EXPECT_NEAR(sol.at(1)(0, 0), brute[399](0, 0), 1e-13);
}

TEST(DpleSppsTest, RandomStableSystemsSatisfyEquation) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<MatrixXd> A, Q;
    for (int k = 0; k < 3; ++k) {
      A.push_back(testing::random_matrix(rng, 3, 3, 0.4));
      Q.push_back(testing::random_spd(rng, 3));
    }
    const PeriodicSequence a(A), q(Q);
    if (linalg::spectral_radius(period_product(a, 0)) > 0.95) continue;
    const auto sol = dple_spps(a, q);
    EXPECT_LT(dple_defect(a, q, sol), 1e-9);
  }
}

TEST(DpleSppsTest, UnstableMonodromyThrows) {
  EXPECT_THROW(dple_spps(constant(1.0), constant(1.0)), NumericalError);
  EXPECT_THROW(dple_spps(PeriodicSequence({scalar(4.0), scalar(0.3)}), constant(1.0)), NumericalError);
}

TEST(ClosedLoopTest, ZeroCovarianceGivesOpenLoop) {
  MatrixXd A(2, 2);
  A << 1, 2, 3, 4;
  const auto cl = closed_loop(A, MatrixXd::Ones(1, 2), scalar(1.0), MatrixXd::Zero(2, 2));
  EXPECT_TRUE(cl.K.isZero(0.0));
  EXPECT_EQ(cl.Atilde, A);
}

TEST(ClosedLoopTest, GoldenRatioGain) {
  const double phi = golden_ratio();
  const auto cl = closed_loop(scalar(1.0), scalar(1.0), scalar(1.0), scalar(phi));
  EXPECT_NEAR(cl.K(0, 0), phi / (phi + 1.0), 1e-15);
  EXPECT_NEAR(cl.Atilde(0, 0), 1.0 - phi / (phi + 1.0), 1e-15);
  EXPECT_NEAR(cl.K(0, 0), 0.61803398874989, 1e-12);
  EXPECT_NEAR(cl.Atilde(0, 0), 0.38196601125011, 1e-12);
}

TEST(ClosedLoopTest, NaiveSensorHasNoGain) {
  MatrixXd A(2, 2);
  A << 0.5, 1, 0, 0.7;
  const auto cl = closed_loop(A, MatrixXd::Zero(1, 2), scalar(1.0), MatrixXd::Identity(2, 2));
  EXPECT_TRUE(cl.K.isZero(0.0));
  EXPECT_EQ(cl.Atilde, A);
}

TEST(MonodromyTest, AlternatingPairWithInjection) {
  // A + L C at both phases of the alternating pair.
  const auto m = testing::alternating_plant();
  std::vector<MatrixXd> loop;
  for (std::size_t k = 0; k < 2; ++k) {
    const MatrixXd& C = m.sensor(0).C[k];
    VectorXd L = VectorXd::Zero(2);
    L(C(0, 0) == 1.0 ? 0 : 1) = -1.9;
    loop.push_back(m.A()[k] + L * C);
  }
  for (std::size_t k = 0; k < 2; ++k) {
    const auto rep = monodromy(PeriodicSequence(loop), k);
    EXPECT_LT((rep.phi - 0.2 * MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(rep.spectral_radius, 0.2, 1e-12);
  }
}

TEST(MonodromyTest, ConstantScalar) {
  const auto rep = monodromy(PeriodicSequence({scalar(0.5), scalar(0.5)}), 0);
  EXPECT_DOUBLE_EQ(rep.phi(0, 0), 0.25);
}

TEST(MonodromyTest, SpectrumDoesNotDependOnAnchor) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<MatrixXd> A;
    for (int k = 0; k < 3; ++k) A.push_back(testing::random_matrix(rng, 3, 3, 0.5));
    const PeriodicSequence seq(A);
    const double rho0 = monodromy(seq, 0).spectral_radius;
    for (std::size_t k = 1; k < 6; ++k) EXPECT_NEAR(monodromy(seq, k).spectral_radius, rho0, 1e-10);
  }
}

TEST(MonodromyBoundsTest, GoldenRatioBounds) {
  const auto one = constant(1.0);
  const auto sol = dpre_spps(one, one, one, one);
  const auto b = lemma7_bounds(sol, one);
  EXPECT_NEAR(b.rho_bound, std::sqrt(1.0 - 1.0 / golden_ratio()), 1e-12);
  EXPECT_NEAR(b.rho_bound, 0.61803398874989, 1e-12);
  const auto reps = lemma7_check(one, one, one, one, sol);
  ASSERT_EQ(reps.size(), 1u);
  EXPECT_NEAR(reps[0].spectral_radius, 0.38196601125011, 1e-12);
  EXPECT_TRUE(reps[0].within_bounds());
}

TEST(MonodromyBoundsTest, DeadBeatCase) {
  const auto sol = dpre_spps(constant(0.0), constant(1.0), constant(2.0), constant(1.0));
  EXPECT_NEAR(sol.P[0](0, 0), 2.0, 1e-14);
  const auto b = lemma7_bounds(sol, constant(2.0));
  EXPECT_NEAR(b.rho_bound, 0.0, 1e-7);
  const auto reps = lemma7_check(constant(0.0), constant(1.0), constant(2.0), constant(1.0), sol);
  EXPECT_EQ(reps[0].spectral_radius, 0.0);
  EXPECT_TRUE(reps[0].within_bounds());
}

TEST(MonodromyBoundsTest, RandomObservableSystems) {
  for (std::uint64_t seed = 100; seed < 200; ++seed) {
    const auto s = testing::random_observable_system(seed);
    const auto sol = dpre_spps(s.A, s.C, s.Q, s.R);
    for (const auto& rep : lemma7_check(s.A, s.C, s.Q, s.R, sol)) {
      EXPECT_LE(rep.spectral_radius, rep.rho_bound + 1e-9) << "seed " << seed;
      EXPECT_LE(rep.norm2, rep.norm_bound + 1e-9) << "seed " << seed;
    }
  }
}

TEST(MonodromyBoundsTest, RejectsSingularQ) {
  const auto one = constant(1.0);
  const auto sol = dpre_spps(one, one, one, one);
  EXPECT_THROW(lemma7_bounds(sol, constant(0.0)), ValidationError);
}

TEST(PowerNormBoundTest, Identity) {
  const MatrixXd I = MatrixXd::Identity(2, 2);
  EXPECT_GE(power_norm_bound(I, 5), 1.0);
  EXPECT_NEAR(linalg::spectral_norm(I), 1.0, 1e-15);
}

TEST(PowerNormBoundTest, Diagonal) {
  MatrixXd A = MatrixXd::Zero(2, 2);
  A.diagonal() << 0.5, 0.3;
  const MatrixXd A4 = A * A * A * A;
  EXPECT_NEAR(linalg::spectral_norm(A4), 0.0625, 1e-15);
  EXPECT_LE(linalg::spectral_norm(A4), power_norm_bound(A, 4));
}

TEST(PowerNormBoundTest, Nilpotent) {
  MatrixXd J(2, 2);
  J << 0, 1, 0, 0;
  EXPECT_TRUE((J * J).isZero(0.0));
  EXPECT_GE(power_norm_bound(J, 2), 0.0);
  EXPECT_GE(power_norm_bound(J, 1), 1.0);
}

TEST(PowerNormBoundTest, DominatesRandomPowers) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> dim(1, 5);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = dim(rng);
    const MatrixXd B = testing::random_matrix(rng, n, n, 0.6);
    MatrixXd power = MatrixXd::Identity(n, n);
    for (std::size_t k = 0; k <= 50; ++k) {
      const double actual = linalg::spectral_norm(power);
      EXPECT_LE(actual, power_norm_bound(B, k) * (1 + 1e-10) + 1e-12) << "trial " << trial << " k " << k;
      power = B * power;
    }
  }
}

TEST(ObservabilityTest, AlternatingPairIsUniformlyObservable) {
  const auto m = testing::alternating_plant();
  const auto [C, R] = stacked_sequences(m);
  EXPECT_TRUE(uniform_observability(m.A(), C));
  for (std::size_t k = 0; k < 2; ++k) {
    const auto gram = observability_gramian(constant(m.A()[k]), constant(C[k]), 0);
    EXPECT_EQ(numerical_rank(gram), 1);
  }
}

TEST(ObservabilityTest, NothingObservedIsUnobservable) {
  EXPECT_FALSE(uniform_observability(constant(2.0 * MatrixXd::Identity(2, 2)), constant(MatrixXd::Zero(1, 2))));
}

TEST(ObservabilityTest, BenchmarkStackedPair) {
  const auto m = paper_plant();
  EXPECT_TRUE(uniform_observability(m.A(), stacked_sequences(m).first));
  // One of the two state blocks alone is not enough.
  EXPECT_FALSE(uniform_observability(m.A(), m.sensor(0).C));
}

TEST(MonotonicityProbeTest, EqualNoise) {
  const auto one = constant(1.0);
  EXPECT_TRUE(dpre_monotonicity_probe(one, one, one, one, one));
}

TEST(MonotonicityProbeTest, ScalarRoots) {
  const auto one = constant(1.0);
  const auto p2 = dpre_spps(one, one, one, constant(2.0));
  EXPECT_NEAR(p2.P[0](0, 0), 2.0, 1e-12);
  EXPECT_TRUE(dpre_monotonicity_probe(one, one, one, constant(2.0), one));
}

TEST(MonotonicityProbeTest, RandomIncrements) {
  std::mt19937_64 rng(31);
  for (std::uint64_t seed = 300; seed < 400; ++seed) {
    const auto s = testing::random_observable_system(seed);
    std::vector<MatrixXd> bigger;
    for (std::size_t k = 0; k < s.R.period(); ++k) {
      const MatrixXd B = testing::random_matrix(rng, s.R.rows(), s.R.rows(), 0.5);
      bigger.push_back(s.R[k] + B * B.transpose());
    }
    EXPECT_TRUE(dpre_monotonicity_probe(s.A, s.C, s.Q, PeriodicSequence(bigger), s.R)) << "seed " << seed;
  }
}

TEST(MonotonicityProbeTest, RejectsReversedOrder) {
  const auto one = constant(1.0);
  EXPECT_THROW(dpre_monotonicity_probe(one, one, one, one, constant(2.0)), ValidationError);
}

TEST(InformationFormTest, MatchesCovarianceForm) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = dim(rng), p = dim(rng);
    const MatrixXd P = testing::random_spd(rng, n);
    const MatrixXd R = testing::random_spd(rng, p);
    const MatrixXd C = testing::random_matrix(rng, p, n);
    const MatrixXd info = (P.inverse() + C.transpose() * R.inverse() * C).inverse();
    const MatrixXd cov = P - P * C.transpose() * (C * P * C.transpose() + R).inverse() * C * P;
    EXPECT_LE(linalg::spectral_norm(info - cov), 1e-10 * linalg::spectral_norm(cov));
  }
}

}  // namespace
}  // namespace filterlab
