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

// Periodic system data: matrix sequences indexed by unbounded time, the
// plant model x_{k+1} = A_k x_k + w_k, y_{i,k} = C_{i,k} x_k + v_{i,k}, and a
// ground-truth simulator.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "filterlab/errors.hpp"
#include "filterlab/linalg.hpp"

namespace filterlab {

/// A sequence of equally shaped matrices repeating with a fixed period.
/// `at(k)` is valid for every k >= 0 and returns items[k mod period].
class PeriodicSequence {
 public:
  PeriodicSequence() = default;

  explicit PeriodicSequence(std::vector<MatrixXd> items) : items_(std::move(items)) {
    if (items_.empty()) throw ValidationError("periodic sequence needs at least one item");
    for (const auto& m : items_) {
      if (m.rows() != items_.front().rows() || m.cols() != items_.front().cols()) {
        throw ValidationError("periodic sequence items have mismatched dimensions");
      }
    }
  }

  static PeriodicSequence constant(MatrixXd m) { return PeriodicSequence({std::move(m)}); }

  std::size_t period() const { return items_.size(); }
  Eigen::Index rows() const { return items_.empty() ? 0 : items_.front().rows(); }
  Eigen::Index cols() const { return items_.empty() ? 0 : items_.front().cols(); }
  bool empty() const { return items_.empty(); }

  const MatrixXd& at(std::size_t k) const { return items_[k % items_.size()]; }
  const MatrixXd& operator[](std::size_t k) const { return at(k); }

  const std::vector<MatrixXd>& items() const { return items_; }

  // Same sequence written out over a longer period (a multiple of the current one).
  PeriodicSequence expanded(std::size_t new_period) const {
    if (new_period == 0 || new_period % period() != 0) {
      throw ValidationError("expanded period must be a positive multiple of " +
                            std::to_string(period()));
    }
    std::vector<MatrixXd> out;
    out.reserve(new_period);
    for (std::size_t k = 0; k < new_period; ++k) out.push_back(at(k));
    return PeriodicSequence(std::move(out));
  }

 private:
  std::vector<MatrixXd> items_;
};

/// Rewrites every sequence over the least common multiple of their periods.
inline std::vector<PeriodicSequence> normalize_period(const std::vector<PeriodicSequence>& seqs) {
  std::size_t common = 1;
  for (const auto& s : seqs) {
    if (s.empty()) throw ValidationError("cannot normalize an empty periodic sequence");
    common = std::lcm(common, s.period());
  }
  std::vector<PeriodicSequence> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(s.expanded(common));
  return out;
}

struct SensorModel {
  PeriodicSequence C;  // n_i x n
  PeriodicSequence R;  // n_i x n_i, symmetric positive definite
};

/// Periodic plant plus per-sensor observation models, normalized to one
/// common period. Immutable after construction.
class PlantModel {
 public:
  PlantModel(PeriodicSequence A, PeriodicSequence Q, std::vector<SensorModel> sensors) {
    if (sensors.empty()) throw ValidationError("plant needs at least one sensor");
    const Eigen::Index n = A.rows();
    if (n == 0 || A.cols() != n) throw ValidationError("A must be square and nonempty");
    if (Q.rows() != n || Q.cols() != n) throw ValidationError("Q must be n x n");

    std::vector<PeriodicSequence> all{A, Q};
    for (std::size_t i = 0; i < sensors.size(); ++i) {
      const auto& s = sensors[i];
      const std::string who = "sensor " + std::to_string(i + 1);
      if (s.C.empty() || s.R.empty()) throw ValidationError(who + " has an empty C or R");
      if (s.C.cols() != n) throw ValidationError(who + ": C must have n columns");
      if (s.R.rows() != s.C.rows() || s.R.cols() != s.C.rows()) {
        throw ValidationError(who + ": R must be n_i x n_i");
      }
      all.push_back(s.C);
      all.push_back(s.R);
    }
    all = normalize_period(all);

    A_ = std::move(all[0]);
    Q_ = std::move(all[1]);
    offsets_.push_back(0);
    for (std::size_t i = 0; i < sensors.size(); ++i) {
      sensors_.push_back({std::move(all[2 + 2 * i]), std::move(all[3 + 2 * i])});
      offsets_.push_back(offsets_.back() + sensors_.back().C.rows());
    }

    for (std::size_t k = 0; k < period(); ++k) {
      if (!A_[k].allFinite() || !Q_[k].allFinite()) throw ValidationError("nonfinite A or Q");
      if (!linalg::is_symmetric_positive_definite(Q_[k])) {
        throw ValidationError("Q_" + std::to_string(k) + " is not symmetric positive definite");
      }
      for (std::size_t i = 0; i < sensors_.size(); ++i) {
        if (!sensors_[i].C[k].allFinite()) throw ValidationError("nonfinite C");
        if (!linalg::is_symmetric_positive_definite(sensors_[i].R[k])) {
          throw ValidationError("R_{" + std::to_string(i + 1) + "," + std::to_string(k) +
                                "} is not symmetric positive definite");
        }
      }
    }
  }

  Eigen::Index n() const { return A_.rows(); }
  std::size_t N() const { return sensors_.size(); }
  Eigen::Index m() const { return offsets_.back(); }
  std::size_t period() const { return A_.period(); }

  const PeriodicSequence& A() const { return A_; }
  const PeriodicSequence& Q() const { return Q_; }
  const SensorModel& sensor(std::size_t i) const { return sensors_.at(i); }
  const std::vector<SensorModel>& sensors() const { return sensors_; }

  Eigen::Index sensor_dim(std::size_t i) const { return sensors_.at(i).C.rows(); }
  // Row offset of sensor i inside the stacked observation.
  Eigen::Index offset(std::size_t i) const { return offsets_.at(i); }

 private:
  PeriodicSequence A_;
  PeriodicSequence Q_;
  std::vector<SensorModel> sensors_;
  std::vector<Eigen::Index> offsets_;
};

struct StackedObservation {
  MatrixXd C;  // m x n
  MatrixXd R;  // m x m, block diagonal
};

inline StackedObservation stacked_observation(const PlantModel& model, std::size_t k) {
  StackedObservation out{MatrixXd::Zero(model.m(), model.n()), MatrixXd::Zero(model.m(), model.m())};
  for (std::size_t i = 0; i < model.N(); ++i) {
    const Eigen::Index off = model.offset(i);
    const Eigen::Index ni = model.sensor_dim(i);
    out.C.middleRows(off, ni) = model.sensor(i).C[k];
    out.R.block(off, off, ni, ni) = model.sensor(i).R[k];
  }
  return out;
}

// Centralized pair as periodic sequences (rows stacked over all sensors).
inline std::pair<PeriodicSequence, PeriodicSequence> stacked_sequences(const PlantModel& model) {
  std::vector<MatrixXd> cs, rs;
  for (std::size_t k = 0; k < model.period(); ++k) {
    auto so = stacked_observation(model, k);
    cs.push_back(std::move(so.C));
    rs.push_back(std::move(so.R));
  }
  return {PeriodicSequence(std::move(cs)), PeriodicSequence(std::move(rs))};
}

struct Trajectory {
  std::vector<VectorXd> states;                     // x_0 .. x_K
  std::vector<std::vector<VectorXd>> measurements;  // [k][i] = y_{i,k}, k = 0 .. K
  std::uint64_t seed = 0;

  std::size_t horizon() const { return states.empty() ? 0 : states.size() - 1; }

  // Row-stack of all sensors' measurements at time k.
  VectorXd stacked_measurement(std::size_t k) const {
    Eigen::Index m = 0;
    for (const auto& y : measurements.at(k)) m += y.size();
    VectorXd out(m);
    Eigen::Index off = 0;
    for (const auto& y : measurements.at(k)) {
      out.segment(off, y.size()) = y;
      off += y.size();
    }
    return out;
  }
};

/// Draws x_0..x_K and y_{i,0}..y_{i,K}. Noise covariances are scaled by
/// noise_scale^2; a zero scale gives the deterministic noiseless trajectory.
inline Trajectory simulate_trajectory(const PlantModel& model, std::size_t horizon,
                                      std::uint64_t seed, const VectorXd& x0,
                                      double noise_scale = 1.0) {
  if (horizon < 1) throw ValidationError("horizon must be at least 1");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    throw ValidationError("noise_scale must be a finite nonnegative number");
  }
  if (x0.size() != model.n()) throw ValidationError("x0 has the wrong dimension");

  const std::size_t T = model.period();
  std::vector<MatrixXd> q_chol;
  std::vector<std::vector<MatrixXd>> r_chol(model.N());
  for (std::size_t k = 0; k < T; ++k) {
    q_chol.push_back(linalg::cholesky_factor(model.Q()[k]));
    for (std::size_t i = 0; i < model.N(); ++i) {
      r_chol[i].push_back(linalg::cholesky_factor(model.sensor(i).R[k]));
    }
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto white = [&](Eigen::Index dim) {
    VectorXd z(dim);
    for (Eigen::Index j = 0; j < dim; ++j) z(j) = normal(rng);
    return z;
  };

  Trajectory traj;
  traj.seed = seed;
  traj.states.reserve(horizon + 1);
  traj.measurements.reserve(horizon + 1);
  traj.states.push_back(x0);

  for (std::size_t k = 0; k <= horizon; ++k) {
    const VectorXd& x = traj.states.back();
    std::vector<VectorXd> ys;
    ys.reserve(model.N());
    for (std::size_t i = 0; i < model.N(); ++i) {
      VectorXd y = model.sensor(i).C[k] * x;
      const VectorXd v = white(y.size());
      if (noise_scale > 0.0) y += noise_scale * (r_chol[i][k % T] * v);
      ys.push_back(std::move(y));
    }
    traj.measurements.push_back(std::move(ys));
    if (k == horizon) break;

    VectorXd next = model.A()[k] * x;
    const VectorXd w = white(model.n());
    if (noise_scale > 0.0) next += noise_scale * (q_chol[k % T] * w);
    if (!next.allFinite()) {
      throw NumericalError("trajectory became nonfinite at k=" + std::to_string(k + 1));
    }
    traj.states.push_back(std::move(next));
  }
  return traj;
}

/// The 4-state benchmark: two copies of a rotating 2x2 block, 20 sensors of
/// which 3 see x1 and 3 see x3 on odd steps only, and 14 see nothing.
/// Component periods 6, 10 and 2 give a common period of 30.
inline PlantModel paper_plant() {
  constexpr double w1 = std::numbers::pi / 3.0;
  constexpr double w2 = std::numbers::pi / 5.0;
  constexpr double dt = 1.0;
  constexpr std::size_t period = 30;

  std::vector<MatrixXd> as;
  for (std::size_t k = 0; k < period; ++k) {
    const double t = static_cast<double>(k);
    Eigen::Matrix2d a;
    a << 0.8 + 0.4 * std::sin(w1 * t), 0.5 * std::sin(w2 * t),
         0.7 * std::cos(w1 * t), 0.9 + 0.3 * std::cos(w2 * t);
    MatrixXd A = MatrixXd::Zero(4, 4);
    A.topLeftCorner(2, 2) = a;
    A.bottomRightCorner(2, 2) = a;
    as.push_back(A);
  }

  Eigen::Matrix2d G;
  G << dt * dt * dt / 3.0, dt * dt / 2.0,
       dt * dt / 2.0, dt;
  MatrixXd Q(4, 4);
  Q << G, 0.5 * G,
       0.5 * G, G;

  // Odd time steps carry the measurement.
  auto scheduled = [](Eigen::Index column) {
    MatrixXd on = MatrixXd::Zero(1, 4);
    on(0, column) = 1.0;
    return PeriodicSequence({MatrixXd::Zero(1, 4), on});
  };
  const auto unit_r = PeriodicSequence::constant(MatrixXd::Ones(1, 1));

  std::vector<SensorModel> sensors;
  for (int i = 0; i < 3; ++i) sensors.push_back({scheduled(0), unit_r});
  for (int i = 0; i < 3; ++i) sensors.push_back({scheduled(2), unit_r});
  for (int i = 0; i < 14; ++i) {
    sensors.push_back({PeriodicSequence::constant(MatrixXd::Zero(1, 4)), unit_r});
  }
  return PlantModel(PeriodicSequence(std::move(as)), PeriodicSequence::constant(Q),
                    std::move(sensors));
}

}  // namespace filterlab
