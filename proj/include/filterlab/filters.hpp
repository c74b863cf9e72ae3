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

// Centralized, consensus-on-measurement and consensus-on-information
// Kalman filter steps, plus the per-sensor modified observation model that
// describes what a node effectively sees after L fusion rounds.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "filterlab/errors.hpp"
#include "filterlab/linalg.hpp"
#include "filterlab/network.hpp"
#include "filterlab/periodic_core.hpp"

namespace filterlab {

/// Posterior estimate x_{i,k|k} and its covariance parameter P_{i,k|k}.
struct NodeState {
  VectorXd estimate;
  MatrixXd covariance;
};

inline NodeState default_node_state(Eigen::Index n) {
  return {VectorXd::Zero(n), MatrixXd::Identity(n, n)};
}

/// Per-sensor C' R^{-1} C and C' R^{-1} over one period, computed once.
class SensorInformation {
 public:
  explicit SensorInformation(const PlantModel& model) : period_(model.period()) {
    for (std::size_t k = 0; k < period_; ++k) {
      MatrixXd total = MatrixXd::Zero(model.n(), model.n());
      for (std::size_t i = 0; i < model.N(); ++i) {
        const MatrixXd& C = model.sensor(i).C[k];
        const MatrixXd Rinv = linalg::spd_inverse(model.sensor(i).R[k], "R");
        MatrixXd G = C.transpose() * Rinv;
        MatrixXd H = linalg::symmetrized(G * C);
        total += H;
        gain_.push_back(std::move(G));
        info_.push_back(std::move(H));
      }
      total_.push_back(std::move(total));
    }
    sensors_ = model.N();
  }

  // C_{i,k}' R_{i,k}^{-1} C_{i,k}
  const MatrixXd& matrix(std::size_t i, std::size_t k) const { return info_[index(i, k)]; }
  // C_{i,k}' R_{i,k}^{-1}
  const MatrixXd& gain(std::size_t i, std::size_t k) const { return gain_[index(i, k)]; }
  // sum over sensors of matrix(i, k)
  const MatrixXd& total(std::size_t k) const { return total_[k % period_]; }

 private:
  std::size_t index(std::size_t i, std::size_t k) const { return (k % period_) * sensors_ + i; }

  std::size_t period_;
  std::size_t sensors_ = 0;
  std::vector<MatrixXd> info_, gain_, total_;
};

/// Time update with A_{k-1}, Q_{k-1}; k >= 1.
inline NodeState predict(const PlantModel& model, const NodeState& state, std::size_t k) {
  if (k == 0) throw ValidationError("prediction needs k >= 1");
  const MatrixXd& A = model.A()[k - 1];
  return {A * state.estimate,
          linalg::symmetrized(A * state.covariance * A.transpose() + model.Q()[k - 1])};
}

namespace detail {

// Information-form measurement update with information matrix S and vector I.
inline NodeState information_update(const NodeState& predicted, const MatrixXd& S, const VectorXd& I) {
  const MatrixXd prior_info = linalg::spd_inverse(predicted.covariance, "predicted covariance");
  const MatrixXd post = linalg::spd_inverse(prior_info + S, "posterior information");
  return {post * (prior_info * predicted.estimate + I), post};
}

inline void check_measurements(const PlantModel& model, const std::vector<VectorXd>& y) {
  if (y.size() != model.N()) throw ValidationError("expected one measurement per sensor");
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i].size() != model.sensor_dim(i)) {
      throw ValidationError("measurement of sensor " + std::to_string(i + 1) + " has the wrong size");
    }
  }
}

inline std::vector<VectorXd> split_measurement(const PlantModel& model, const VectorXd& y_all) {
  if (y_all.size() != model.m()) throw ValidationError("stacked measurement must have dimension m");
  std::vector<VectorXd> y;
  for (std::size_t i = 0; i < model.N(); ++i) {
    y.push_back(y_all.segment(model.offset(i), model.sensor_dim(i)));
  }
  return y;
}

inline void check_states(const PlantModel& model, const std::vector<NodeState>& states) {
  if (states.size() != model.N()) throw ValidationError("expected one node state per sensor");
}

inline void check_weights(const PlantModel& model, const ConsensusWeights& w) {
  if (w.size() != model.N()) throw ValidationError("weights do not match the sensor count");
}

}  // namespace detail

inline NodeState ckf_correct(const PlantModel& model, const SensorInformation& info,
                             const NodeState& predicted, const std::vector<VectorXd>& y, std::size_t k) {
  VectorXd I = VectorXd::Zero(model.n());
  for (std::size_t i = 0; i < model.N(); ++i) I += info.gain(i, k) * y[i];
  return detail::information_update(predicted, info.total(k), I);
}

/// Centralized filter: predict, then fuse every sensor's information exactly.
inline NodeState ckf_step(const PlantModel& model, const NodeState& state, const VectorXd& y_all,
                          std::size_t k) {
  const SensorInformation info(model);
  return ckf_correct(model, info, predict(model, state, k), detail::split_measurement(model, y_all), k);
}

/// Information pair S_{i,k}^{(h)}, I_{i,k}^{(h)} held by one node.
struct FusionProducts {
  MatrixXd S;
  VectorXd I;
  std::size_t rounds = 0;
};

// Round-zero products N C' R^{-1} C and N C' R^{-1} y.
inline std::vector<FusionProducts> initial_fusion_products(const PlantModel& model,
                                                           const SensorInformation& info,
                                                           const std::vector<VectorXd>& y,
                                                           std::size_t k) {
  const double N = static_cast<double>(model.N());
  std::vector<FusionProducts> out;
  out.reserve(model.N());
  for (std::size_t i = 0; i < model.N(); ++i) {
    out.push_back({N * info.matrix(i, k), N * (info.gain(i, k) * y[i]), 0});
  }
  return out;
}

/// L synchronous rounds of S_i <- sum_j l_ij S_j (same for I). Node i reads
/// only from in-neighbours j with l_ij > 0.
inline std::vector<FusionProducts> fuse(const ConsensusWeights& weights,
                                        std::vector<FusionProducts> products, std::size_t rounds) {
  if (products.size() != weights.size()) throw ValidationError("one fusion product per node expected");
  std::vector<FusionProducts> next(products.size());
  for (std::size_t h = 0; h < rounds; ++h) {
    for (std::size_t i = 0; i < products.size(); ++i) {
      next[i].S.setZero(products[i].S.rows(), products[i].S.cols());
      next[i].I.setZero(products[i].I.size());
      for (std::size_t j : weights.in_neighbors(i)) {
        next[i].S.noalias() += weights(i, j) * products[j].S;
        next[i].I.noalias() += weights(i, j) * products[j].I;
      }
      next[i].rounds = products[i].rounds + 1;
    }
    std::swap(products, next);
  }
  return products;
}

inline std::vector<NodeState> cmdf_correct(const PlantModel& model, const SensorInformation& info,
                                           const ConsensusWeights& weights, std::size_t L,
                                           const std::vector<NodeState>& predicted,
                                           const std::vector<VectorXd>& y, std::size_t k) {
  const auto fused = fuse(weights, initial_fusion_products(model, info, y, k), L);
  std::vector<NodeState> out;
  out.reserve(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    out.push_back(detail::information_update(predicted[i], fused[i].S, fused[i].I));
  }
  return out;
}

/// Consensus-on-measurement distributed filter, one sampling instant:
/// local prediction, L rounds of fusing N-scaled measurement information,
/// information-form correction.
inline std::vector<NodeState> cmdf_step(const PlantModel& model, const ConsensusWeights& weights,
                                        std::size_t L, const std::vector<NodeState>& states,
                                        const std::vector<VectorXd>& y, std::size_t k) {
  detail::check_weights(model, weights);
  detail::check_states(model, states);
  detail::check_measurements(model, y);
  const SensorInformation info(model);
  std::vector<NodeState> predicted;
  for (const auto& s : states) predicted.push_back(predict(model, s, k));
  return cmdf_correct(model, info, weights, L, predicted, y, k);
}

inline std::vector<NodeState> cidf_correct([[maybe_unused]] const PlantModel& model, const SensorInformation& info,
                                           const ConsensusWeights& weights, std::size_t L,
                                           const std::vector<NodeState>& predicted,
                                           const std::vector<VectorXd>& y, std::size_t k) {
  std::vector<FusionProducts> local;
  local.reserve(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const MatrixXd prior_info = linalg::spd_inverse(predicted[i].covariance, "predicted covariance");
    local.push_back({prior_info + info.matrix(i, k),
                     prior_info * predicted[i].estimate + info.gain(i, k) * y[i], 0});
  }
  const auto mixed = fuse(weights, std::move(local), L);
  std::vector<NodeState> out;
  out.reserve(mixed.size());
  for (const auto& p : mixed) {
    const MatrixXd P = linalg::spd_inverse(p.S, "mixed information matrix");
    out.push_back({P * p.I, P});
  }
  return out;
}

/// Consensus-on-information baseline: local correction with the node's own
/// sensor, then L rounds of plain averaging of the posterior information pair.
inline std::vector<NodeState> cidf_step(const PlantModel& model, const ConsensusWeights& weights,
                                        std::size_t L, const std::vector<NodeState>& states,
                                        const std::vector<VectorXd>& y, std::size_t k) {
  detail::check_weights(model, weights);
  detail::check_states(model, states);
  detail::check_measurements(model, y);
  const SensorInformation info(model);
  std::vector<NodeState> predicted;
  for (const auto& s : states) predicted.push_back(predict(model, s, k));
  return cidf_correct(model, info, weights, L, predicted, y, k);
}

/// What node i effectively observes after L fusion rounds: sensors j with
/// l_ij^(L) > 0 contribute C_j with noise R_j / (N l_ij^(L)); the filter's
/// true noise on those rows is R_j itself.
struct ModifiedObservation {
  MatrixXd C_tilde;           // m x n, zero rows for unsupported sensors
  MatrixXd R_tilde;           // m x m, blocks R_j / (N l_ij), zero off support
  MatrixXd R_bar;             // m x m, blocks R_j on support
  std::vector<bool> support;  // l_ij^(L) > kStructuralZero
  VectorXd scale;             // N l_ij^(L)
  std::vector<Eigen::Index> offsets;  // row offset of each sensor block

  // Restriction to supported blocks. These are the matrices the Riccati and
  // Lyapunov solvers consume, since unsupported blocks carry no information.
  struct Compressed {
    MatrixXd C, R_tilde, R_bar;
  };

  Compressed compressed() const {
    Eigen::Index rows = 0;
    for (std::size_t j = 0; j < support.size(); ++j)
      if (support[j]) rows += block_size(j);
    Compressed c{MatrixXd::Zero(rows, C_tilde.cols()), MatrixXd::Zero(rows, rows), MatrixXd::Zero(rows, rows)};
    Eigen::Index at = 0;
    for (std::size_t j = 0; j < support.size(); ++j) {
      if (!support[j]) continue;
      const Eigen::Index b = block_size(j);
      c.C.middleRows(at, b) = C_tilde.middleRows(offsets[j], b);
      c.R_tilde.block(at, at, b, b) = R_tilde.block(offsets[j], offsets[j], b, b);
      c.R_bar.block(at, at, b, b) = R_bar.block(offsets[j], offsets[j], b, b);
      at += b;
    }
    return c;
  }

  // C~' R~^{-1} C~ with zero blocks of R~ left out.
  MatrixXd information_matrix() const {
    const auto c = compressed();
    if (c.C.rows() == 0) return MatrixXd::Zero(C_tilde.cols(), C_tilde.cols());
    return linalg::symmetrized(c.C.transpose() * linalg::spd_inverse(c.R_tilde, "R tilde") * c.C);
  }

  Eigen::Index block_size(std::size_t j) const {
    const Eigen::Index end = j + 1 < offsets.size() ? offsets[j + 1] : C_tilde.rows();
    return end - offsets[j];
  }
};

inline ModifiedObservation modified_observation(const PlantModel& model, const WeightPower& power,
                                                std::size_t i, std::size_t k) {
  if (static_cast<std::size_t>(power.matrix.rows()) != model.N()) {
    throw ValidationError("weight power does not match the sensor count");
  }
  if (i >= model.N()) throw ValidationError("sensor index out of range");
  const double N = static_cast<double>(model.N());
  const Eigen::Index m = model.m();
  ModifiedObservation out{MatrixXd::Zero(m, model.n()), MatrixXd::Zero(m, m), MatrixXd::Zero(m, m),
                          std::vector<bool>(model.N(), false), VectorXd::Zero(model.N()), {}};
  for (std::size_t j = 0; j < model.N(); ++j) {
    const Eigen::Index off = model.offset(j);
    const Eigen::Index b = model.sensor_dim(j);
    out.offsets.push_back(off);
    out.scale(j) = N * power.matrix(i, j);
    if (!power.support(i, j)) continue;
    out.support[j] = true;
    out.C_tilde.middleRows(off, b) = model.sensor(j).C[k];
    out.R_tilde.block(off, off, b, b) = model.sensor(j).R[k] / out.scale(j);
    out.R_bar.block(off, off, b, b) = model.sensor(j).R[k];
  }
  return out;
}

inline ModifiedObservation modified_observation(const PlantModel& model, const ConsensusWeights& weights,
                                                std::size_t L, std::size_t i, std::size_t k) {
  detail::check_weights(model, weights);
  return modified_observation(model, weight_power(weights, L), i, k);
}

/// Compressed modified matrices of node i over one period.
struct ModifiedSequences {
  PeriodicSequence C, R_tilde, R_bar;
  std::vector<bool> support;
};

inline ModifiedSequences modified_sequences(const PlantModel& model, const WeightPower& power,
                                            std::size_t i) {
  std::vector<MatrixXd> cs, rts, rbs;
  std::vector<bool> support;
  for (std::size_t k = 0; k < model.period(); ++k) {
    const auto mo = modified_observation(model, power, i, k);
    auto c = mo.compressed();
    cs.push_back(std::move(c.C));
    rts.push_back(std::move(c.R_tilde));
    rbs.push_back(std::move(c.R_bar));
    support = mo.support;
  }
  return {PeriodicSequence(std::move(cs)), PeriodicSequence(std::move(rts)),
          PeriodicSequence(std::move(rbs)), std::move(support)};
}

}  // namespace filterlab
