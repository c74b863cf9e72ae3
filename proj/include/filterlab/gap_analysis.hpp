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

// Steady-state performance of the consensus-on-measurement filter: the
// per-node periodic Riccati and Lyapunov solutions, their gap to the
// centralized solution, the series representations of that gap, and the
// decay rate of the gap in the number of fusion rounds.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "filterlab/errors.hpp"
#include "filterlab/filters.hpp"
#include "filterlab/linalg.hpp"
#include "filterlab/network.hpp"
#include "filterlab/parallel.hpp"
#include "filterlab/periodic_core.hpp"
#include "filterlab/spps.hpp"

namespace filterlab {

inline SppsSolution centralized_dpre(const PlantModel& model, SolveOptions opt = {}) {
  const auto [C, R] = stacked_sequences(model);
  return dpre_spps(model.A(), C, model.Q(), R, std::nullopt, opt);
}

/// Everything the theory knows about node i at a given L.
struct NodeTheory {
  ModifiedSequences modified;
  SppsSolution riccati;    // P_{i,k}^(L), limit of the filter's covariance parameter
  ClosedLoopSequence loop; // gains and closed-loop matrices along riccati
  SppsSolution error;      // P~_{i,k}^(L), limit of the true error covariance
};

inline NodeTheory node_theory(const PlantModel& model, const WeightPower& power, std::size_t i,
                              SolveOptions opt = {}) {
  NodeTheory t;
  t.modified = modified_sequences(model, power, i);
  if (!uniform_observability(model.A(), t.modified.C)) {
    throw ObservabilityError("sensor " + std::to_string(i + 1) +
                             ": modified pair is not uniformly observable");
  }
  t.riccati = dpre_spps(model.A(), t.modified.C, model.Q(), t.modified.R_tilde, std::nullopt, opt);
  t.loop = closed_loop_sequence(model.A(), t.modified.C, t.modified.R_tilde, t.riccati);

  std::vector<MatrixXd> forcing;
  for (std::size_t k = 0; k < model.period(); ++k) {
    const MatrixXd& K = t.loop.K[k];
    forcing.push_back(model.Q()[k] + K * t.modified.R_bar[k] * K.transpose());
  }
  try {
    t.error = dple_spps(t.loop.Atilde, PeriodicSequence(std::move(forcing)), opt);
  } catch (const ConvergenceError&) {
    throw;
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("internal error: error-covariance equation failed after a "
                                     "successful Riccati solve: ") + e.what());
  }
  return t;
}

/// Periodic Riccati solution of node i after L fusion rounds.
inline SppsSolution cmdf_dpre(const PlantModel& model, const ConsensusWeights& weights, std::size_t L,
                              std::size_t i, SolveOptions opt = {}) {
  detail::check_weights(model, weights);
  const auto power = weight_power(weights, L);
  const auto mod = modified_sequences(model, power, i);
  if (!uniform_observability(model.A(), mod.C)) {
    throw ObservabilityError("sensor " + std::to_string(i + 1) +
                             ": modified pair is not uniformly observable");
  }
  return dpre_spps(model.A(), mod.C, model.Q(), mod.R_tilde, std::nullopt, opt);
}

/// Steady-state true error covariance of node i (periodic Lyapunov equation).
inline SppsSolution cmdf_error_dple(const PlantModel& model, const ConsensusWeights& weights,
                                    std::size_t L, std::size_t i, SolveOptions opt = {}) {
  detail::check_weights(model, weights);
  return node_theory(model, weight_power(weights, L), i, opt).error;
}

struct SeriesCheck {
  MatrixXd series_sum;
  MatrixXd direct;
  double defect = 0.0;
  std::size_t terms = 0;
  double tail_norm = 0.0;  // norm of the last term added
  bool converged = false;  // tail fell below 1e-12 before the truncation cap
};

namespace detail {

// Sum_{j} left^j * forcing * (right^j)', stopping once a term is below 1e-14.
inline SeriesCheck sum_series(const MatrixXd& left, const MatrixXd& forcing, const MatrixXd& right,
                              std::size_t truncation) {
  SeriesCheck out;
  out.series_sum = MatrixXd::Zero(forcing.rows(), forcing.cols());
  MatrixXd term = forcing;
  for (std::size_t j = 0; j <= truncation; ++j) {
    out.series_sum += term;
    out.terms = j + 1;
    out.tail_norm = linalg::spectral_norm(term);
    if (out.tail_norm < 1e-14) break;
    term = left * term * right.transpose();
  }
  out.converged = out.tail_norm < 1e-12;
  return out;
}

}  // namespace detail

/// P^(L)_{i,k} - P_k written as sum_j Phi_L^j Psi (Phi_P^j)', where Psi
/// collects one period of K_L (R~ - R) K_P' terms carried to the end of the
/// period. Requires every sensor to be in node i's L-step support.
inline SeriesCheck gap_series_ric(const PlantModel& model, const ConsensusWeights& weights, std::size_t L,
                                  std::size_t i, std::size_t truncation, std::size_t anchor = 0,
                                  SolveOptions opt = {1e-13, 0}) {
  detail::check_weights(model, weights);
  const auto power = weight_power(weights, L);
  const auto mod = modified_sequences(model, power, i);
  if (std::find(mod.support.begin(), mod.support.end(), false) != mod.support.end()) {
    throw ValidationError("Riccati gap series needs full support (L at least the diameter)");
  }
  const auto [C, R] = stacked_sequences(model);
  const auto P = dpre_spps(model.A(), C, model.Q(), R, std::nullopt, opt);
  const auto PL = dpre_spps(model.A(), C, model.Q(), mod.R_tilde, std::nullopt, opt);
  const auto loop_P = closed_loop_sequence(model.A(), C, R, P);
  const auto loop_L = closed_loop_sequence(model.A(), C, mod.R_tilde, PL);

  const Eigen::Index n = model.n();
  MatrixXd psi = MatrixXd::Zero(n, n);
  for (std::size_t l = 0; l < model.period(); ++l) {
    const std::size_t k = anchor + l;
    psi = loop_L.Atilde[k] * psi * loop_P.Atilde[k].transpose() +
          loop_L.K[k] * (mod.R_tilde[k] - R[k]) * loop_P.K[k].transpose();
  }
  auto out = detail::sum_series(period_product(loop_L.Atilde, anchor), psi,
                                period_product(loop_P.Atilde, anchor), truncation);
  out.direct = PL.at(anchor) - P.at(anchor);
  out.defect = linalg::spectral_norm(out.series_sum - out.direct);
  return out;
}

/// P~^(L)_{i,k} - P^(L)_{i,k} written as sum_j Phi_L^j Upsilon (Phi_L^j)',
/// with Upsilon built from K_L (R_bar - R~) K_L' terms.
inline SeriesCheck gap_series_cov(const PlantModel& model, const ConsensusWeights& weights, std::size_t L,
                                  std::size_t i, std::size_t truncation, std::size_t anchor = 0,
                                  SolveOptions opt = {1e-13, 0}) {
  detail::check_weights(model, weights);
  const auto t = node_theory(model, weight_power(weights, L), i, opt);
  const Eigen::Index n = model.n();
  MatrixXd upsilon = MatrixXd::Zero(n, n);
  for (std::size_t l = 0; l < model.period(); ++l) {
    const std::size_t k = anchor + l;
    const MatrixXd& A = t.loop.Atilde[k];
    const MatrixXd& K = t.loop.K[k];
    upsilon = A * upsilon * A.transpose() + K * (t.modified.R_bar[k] - t.modified.R_tilde[k]) * K.transpose();
  }
  const MatrixXd phi = period_product(t.loop.Atilde, anchor);
  auto out = detail::sum_series(phi, upsilon, phi, truncation);
  out.direct = t.error.at(anchor) - t.riccati.at(anchor);
  out.defect = linalg::spectral_norm(out.series_sum - out.direct);
  return out;
}

// Mean trace over one period.
inline double average_performance(const SppsSolution& sol) {
  double total = 0.0;
  for (const auto& P : sol.P) total += P.trace();
  return total / static_cast<double>(sol.period());
}

struct RateEntry {
  std::size_t L = 0;
  double gap = 0.0;             // average true error trace minus the centralized one
  std::optional<double> rate;   // gap(L+1) / gap(L), when L+1 is available
  bool at_floor = false;        // |gap(L)| <= 1e-12: ratio not formed
  // Same ratio for the filter's own Riccati solution. The true error is
  // second order in the weight deviation (the centralized gain is optimal)
  // while the Riccati solution is first order, so this one tracks sigma2
  // and `rate` tracks roughly its square.
  double riccati_gap = 0.0;
  std::optional<double> riccati_rate;
};

/// Ratio of consecutive average-performance gaps for node i.
inline std::vector<RateEntry> rate_fit(const PlantModel& model, const ConsensusWeights& weights,
                                       std::size_t i, std::vector<std::size_t> L_range,
                                       SolveOptions opt = {}) {
  detail::check_weights(model, weights);
  std::sort(L_range.begin(), L_range.end());
  L_range.erase(std::unique(L_range.begin(), L_range.end()), L_range.end());
  const double centralized = average_performance(centralized_dpre(model, opt));
  std::vector<RateEntry> out;
  for (std::size_t L : L_range) {
    const auto t = node_theory(model, weight_power(weights, L), i, opt);
    RateEntry e;
    e.L = L;
    e.gap = average_performance(t.error) - centralized;
    e.riccati_gap = average_performance(t.riccati) - centralized;
    out.push_back(e);
  }
  for (std::size_t j = 0; j < out.size(); ++j) {
    const bool has_next = j + 1 < out.size() && out[j + 1].L == out[j].L + 1;
    if (has_next && std::abs(out[j].riccati_gap) > 1e-12) {
      out[j].riccati_rate = out[j + 1].riccati_gap / out[j].riccati_gap;
    }
    if (std::abs(out[j].gap) <= 1e-12) {
      out[j].at_floor = true;
      continue;
    }
    if (has_next) out[j].rate = out[j + 1].gap / out[j].gap;
  }
  return out;
}

/// exp of the least-squares slope of log(gap) against L; gaps at or below
/// 1e-12 are ignored. NaN with fewer than two usable points.
inline double log_linear_rate(const std::vector<std::size_t>& L, const std::vector<double>& gaps) {
  std::vector<double> xs, ys;
  for (std::size_t j = 0; j < L.size() && j < gaps.size(); ++j) {
    if (gaps[j] > 1e-12) {
      xs.push_back(static_cast<double>(L[j]));
      ys.push_back(std::log(gaps[j]));
    }
  }
  if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    sxy += (xs[j] - mx) * (ys[j] - my);
    sxx += (xs[j] - mx) * (xs[j] - mx);
  }
  return std::exp(sxy / sxx);
}

/// Covariance parameter and true error covariance of one node, iterated
/// from the filter's initial values. `scale[j]` is N l_ij^(L) (zero off
/// support); all ones gives the centralized filter.
struct CovarianceRecursion {
  std::vector<MatrixXd> parameter;  // P_{i,k|k-1}, k = 1..steps (index k-1)
  std::vector<MatrixXd> error;      // P~_{i,k|k-1}, k = 1..steps
};

inline CovarianceRecursion covariance_recursion(const PlantModel& model, const SensorInformation& info,
                                                const VectorXd& scale, std::size_t steps,
                                                const MatrixXd& P_init, const MatrixXd& error_init) {
  if (static_cast<std::size_t>(scale.size()) != model.N()) throw ValidationError("one scale per sensor");
  CovarianceRecursion out;
  MatrixXd P = P_init;
  MatrixXd E = error_init;
  const Eigen::Index n = model.n();
  for (std::size_t k = 1; k <= steps; ++k) {
    const MatrixXd& A = model.A()[k - 1];
    const MatrixXd& Q = model.Q()[k - 1];
    const MatrixXd Ppred = linalg::symmetrized(A * P * A.transpose() + Q);
    const MatrixXd Epred = linalg::symmetrized(A * E * A.transpose() + Q);
    out.parameter.push_back(Ppred);
    out.error.push_back(Epred);

    MatrixXd S = MatrixXd::Zero(n, n);
    MatrixXd noise = MatrixXd::Zero(n, n);
    for (std::size_t j = 0; j < model.N(); ++j) {
      if (scale(j) == 0.0) continue;
      S += scale(j) * info.matrix(j, k);
      noise += scale(j) * scale(j) * info.matrix(j, k);
    }
    const MatrixXd prior_info = linalg::spd_inverse(Ppred, "predicted covariance");
    P = linalg::spd_inverse(prior_info + S, "posterior information");
    const MatrixXd M = P * prior_info;
    E = linalg::symmetrized(M * Epred * M.transpose() + P * noise * P);
  }
  return out;
}

// N l_ij^(L) on support, zero elsewhere.
inline VectorXd fusion_scale(const WeightPower& power, std::size_t i) {
  const auto N = static_cast<double>(power.matrix.rows());
  VectorXd s = VectorXd::Zero(power.matrix.rows());
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    if (power.support(i, j)) s(j) = N * power.matrix(i, j);
  }
  return s;
}

/// Per (sensor, L) gap summary.
struct GapReport {
  struct Row {
    std::size_t sensor = 0;  // 0-based
    std::size_t L = 0;
    double gap_ric = 0.0;    // max_k ||P^(L)_{i,k} - P_k||_2
    double gap_cov = 0.0;    // max_k ||P~^(L)_{i,k} - P_k||_2
    double avg_perf = 0.0;   // mean trace of P~^(L)_{i,.}
    std::optional<double> rate;
  };
  std::vector<Row> rows;
  double sigma2 = 0.0;
  double centralized_avg = 0.0;
  std::vector<std::size_t> L_values;
};

inline GapReport build_gap_report(const PlantModel& model, const ConsensusWeights& weights,
                                  std::vector<std::size_t> L_values, SolveOptions opt = {}) {
  detail::check_weights(model, weights);
  std::sort(L_values.begin(), L_values.end());
  L_values.erase(std::unique(L_values.begin(), L_values.end()), L_values.end());

  GapReport rep;
  rep.L_values = L_values;
  rep.sigma2 = spectral_diagnostics(weights).sigma2;
  const auto P = centralized_dpre(model, opt);
  rep.centralized_avg = average_performance(P);

  std::vector<WeightPower> powers;
  for (std::size_t L : L_values) powers.push_back(weight_power(weights, L));

  const std::size_t cells = model.N() * L_values.size();
  rep.rows.resize(cells);
  std::vector<std::string> failures(cells);
  parallel_for(cells, [&](std::size_t c) {
    const std::size_t i = c / L_values.size();
    const std::size_t li = c % L_values.size();
    auto& row = rep.rows[c];
    row.sensor = i;
    row.L = L_values[li];
    try {
      const auto t = node_theory(model, powers[li], i, opt);
      for (std::size_t k = 0; k < model.period(); ++k) {
        row.gap_ric = std::max(row.gap_ric, linalg::symmetric_norm(t.riccati.at(k) - P.at(k)));
        row.gap_cov = std::max(row.gap_cov, linalg::symmetric_norm(t.error.at(k) - P.at(k)));
      }
      row.avg_perf = average_performance(t.error);
    } catch (const NumericalError& e) {
      failures[c] = e.what();
    }
  });
  for (const auto& f : failures) {
    if (!f.empty()) throw NumericalError("gap report: " + f);
  }

  for (std::size_t c = 0; c < cells; ++c) {
    const std::size_t li = c % L_values.size();
    if (li + 1 >= L_values.size() || L_values[li + 1] != L_values[li] + 1) continue;
    const double here = rep.rows[c].avg_perf - rep.centralized_avg;
    const double next = rep.rows[c + 1].avg_perf - rep.centralized_avg;
    if (std::abs(here) > 1e-12) rep.rows[c].rate = next / here;
  }
  return rep;
}

}  // namespace filterlab
