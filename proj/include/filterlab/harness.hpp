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

// Monte Carlo experiment engine: many independent trials of the CKF, CMDF
// and CIDF filters over one scenario, empirical MSE per sensor and step,
// and the matching theoretical curves.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "filterlab/errors.hpp"
#include "filterlab/filters.hpp"
#include "filterlab/gap_analysis.hpp"
#include "filterlab/network.hpp"
#include "filterlab/parallel.hpp"
#include "filterlab/periodic_core.hpp"

namespace filterlab {

enum class FilterKind { CKF, CMDF, CIDF };

inline std::string filter_name(FilterKind f) {
  switch (f) {
    case FilterKind::CKF: return "CKF";
    case FilterKind::CMDF: return "CMDF";
    case FilterKind::CIDF: return "CIDF";
  }
  return "?";
}

inline FilterKind parse_filter(const std::string& s) {
  if (s == "CKF" || s == "ckf") return FilterKind::CKF;
  if (s == "CMDF" || s == "cmdf") return FilterKind::CMDF;
  if (s == "CIDF" || s == "cidf") return FilterKind::CIDF;
  throw ValidationError("unknown filter '" + s + "'");
}

struct Scenario {
  Scenario(PlantModel p, SensorGraph g, ConsensusWeights w)
      : plant(std::move(p)), graph(std::move(g)), weights(std::move(w)) {}

  PlantModel plant;
  SensorGraph graph;
  ConsensusWeights weights;
  std::vector<std::size_t> L_values;
  std::size_t horizon = 100;
  std::size_t trials = 1500;
  std::uint64_t seed = 1;
  std::vector<FilterKind> filters{FilterKind::CKF, FilterKind::CMDF};
  std::optional<VectorXd> x0;                  // true initial state, zero if unset
  std::optional<VectorXd> initial_estimate;    // x_{i,0|0}, zero if unset
  std::optional<MatrixXd> initial_covariance;  // P_{i,0|0}, identity if unset
  double noise_scale = 1.0;

  bool has(FilterKind f) const { return std::find(filters.begin(), filters.end(), f) != filters.end(); }
  VectorXd true_initial_state() const { return x0.value_or(VectorXd::Zero(plant.n())); }
  VectorXd estimate_init() const { return initial_estimate.value_or(VectorXd::Zero(plant.n())); }
  MatrixXd covariance_init() const {
    return initial_covariance.value_or(MatrixXd::Identity(plant.n(), plant.n()));
  }
  // First step of the steady window, which is the last full period.
  std::size_t steady_begin() const { return horizon - plant.period() + 1; }

  void validate() const {
    if (graph.size() != plant.N()) throw ValidationError("graph size differs from the sensor count");
    if (weights.size() != plant.N()) throw ValidationError("weights size differs from the sensor count");
    if (!is_strongly_connected(graph)) throw ValidationError("communication graph is not connected");
    for (std::size_t i = 0; i < plant.N(); ++i) {
      for (std::size_t j = 0; j < plant.N(); ++j) {
        if (i != j && weights(i, j) > 0.0 && !graph.has_edge(i, j)) {
          throw ValidationError("weight on a pair that is not an edge");
        }
      }
    }
    if (horizon < 2 * plant.period()) throw ValidationError("horizon must cover at least two periods");
    if (trials == 0) throw ValidationError("at least one trial is required");
    if (filters.empty()) throw ValidationError("no filter selected");
    if (!(noise_scale >= 0.0)) throw ValidationError("noise_scale must be nonnegative");
    const auto n = static_cast<Eigen::Index>(plant.n());
    if (x0 && x0->size() != n) throw ValidationError("x0 has the wrong dimension");
    if (initial_estimate && initial_estimate->size() != n) {
      throw ValidationError("initial estimate has the wrong dimension");
    }
    if (initial_covariance && !linalg::is_symmetric_positive_definite(*initial_covariance)) {
      throw ValidationError("initial covariance must be symmetric positive definite");
    }
    if (initial_covariance && initial_covariance->rows() != n) {
      throw ValidationError("initial covariance has the wrong dimension");
    }
  }
};

// Default sweep {d, ..., d+8}.
inline std::vector<std::size_t> default_L_values(const SensorGraph& g) {
  const std::size_t d = diameter(g);
  std::vector<std::size_t> out;
  for (std::size_t L = d; L <= d + 8; ++L) out.push_back(L);
  return out;
}

/// First connected 20-node geometric graph (300 x 300 field, radius 130)
/// at or after `seed`.
inline SensorGraph paper_graph(std::uint64_t seed = 8) {
  for (std::uint64_t s = seed; s < seed + 10000; ++s) {
    auto g = random_geometric_graph(20, 300.0, 130.0, s);
    if (is_strongly_connected(g)) return g;
  }
  throw NumericalError("no connected geometric graph found");
}

inline Scenario paper_scenario(std::uint64_t graph_seed = 8, std::uint64_t seed = 1) {
  auto graph = paper_graph(graph_seed);
  auto weights = metropolis_weights(graph);
  Scenario s(paper_plant(), graph, weights);
  s.L_values = default_L_values(graph);
  s.seed = seed;
  s.filters = {FilterKind::CKF, FilterKind::CMDF, FilterKind::CIDF};
  return s;
}

/// One curve family: a filter at one fusion step L (CKF: L = 0 and a single
/// row for the fusion centre).
struct SeriesResult {
  FilterKind filter = FilterKind::CKF;
  std::size_t L = 0;
  MatrixXd mse;             // rows x K, column k-1 holds step k
  VectorXd mse_steady;      // average over the steady window
  VectorXd mse_steady_se;   // Monte Carlo standard error of mse_steady
  MatrixXd theory;          // trace of the error covariance recursion; NaN for CIDF
  VectorXd theory_avg;      // steady-state average trace; NaN when unavailable
  VectorXd rate;            // gap ratio between L+1 and L; NaN when undefined
  std::vector<std::size_t> diverged_trials;

  Eigen::Index rows() const { return mse.rows(); }
  std::string label() const {
    return filter == FilterKind::CKF ? "CKF" : filter_name(filter) + ":L=" + std::to_string(L);
  }
};

struct TrialResults {
  std::vector<SeriesResult> series;
  std::size_t trials = 0;
  std::size_t horizon = 0;
  std::size_t period = 0;
  std::size_t steady_begin = 0;
  std::uint64_t seed = 0;
  double sigma2 = 0.0;
  std::size_t diameter = 0;
  double centralized_avg = 0.0;
  double runtime_seconds = 0.0;

  const SeriesResult* find(FilterKind f, std::size_t L = 0) const {
    for (const auto& s : series) {
      if (s.filter == f && (f == FilterKind::CKF || s.L == L)) return &s;
    }
    return nullptr;
  }
};

/// Counter-based seed for trial `index`: splitmix64 applied to the master
/// seed plus a multiple of the golden-ratio increment.
inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace detail {

struct SeriesPlan {
  FilterKind filter;
  std::size_t L;
};

inline std::vector<SeriesPlan> series_plan(const Scenario& s) {
  std::vector<SeriesPlan> plan;
  if (s.has(FilterKind::CKF)) plan.push_back({FilterKind::CKF, 0});
  for (FilterKind f : {FilterKind::CMDF, FilterKind::CIDF}) {
    if (!s.has(f)) continue;
    for (std::size_t L : s.L_values) plan.push_back({f, L});
  }
  return plan;
}

inline bool diverged(const VectorXd& x) { return !x.allFinite() || x.norm() > 1e9; }

}  // namespace detail

/// Squared prediction errors of every series in a single trial.
struct TrialErrors {
  std::vector<MatrixXd> sq_error;  // per series: rows x K
  std::vector<bool> diverged;      // per series
};

/// Runs every configured filter over one simulated trajectory. Errors are
/// measured on the one-step predictions x_{i,k|k-1}, k = 1..K.
inline TrialErrors run_trial(const Scenario& s, const SensorInformation& info, std::uint64_t seed) {
  const auto plan = detail::series_plan(s);
  const PlantModel& model = s.plant;
  const std::size_t N = model.N();
  const std::size_t K = s.horizon;
  const auto traj = simulate_trajectory(model, K, seed, s.true_initial_state(), s.noise_scale);

  TrialErrors out;
  out.diverged.assign(plan.size(), false);
  const NodeState init{s.estimate_init(), s.covariance_init()};

  std::size_t max_cmdf_L = 0;
  for (const auto& p : plan) {
    if (p.filter == FilterKind::CMDF) max_cmdf_L = std::max(max_cmdf_L, p.L);
  }

  std::vector<std::vector<NodeState>> states(plan.size());
  for (std::size_t p = 0; p < plan.size(); ++p) {
    const std::size_t rows = plan[p].filter == FilterKind::CKF ? 1 : N;
    states[p].assign(rows, init);
    out.sq_error.push_back(MatrixXd::Zero(rows, K));
  }

  // Fusion of measurement information does not depend on node states, so
  // all CMDF series share one pass and read off the round they need.
  std::vector<std::vector<FusionProducts>> rounds;
  std::vector<NodeState> predicted;
  for (std::size_t k = 1; k <= K; ++k) {
    const auto& y = traj.measurements[k];
    const VectorXd& x = traj.states[k];
    bool fused = false;
    for (std::size_t p = 0; p < plan.size(); ++p) {
      if (out.diverged[p]) continue;
      auto& st = states[p];
      try {
        predicted.clear();
        for (std::size_t r = 0; r < st.size(); ++r) {
          predicted.push_back(predict(model, st[r], k));
          if (detail::diverged(predicted.back().estimate)) throw NumericalError("diverged");
          out.sq_error[p](r, k - 1) = (predicted.back().estimate - x).squaredNorm();
        }
        switch (plan[p].filter) {
          case FilterKind::CKF:
            st[0] = ckf_correct(model, info, predicted[0], y, k);
            break;
          case FilterKind::CMDF: {
            if (!fused) {
              rounds.assign(1, initial_fusion_products(model, info, y, k));
              for (std::size_t h = 1; h <= max_cmdf_L; ++h) rounds.push_back(fuse(s.weights, rounds.back(), 1));
              fused = true;
            }
            const auto& prod = rounds[plan[p].L];
            for (std::size_t r = 0; r < N; ++r) {
              st[r] = detail::information_update(predicted[r], prod[r].S, prod[r].I);
            }
            break;
          }
          case FilterKind::CIDF:
            st = cidf_correct(model, info, s.weights, plan[p].L, predicted, y, k);
            break;
        }
        for (const auto& node : st) {
          if (detail::diverged(node.estimate)) throw NumericalError("diverged");
        }
      } catch (const NumericalError&) {
        out.diverged[p] = true;
      }
    }
  }
  return out;
}

namespace detail {

// Sum of a list of matrices by recursive halving, in index order.
inline MatrixXd pairwise_sum(const std::vector<MatrixXd>& parts, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return parts[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(parts, lo, mid) + pairwise_sum(parts, mid, hi);
}

inline double pairwise_sum(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  if (hi <= lo) return 0.0;
  if (hi - lo == 1) return v[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

inline constexpr std::size_t kTrialBlock = 16;

}  // namespace detail

/// Theory curves and steady-state averages for every series of a scenario.
inline void attach_theory(const Scenario& s, const SensorInformation& info, TrialResults& res) {
  const PlantModel& model = s.plant;
  const std::size_t N = model.N();
  const VectorXd e0 = s.true_initial_state() - s.estimate_init();
  const MatrixXd error_init = e0 * e0.transpose();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  auto curve = [&](const VectorXd& scale) {
    const auto rec = covariance_recursion(model, info, scale, s.horizon, s.covariance_init(), error_init);
    Eigen::RowVectorXd row(s.horizon);
    for (std::size_t k = 0; k < s.horizon; ++k) row(k) = rec.error[k].trace();
    return row;
  };

  parallel_for(res.series.size(), [&](std::size_t idx) {
    auto& sr = res.series[idx];
    const Eigen::Index rows = sr.rows();
    sr.theory = MatrixXd::Constant(rows, s.horizon, nan);
    sr.theory_avg = VectorXd::Constant(rows, nan);
    sr.rate = VectorXd::Constant(rows, nan);
    if (sr.filter == FilterKind::CKF) {
      sr.theory.row(0) = curve(VectorXd::Ones(N));
      sr.theory_avg(0) = res.centralized_avg;
    } else if (sr.filter == FilterKind::CMDF) {
      const auto power = weight_power(s.weights, sr.L);
      for (std::size_t i = 0; i < N; ++i) {
        sr.theory.row(i) = curve(fusion_scale(power, i));
        try {
          sr.theory_avg(i) = average_performance(node_theory(model, power, i).error);
        } catch (const ObservabilityError&) {
          // No steady state exists for this node at this L.
        }
      }
    }
  });

  for (auto& sr : res.series) {
    if (sr.filter != FilterKind::CMDF) continue;
    const SeriesResult* next = res.find(FilterKind::CMDF, sr.L + 1);
    if (!next) continue;
    for (Eigen::Index i = 0; i < sr.rows(); ++i) {
      const double here = sr.theory_avg(i) - res.centralized_avg;
      const double there = next->theory_avg(i) - res.centralized_avg;
      if (std::isfinite(here) && std::isfinite(there) && std::abs(here) > 1e-12) sr.rate(i) = there / here;
    }
  }
}

/// Empirical MSE per (series, sensor, step) over all trials, plus theory.
/// A trial whose estimate leaves the 1e9 ball (or turns nonfinite) is
/// dropped from that series and recorded; more than 1% of such trials in
/// any series aborts the run.
inline TrialResults run_monte_carlo(const Scenario& s) {
  const auto t0 = std::chrono::steady_clock::now();
  s.validate();
  const auto plan = detail::series_plan(s);
  const SensorInformation info(s.plant);
  const std::size_t K = s.horizon;
  const std::size_t begin = s.steady_begin();
  const std::size_t window = K - begin + 1;

  TrialResults res;
  res.trials = s.trials;
  res.horizon = K;
  res.period = s.plant.period();
  res.steady_begin = begin;
  res.seed = s.seed;
  res.sigma2 = spectral_diagnostics(s.weights).sigma2;
  res.diameter = diameter(s.graph);
  res.centralized_avg = average_performance(centralized_dpre(s.plant));

  // Per-block sums of squared errors, per-trial steady values and flags.
  const std::size_t blocks = (s.trials + detail::kTrialBlock - 1) / detail::kTrialBlock;
  std::vector<std::vector<MatrixXd>> block_sum(plan.size(), std::vector<MatrixXd>(blocks));
  std::vector<std::vector<VectorXd>> steady(plan.size(), std::vector<VectorXd>(s.trials));
  std::vector<std::vector<char>> bad(plan.size(), std::vector<char>(s.trials, 0));

  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t lo = b * detail::kTrialBlock;
    const std::size_t hi = std::min(s.trials, lo + detail::kTrialBlock);
    for (std::size_t t = lo; t < hi; ++t) {
      const auto te = run_trial(s, info, trial_seed(s.seed, t));
      for (std::size_t p = 0; p < plan.size(); ++p) {
        if (block_sum[p][b].size() == 0) block_sum[p][b] = MatrixXd::Zero(te.sq_error[p].rows(), K);
        if (te.diverged[p]) {
          bad[p][t] = 1;
          continue;
        }
        block_sum[p][b] += te.sq_error[p];
        steady[p][t] = te.sq_error[p].rightCols(window).rowwise().mean();
      }
    }
  });

  for (std::size_t p = 0; p < plan.size(); ++p) {
    SeriesResult sr;
    sr.filter = plan[p].filter;
    sr.L = plan[p].L;
    for (std::size_t t = 0; t < s.trials; ++t) {
      if (bad[p][t]) sr.diverged_trials.push_back(t);
    }
    if (sr.diverged_trials.size() * 100 > s.trials) {
      throw NumericalError(sr.label() + ": " + std::to_string(sr.diverged_trials.size()) + " of " +
                           std::to_string(s.trials) + " trials diverged (first: trial " +
                           std::to_string(sr.diverged_trials.front()) + ")");
    }
    const double used = static_cast<double>(s.trials - sr.diverged_trials.size());
    sr.mse = detail::pairwise_sum(block_sum[p], 0, blocks) / used;
    sr.mse_steady = sr.mse.rightCols(window).rowwise().mean();

    const Eigen::Index rows = sr.mse.rows();
    sr.mse_steady_se = VectorXd::Zero(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      std::vector<double> dev;
      dev.reserve(s.trials);
      for (std::size_t t = 0; t < s.trials; ++t) {
        if (bad[p][t]) continue;
        const double d = steady[p][t](r) - sr.mse_steady(r);
        dev.push_back(d * d);
      }
      const double var = used > 1 ? detail::pairwise_sum(dev, 0, dev.size()) / (used - 1.0) : 0.0;
      sr.mse_steady_se(r) = std::sqrt(var / used);
    }
    res.series.push_back(std::move(sr));
  }

  attach_theory(s, info, res);
  res.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

struct CidfComparison {
  struct Row {
    std::size_t sensor = 0;  // 0-based
    std::size_t L = 0;
    double mse_cmdf = 0.0, se_cmdf = 0.0;
    double mse_cidf = 0.0, se_cidf = 0.0;
  };
  std::vector<Row> rows;
  std::vector<std::optional<std::size_t>> crossover;  // per sensor
  std::optional<std::size_t> observing_crossover;     // over sensors with nonzero C
};

/// Smallest L in the sweep from which CMDF's steady MSE stays below CIDF's.
inline CidfComparison compare_cidf(const Scenario& s, const TrialResults& res) {
  if (!s.has(FilterKind::CMDF) || !s.has(FilterKind::CIDF)) {
    throw ValidationError("comparison needs both CMDF and CIDF");
  }
  auto Ls = s.L_values;
  std::sort(Ls.begin(), Ls.end());
  Ls.erase(std::unique(Ls.begin(), Ls.end()), Ls.end());
  const std::size_t N = s.plant.N();

  CidfComparison cmp;
  cmp.crossover.assign(N, std::nullopt);
  std::vector<std::vector<bool>> better(N);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t L : Ls) {
      const auto* a = res.find(FilterKind::CMDF, L);
      const auto* b = res.find(FilterKind::CIDF, L);
      if (!a || !b) throw ValidationError("results do not contain L=" + std::to_string(L));
      cmp.rows.push_back({i, L, a->mse_steady(i), a->mse_steady_se(i), b->mse_steady(i), b->mse_steady_se(i)});
      better[i].push_back(a->mse_steady(i) < b->mse_steady(i));
    }
  }

  auto crossover_of = [&](const std::vector<std::size_t>& sensors) -> std::optional<std::size_t> {
    std::optional<std::size_t> found;
    for (std::size_t j = Ls.size(); j-- > 0;) {
      bool all = true;
      for (std::size_t i : sensors) all = all && better[i][j];
      if (!all) break;
      found = Ls[j];
    }
    return found;
  };

  std::vector<std::size_t> observing;
  for (std::size_t i = 0; i < N; ++i) {
    cmp.crossover[i] = crossover_of({i});
    bool sees = false;
    for (std::size_t k = 0; k < s.plant.period(); ++k) sees = sees || !s.plant.sensor(i).C[k].isZero(0.0);
    if (sees) observing.push_back(i);
  }
  if (!observing.empty()) cmp.observing_crossover = crossover_of(observing);
  return cmp;
}

inline CidfComparison compare_cidf(Scenario s) {
  if (!s.has(FilterKind::CMDF)) s.filters.push_back(FilterKind::CMDF);
  if (!s.has(FilterKind::CIDF)) s.filters.push_back(FilterKind::CIDF);
  return compare_cidf(s, run_monte_carlo(s));
}

}  // namespace filterlab
