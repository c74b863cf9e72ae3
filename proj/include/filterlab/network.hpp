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

// Sensor communication graphs and doubly stochastic consensus weights.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "filterlab/errors.hpp"
#include "filterlab/linalg.hpp"

namespace filterlab {

// Entries of a weight power at or below this are treated as structural zeros.
inline constexpr double kStructuralZero = 1e-12;

/// Undirected graph over nodes 0..N-1. Self loops are not stored.
class SensorGraph {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  explicit SensorGraph(std::size_t node_count) : n_(node_count), adj_(node_count) {
    if (node_count == 0) throw ValidationError("graph needs at least one node");
  }

  SensorGraph(std::size_t node_count, const std::vector<Edge>& edges) : SensorGraph(node_count) {
    for (const auto& [a, b] : edges) add_edge(a, b);
  }

  void add_edge(std::size_t a, std::size_t b) {
    if (a >= n_ || b >= n_) throw ValidationError("edge endpoint out of range");
    if (a == b) throw ValidationError("self edges are not allowed");
    const Edge e = std::minmax(a, b);
    if (edges_.insert(e).second) {
      adj_[a].push_back(b);
      adj_[b].push_back(a);
      std::sort(adj_[a].begin(), adj_[a].end());
      std::sort(adj_[b].begin(), adj_[b].end());
    }
  }

  std::size_t size() const { return n_; }
  const std::set<Edge>& edges() const { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adj_.at(i); }
  std::size_t degree(std::size_t i) const { return adj_.at(i).size(); }
  bool has_edge(std::size_t a, std::size_t b) const { return edges_.count(std::minmax(a, b)) > 0; }

  std::vector<std::array<double, 2>> positions;  // optional node coordinates

 private:
  std::size_t n_;
  std::set<Edge> edges_;
  std::vector<std::vector<std::size_t>> adj_;
};

/// Nodes uniform in [0, side]^2, an edge whenever the distance is <= radius.
inline SensorGraph random_geometric_graph(std::size_t node_count, double side, double radius,
                                          std::uint64_t seed) {
  if (node_count == 0) throw ValidationError("node count must be positive");
  if (!(radius > 0.0)) throw ValidationError("radius must be positive");
  if (!(side > 0.0)) throw ValidationError("side must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, side);
  SensorGraph g(node_count);
  for (std::size_t i = 0; i < node_count; ++i) {
    const double x = coord(rng);
    const double y = coord(rng);
    g.positions.push_back({x, y});
  }
  for (std::size_t i = 0; i < node_count; ++i) {
    for (std::size_t j = i + 1; j < node_count; ++j) {
      const double dx = g.positions[i][0] - g.positions[j][0];
      const double dy = g.positions[i][1] - g.positions[j][1];
      if (std::hypot(dx, dy) <= radius) g.add_edge(i, j);
    }
  }
  return g;
}

namespace detail {

inline std::vector<std::size_t> bfs_distances(const SensorGraph& g, std::size_t source) {
  constexpr auto unreached = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(g.size(), unreached);
  std::queue<std::size_t> frontier;
  dist[source] = 0;
  frontier.push(source);
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    for (std::size_t v : g.neighbors(u)) {
      if (dist[v] == unreached) {
        dist[v] = dist[u] + 1;
        frontier.push(v);
      }
    }
  }
  return dist;
}

}  // namespace detail

// For undirected graphs strong and weak connectivity coincide.
inline bool is_strongly_connected(const SensorGraph& g) {
  const auto dist = detail::bfs_distances(g, 0);
  return std::none_of(dist.begin(), dist.end(),
                      [](std::size_t d) { return d == std::numeric_limits<std::size_t>::max(); });
}

inline std::size_t diameter(const SensorGraph& g) {
  std::size_t d = 0;
  for (std::size_t s = 0; s < g.size(); ++s) {
    for (std::size_t v : detail::bfs_distances(g, s)) {
      if (v == std::numeric_limits<std::size_t>::max()) {
        throw ValidationError("diameter is undefined for a disconnected graph");
      }
      d = std::max(d, v);
    }
  }
  return d;
}

/// Nonnegative N x N matrix with unit row and column sums.
class ConsensusWeights {
 public:
  explicit ConsensusWeights(MatrixXd matrix) : w_(std::move(matrix)) {
    if (w_.rows() != w_.cols() || w_.rows() == 0) {
      throw ValidationError("consensus weights must be a nonempty square matrix");
    }
    if (!w_.allFinite() || (w_.array() < 0.0).any()) {
      throw ValidationError("consensus weights must be finite and nonnegative");
    }
    const double row_err = (w_.rowwise().sum().array() - 1.0).abs().maxCoeff();
    const double col_err = (w_.colwise().sum().array() - 1.0).abs().maxCoeff();
    if (row_err > 1e-12 || col_err > 1e-12) {
      throw ValidationError("consensus weights are not doubly stochastic");
    }
    build_neighbors();
  }

  // Also checks that positive off-diagonal weights sit on graph edges.
  ConsensusWeights(MatrixXd matrix, const SensorGraph& graph) : ConsensusWeights(std::move(matrix)) {
    if (static_cast<std::size_t>(w_.rows()) != graph.size()) {
      throw ValidationError("weights and graph disagree on the node count");
    }
    for (Eigen::Index i = 0; i < w_.rows(); ++i) {
      for (Eigen::Index j = 0; j < w_.cols(); ++j) {
        if (i != j && w_(i, j) > 0.0 && !graph.has_edge(i, j)) {
          throw ValidationError("positive weight on a pair that is not an edge");
        }
      }
    }
  }

  const MatrixXd& matrix() const { return w_; }
  std::size_t size() const { return static_cast<std::size_t>(w_.rows()); }
  double operator()(std::size_t i, std::size_t j) const { return w_(i, j); }

  // Nodes j with l_ij > 0, including i itself when the self weight is positive.
  const std::vector<std::size_t>& in_neighbors(std::size_t i) const { return in_neighbors_.at(i); }

 private:
  void build_neighbors() {
    in_neighbors_.assign(size(), {});
    for (std::size_t i = 0; i < size(); ++i) {
      for (std::size_t j = 0; j < size(); ++j) {
        if (w_(i, j) > 0.0) in_neighbors_[i].push_back(j);
      }
    }
  }

  MatrixXd w_;
  std::vector<std::vector<std::size_t>> in_neighbors_;
};

/// Metropolis-Hastings weights: w_ij = 1 / (1 + max(deg_i, deg_j)) on edges,
/// the diagonal takes the remainder. Symmetric, hence doubly stochastic.
inline ConsensusWeights metropolis_weights(const SensorGraph& g) {
  if (!is_strongly_connected(g)) throw ValidationError("metropolis weights need a connected graph");
  const auto n = static_cast<Eigen::Index>(g.size());
  MatrixXd w = MatrixXd::Zero(n, n);
  for (const auto& [a, b] : g.edges()) {
    const double v = 1.0 / (1.0 + static_cast<double>(std::max(g.degree(a), g.degree(b))));
    w(a, b) = v;
    w(b, a) = v;
  }
  for (Eigen::Index i = 0; i < n; ++i) w(i, i) = 1.0 - w.row(i).sum();
  return ConsensusWeights(std::move(w), g);
}

// Uniform averaging (1/N) 11^T, the complete-graph limit.
inline ConsensusWeights averaging_weights(std::size_t node_count) {
  const auto n = static_cast<Eigen::Index>(node_count);
  return ConsensusWeights(MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n)));
}

struct WeightPower {
  MatrixXd matrix;                               // L^steps
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> support;  // entry > kStructuralZero
};

inline WeightPower weight_power(const ConsensusWeights& weights, std::size_t steps) {
  const auto n = static_cast<Eigen::Index>(weights.size());
  MatrixXd p = MatrixXd::Identity(n, n);
  for (std::size_t s = 0; s < steps; ++s) p = weights.matrix() * p;
  WeightPower out{p, (p.array() > kStructuralZero).matrix()};
  return out;
}

struct SpectralDiagnostics {
  double sigma2 = 0.0;  // modulus of the second largest eigenvalue
  double M = 1.0;       // envelope constant
  double q = 0.0;       // envelope rate, ||L^k - J|| <= M q^k for k <= k_max
  std::vector<double> deviations;  // ||L^k - J||_2 for k = 0..k_max
};

namespace detail {

inline double second_eigenvalue_modulus(const MatrixXd& w) {
  if (w.rows() == 1) return 0.0;
  Eigen::EigenSolver<MatrixXd> es(w, false);
  std::vector<double> mods;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) mods.push_back(std::abs(es.eigenvalues()(i)));
  std::sort(mods.begin(), mods.end(), std::greater<>());
  return mods[1];
}

}  // namespace detail

/// Second eigenvalue modulus plus an exponential envelope fitted to the
/// consensus error. The rate q is the smallest grid value (step 1e-3) for
/// which the constant M calibrated on k <= k_max/2 also bounds every k up to
/// k_max.
inline SpectralDiagnostics spectral_diagnostics(const ConsensusWeights& weights, std::size_t k_max = 200,
                                                const SensorGraph* graph = nullptr) {
  if (graph != nullptr && !is_strongly_connected(*graph)) {
    throw ValidationError("consensus limit does not exist on a disconnected graph");
  }
  const auto n = static_cast<Eigen::Index>(weights.size());
  const MatrixXd avg = MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  {
    // Connectivity of the weight support itself.
    const WeightPower reach = weight_power(weights, weights.size());
    if (!reach.support.all()) {
      throw ValidationError("consensus limit does not exist: weight graph is not connected");
    }
  }

  SpectralDiagnostics out;
  out.sigma2 = detail::second_eigenvalue_modulus(weights.matrix());
  MatrixXd p = MatrixXd::Identity(n, n);
  for (std::size_t k = 0; k <= k_max; ++k) {
    out.deviations.push_back(linalg::spectral_norm(p - avg));
    p = weights.matrix() * p;
  }

  // Only the range where the deviation is well above rounding carries rate
  // information; beyond it every envelope fits trivially.
  constexpr double kResolvable = 1e-11;
  std::size_t last = 0;
  while (last < k_max && out.deviations[last + 1] > kResolvable) ++last;
  if (last == 0) {
    out.q = 0.0;
    out.M = std::max(out.deviations[0], 1.0);
    return out;
  }
  const std::size_t half = std::max<std::size_t>(1, last / 2);
  for (int step = 1; step <= 1000; ++step) {
    const double q = step * 1e-3;
    double M = 0.0;
    for (std::size_t k = 0; k <= half; ++k) {
      M = std::max(M, out.deviations[k] / std::pow(q, static_cast<double>(k)));
    }
    bool holds = true;
    for (std::size_t k = half + 1; k <= last && holds; ++k) {
      holds = out.deviations[k] <= M * std::pow(q, static_cast<double>(k)) * (1.0 + 1e-9);
    }
    if (holds) {
      out.q = q;
      out.M = M;
      return out;
    }
  }
  throw NumericalError("no exponential envelope with q <= 1 fits the consensus error");
}

}  // namespace filterlab
