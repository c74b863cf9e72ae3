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

// Periodic Riccati and Lyapunov solvers, closed-loop and monodromy analysis,
// and the uniform observability test for periodic pairs.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "filterlab/errors.hpp"
#include "filterlab/linalg.hpp"
#include "filterlab/periodic_core.hpp"

namespace filterlab {

/// One period of a converged periodic solution P_0 .. P_{T-1}.
struct SppsSolution {
  std::vector<MatrixXd> P;
  std::size_t iterations = 0;  // full-period sweeps performed
  double residual = 0.0;       // max_k ||dP_k||_2 / max(1, ||P_k||_2) of the last sweep

  std::size_t period() const { return P.size(); }
  const MatrixXd& at(std::size_t k) const { return P[k % P.size()]; }
};

struct SolveOptions {
  double tol = 1e-10;
  std::size_t max_sweeps = 0;  // 0 selects 1e5 / period
};

namespace detail {

inline std::size_t sweep_budget(const SolveOptions& opt, std::size_t period) {
  if (opt.max_sweeps > 0) return opt.max_sweeps;
  return std::max<std::size_t>(1, 100000 / period);
}

inline double relative_change(const std::vector<MatrixXd>& prev, const std::vector<MatrixXd>& next) {
  double worst = 0.0;
  for (std::size_t k = 0; k < next.size(); ++k) {
    const double scale = std::max(1.0, linalg::symmetric_norm(next[k]));
    worst = std::max(worst, linalg::symmetric_norm(next[k] - prev[k]) / scale);
  }
  return worst;
}

// Once the tolerance is met, keep sweeping while the change still shrinks,
// down to rounding level. Bounded by the sweeps already spent, so at most
// doubles the cost; the stored residual is the last change observed.
template <typename Step>
SppsSolution polish(SppsSolution sol, Step&& step, std::size_t budget) {
  const std::size_t T = sol.P.size();
  const std::size_t extra = std::min(sol.iterations, budget);
  std::vector<MatrixXd> next(T);
  for (std::size_t s = 0; s < extra && sol.residual > 1e-15; ++s) {
    MatrixXd P = sol.P[0];
    for (std::size_t k = 0; k < T; ++k) {
      P = step(k, P);
      next[(k + 1) % T] = P;
    }
    const double change = relative_change(sol.P, next);
    if (!(change < sol.residual)) break;
    sol.P = next;
    sol.residual = change;
    ++sol.iterations;
  }
  return sol;
}

}  // namespace detail

/// One step of the filter Riccati recursion
///   P+ = A P A' + Q - A P C' (C P C' + R)^{-1} C P A'.
inline MatrixXd riccati_step(const MatrixXd& A, const MatrixXd& C, const MatrixXd& Q,
                             const MatrixXd& R, const MatrixXd& P) {
  MatrixXd next = A * P * A.transpose() + Q;
  if (C.rows() > 0) {
    const MatrixXd S = C * P * C.transpose() + R;
    Eigen::LLT<MatrixXd> llt(linalg::symmetrized(S));
    if (llt.info() != Eigen::Success) throw NumericalError("singular innovation covariance");
    const MatrixXd APC = A * P * C.transpose();
    next -= APC * llt.solve(APC.transpose());
  }
  return linalg::symmetrized(next);
}

/// Periodic solution of the filter Riccati equation, obtained by running the
/// recursion forward from P0 until a full period moves by less than tol.
inline SppsSolution dpre_spps(const PeriodicSequence& A, const PeriodicSequence& C,
                              const PeriodicSequence& Q, const PeriodicSequence& R,
                              std::optional<MatrixXd> P0 = std::nullopt, SolveOptions opt = {}) {
  const auto seqs = normalize_period({A, C, Q, R});
  const auto& a = seqs[0];
  const auto& c = seqs[1];
  const auto& q = seqs[2];
  const auto& r = seqs[3];
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n || c.cols() != n || r.rows() != c.rows() ||
      r.cols() != c.rows()) {
    throw ValidationError("inconsistent Riccati dimensions");
  }
  const MatrixXd start = P0.value_or(MatrixXd::Identity(n, n));
  if (start.rows() != n || start.cols() != n) throw ValidationError("P0 has the wrong shape");

  const std::size_t T = a.period();
  const std::size_t budget = detail::sweep_budget(opt, T);
  auto step = [&](std::size_t k, const MatrixXd& X) { return riccati_step(a[k], c[k], q[k], r[k], X); };
  std::vector<MatrixXd> prev, next(T);
  MatrixXd P = linalg::symmetrized(start);
  for (std::size_t sweep = 1; sweep <= budget; ++sweep) {
    for (std::size_t k = 0; k < T; ++k) {
      P = step(k, P);
      if (!P.allFinite()) throw NumericalError("Riccati iterate became nonfinite");
      next[(k + 1) % T] = P;
    }
    if (!prev.empty()) {
      const double change = detail::relative_change(prev, next);
      if (change < opt.tol) return detail::polish(SppsSolution{next, sweep, change}, step, budget);
    }
    prev = next;
  }
  throw ConvergenceError("periodic Riccati iteration did not converge within " +
                         std::to_string(budget) + " sweeps");
}

// Ordered product seq[k+T-1] ... seq[k]: the transition over one period from k.
inline MatrixXd period_product(const PeriodicSequence& seq, std::size_t k) {
  MatrixXd phi = MatrixXd::Identity(seq.rows(), seq.cols());
  for (std::size_t j = 0; j < seq.period(); ++j) phi = seq[k + j] * phi;
  return phi;
}

/// Periodic solution of P_{k+1} = Abar_k P_k Abar_k' + Qbar_k.
/// The anchor value solves the lifted Stein equation P = Phi P Phi' + W
/// directly; forward sweeps then polish it down to tol.
inline SppsSolution dple_spps(const PeriodicSequence& Abar, const PeriodicSequence& Qbar,
                              SolveOptions opt = {}) {
  const auto seqs = normalize_period({Abar, Qbar});
  const auto& a = seqs[0];
  const auto& q = seqs[1];
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n) {
    throw ValidationError("inconsistent Lyapunov dimensions");
  }
  const std::size_t T = a.period();

  const MatrixXd phi = period_product(a, 0);
  if (linalg::spectral_radius(phi) >= 1.0 - 1e-9) {
    throw NumericalError("monodromy matrix is not Schur stable");
  }

  MatrixXd W = MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < T; ++k) W = a[k] * W * a[k].transpose() + q[k];

  // (I - phi (x) phi) vec(P) = vec(W), column-major vec.
  const Eigen::Index n2 = n * n;
  MatrixXd lifted = MatrixXd::Identity(n2, n2);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index b = 0; b < n; ++b)
        for (Eigen::Index c = 0; c < n; ++c) lifted(i + n * j, c + n * b) -= phi(i, c) * phi(j, b);
  const VectorXd vecW = Eigen::Map<const VectorXd>(W.data(), n2);
  const VectorXd vecP = lifted.partialPivLu().solve(vecW);
  MatrixXd P = linalg::symmetrized(Eigen::Map<const MatrixXd>(vecP.data(), n, n));

  std::vector<MatrixXd> prev(T), next(T);
  prev[0] = P;
  for (std::size_t k = 0; k + 1 < T; ++k) {
    P = linalg::symmetrized(a[k] * P * a[k].transpose() + q[k]);
    prev[k + 1] = P;
  }
  P = linalg::symmetrized(a[T - 1] * P * a[T - 1].transpose() + q[T - 1]);

  const std::size_t budget = detail::sweep_budget(opt, T);
  for (std::size_t sweep = 1; sweep <= budget; ++sweep) {
    for (std::size_t k = 0; k < T; ++k) {
      next[k] = P;
      P = linalg::symmetrized(a[k] * P * a[k].transpose() + q[k]);
    }
    const double change = detail::relative_change(prev, next);
    if (change < opt.tol) return SppsSolution{next, sweep, change};
    prev = next;
  }
  throw ConvergenceError("periodic Lyapunov iteration did not converge");
}

struct ClosedLoop {
  MatrixXd K;       // A P C' (C P C' + R)^{-1}
  MatrixXd Atilde;  // A - K C
};

inline ClosedLoop closed_loop(const MatrixXd& A, const MatrixXd& C, const MatrixXd& R,
                              const MatrixXd& P) {
  if (C.rows() == 0) return {MatrixXd::Zero(A.rows(), 0), A};
  const MatrixXd S = C * P * C.transpose() + R;
  Eigen::LLT<MatrixXd> llt(linalg::symmetrized(S));
  if (llt.info() != Eigen::Success) throw NumericalError("singular innovation covariance");
  const MatrixXd K = llt.solve(C * P.transpose() * A.transpose()).transpose();
  return {K, A - K * C};
}

// Closed-loop matrices and gains along one period of a Riccati solution.
struct ClosedLoopSequence {
  PeriodicSequence Atilde;
  PeriodicSequence K;
};

inline ClosedLoopSequence closed_loop_sequence(const PeriodicSequence& A, const PeriodicSequence& C,
                                               const PeriodicSequence& R, const SppsSolution& sol) {
  std::vector<MatrixXd> at, ks;
  for (std::size_t k = 0; k < sol.period(); ++k) {
    auto cl = closed_loop(A[k], C[k], R[k], sol.at(k));
    at.push_back(std::move(cl.Atilde));
    ks.push_back(std::move(cl.K));
  }
  return {PeriodicSequence(std::move(at)), PeriodicSequence(std::move(ks))};
}

struct MonodromyReport {
  MatrixXd phi;
  double spectral_radius = 0.0;
  double norm2 = 0.0;
  double rho_bound = std::numeric_limits<double>::quiet_NaN();
  double norm_bound = std::numeric_limits<double>::quiet_NaN();

  bool within_bounds(double slack = 1e-9) const {
    return spectral_radius <= rho_bound + slack && norm2 <= norm_bound * (1.0 + slack) + slack;
  }
};

/// Transition of the closed loop over one period starting at time k.
inline MonodromyReport monodromy(const PeriodicSequence& Atilde, std::size_t k) {
  MonodromyReport rep;
  rep.phi = period_product(Atilde, k);
  rep.spectral_radius = linalg::spectral_radius(rep.phi);
  rep.norm2 = linalg::spectral_norm(rep.phi);
  return rep;
}

struct MonodromyBounds {
  double rho_bound = 0.0;   // sqrt(1 - lmin(Q)/lmax(P))
  double norm_bound = 0.0;  // sqrt(lmax(P)/lmin(Q))
};

inline MonodromyBounds lemma7_bounds(const SppsSolution& sol, const PeriodicSequence& Q) {
  double qmin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < Q.period(); ++k) qmin = std::min(qmin, linalg::min_eigenvalue(Q[k]));
  if (!(qmin > 0.0)) throw ValidationError("lambda_min(Q) must be positive");
  double pmax = 0.0;
  for (const auto& P : sol.P) pmax = std::max(pmax, linalg::max_eigenvalue(P));
  return {std::sqrt(std::max(0.0, 1.0 - qmin / pmax)), std::sqrt(pmax / qmin)};
}

/// Monodromy reports at every anchor of the period with the bounds attached.
inline std::vector<MonodromyReport> lemma7_check(const PeriodicSequence& A, const PeriodicSequence& C,
                                                 const PeriodicSequence& Q, const PeriodicSequence& R,
                                                 const SppsSolution& sol) {
  const auto bounds = lemma7_bounds(sol, Q);
  const auto loop = closed_loop_sequence(A, C, R, sol);
  std::vector<MonodromyReport> out;
  for (std::size_t k = 0; k < sol.period(); ++k) {
    auto rep = monodromy(loop.Atilde, k);
    rep.rho_bound = bounds.rho_bound;
    rep.norm_bound = bounds.norm_bound;
    out.push_back(std::move(rep));
  }
  return out;
}

/// Upper bound on ||A^k||_2 from the norm and spectral radius of A:
/// sqrt(n) sum_j C(n-1, j) C(k, j) ||A||^j rho(A)^(k-j), j < n.
inline double power_norm_bound(const MatrixXd& A, std::size_t k) {
  const auto n = static_cast<std::size_t>(A.rows());
  const double norm = linalg::spectral_norm(A);
  const double rho = linalg::spectral_radius(A);
  double total = 0.0;
  double binom_n = 1.0;  // C(n-1, j)
  double binom_k = 1.0;  // C(k, j)
  for (std::size_t j = 0; j < n && j <= k; ++j) {
    total += binom_n * binom_k * std::pow(norm, static_cast<double>(j)) *
             std::pow(rho, static_cast<double>(k - j));
    binom_n = binom_n * static_cast<double>(n - 1 - j) / static_cast<double>(j + 1);
    binom_k = binom_k * static_cast<double>(k - j) / static_cast<double>(j + 1);
  }
  return std::sqrt(static_cast<double>(n)) * total;
}

/// Observability Gramian over n*T steps from anchor k:
/// sum_j Phi(k+j,k)' C_{k+j}' C_{k+j} Phi(k+j,k).
inline MatrixXd observability_gramian(const PeriodicSequence& A, const PeriodicSequence& C,
                                      std::size_t k) {
  const Eigen::Index n = A.rows();
  const std::size_t T = std::lcm(A.period(), C.period());
  const std::size_t window = static_cast<std::size_t>(n) * T;
  MatrixXd gram = MatrixXd::Zero(n, n);
  MatrixXd phi = MatrixXd::Identity(n, n);
  for (std::size_t j = 0; j < window; ++j) {
    const MatrixXd cp = C[k + j] * phi;
    gram.noalias() += cp.transpose() * cp;
    phi = A[k + j] * phi;
  }
  return linalg::symmetrized(gram);
}

inline Eigen::Index numerical_rank(const MatrixXd& m, double rel = 1e-9) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const VectorXd& s = svd.singularValues();
  if (s(0) <= 0.0) return 0;
  return (s.array() > rel * s(0)).count();
}

/// Gramian-rank test at every anchor of the period.
inline bool uniform_observability(const PeriodicSequence& A, const PeriodicSequence& C) {
  if (A.rows() != A.cols() || C.cols() != A.rows()) {
    throw ValidationError("inconsistent dimensions in observability test");
  }
  const std::size_t T = std::lcm(A.period(), C.period());
  for (std::size_t k = 0; k < T; ++k) {
    if (numerical_rank(observability_gramian(A, C, k)) < A.rows()) return false;
  }
  return true;
}

// Max over the period of ||f_k(P_k) - P_{k+1}||_2 for the Riccati map f_k.
inline double dpre_defect(const PeriodicSequence& A, const PeriodicSequence& C,
                          const PeriodicSequence& Q, const PeriodicSequence& R,
                          const SppsSolution& sol) {
  double worst = 0.0;
  for (std::size_t k = 0; k < sol.period(); ++k) {
    const MatrixXd next = riccati_step(A[k], C[k], Q[k], R[k], sol.at(k));
    worst = std::max(worst, linalg::symmetric_norm(next - sol.at(k + 1)));
  }
  return worst;
}

inline double dple_defect(const PeriodicSequence& Abar, const PeriodicSequence& Qbar,
                          const SppsSolution& sol) {
  double worst = 0.0;
  for (std::size_t k = 0; k < sol.period(); ++k) {
    const MatrixXd next = Abar[k] * sol.at(k) * Abar[k].transpose() + Qbar[k];
    worst = std::max(worst, linalg::symmetric_norm(next - sol.at(k + 1)));
  }
  return worst;
}

/// Solves the Riccati equation for R1 >= R2 and reports whether the
/// solutions are ordered the same way (difference PSD up to -1e-8).
inline bool dpre_monotonicity_probe(const PeriodicSequence& A, const PeriodicSequence& C,
                                    const PeriodicSequence& Q, const PeriodicSequence& R1,
                                    const PeriodicSequence& R2, SolveOptions opt = {1e-12, 0}) {
  const std::size_t T = std::lcm(R1.period(), R2.period());
  for (std::size_t k = 0; k < T; ++k) {
    if (linalg::min_eigenvalue(R1[k] - R2[k]) < -1e-12) {
      throw ValidationError("monotonicity probe requires R1_k >= R2_k");
    }
    if (!linalg::is_symmetric_positive_definite(R2[k])) {
      throw ValidationError("monotonicity probe requires R2_k > 0");
    }
  }
  const auto p1 = dpre_spps(A, C, Q, R1, std::nullopt, opt);
  const auto p2 = dpre_spps(A, C, Q, R2, std::nullopt, opt);
  const std::size_t period = std::max(p1.period(), p2.period());
  for (std::size_t k = 0; k < period; ++k) {
    if (linalg::min_eigenvalue(p1.at(k) - p2.at(k)) < -1e-8) return false;
  }
  return true;
}

}  // namespace filterlab
