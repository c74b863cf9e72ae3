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

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

#include "filterlab/errors.hpp"

namespace filterlab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace linalg {

// Largest singular value.
inline double spectral_norm(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  Eigen::JacobiSVD<MatrixXd> svd(m);
  return svd.singularValues()(0);
}

// Spectral norm of a symmetric matrix via its eigenvalues.
inline double symmetric_norm(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double spectral_radius(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<MatrixXd> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline MatrixXd symmetrized(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

inline double asymmetry(const MatrixXd& m) {
  return m.size() == 0 ? 0.0 : (m - m.transpose()).cwiseAbs().maxCoeff();
}

// Eigenvalues of the symmetric part, ascending.
inline VectorXd symmetric_eigenvalues(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double min_eigenvalue(const MatrixXd& m) { return symmetric_eigenvalues(m)(0); }

inline double max_eigenvalue(const MatrixXd& m) {
  const VectorXd ev = symmetric_eigenvalues(m);
  return ev(ev.size() - 1);
}

inline bool is_symmetric_positive_definite(const MatrixXd& m, double eig_floor = 1e-12,
                                           double sym_tol = 1e-10) {
  if (m.rows() != m.cols() || m.size() == 0) return false;
  if (!m.allFinite()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (asymmetry(m) > sym_tol * scale) return false;
  return min_eigenvalue(m) > eig_floor;
}

// Inverse of a symmetric positive-definite matrix through its Cholesky factor.
// Throws NumericalError when the factorization fails.
inline MatrixXd spd_inverse(const MatrixXd& m, const char* what = "matrix") {
  const Eigen::Index n = m.rows();
  if (n == 0) return MatrixXd(0, 0);
  Eigen::LLT<MatrixXd> llt(symmetrized(m));
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + " is not positive definite");
  }
  return symmetrized(llt.solve(MatrixXd::Identity(n, n)));
}

// Lower Cholesky factor, used to colour white Gaussian noise.
inline MatrixXd cholesky_factor(const MatrixXd& m) {
  Eigen::LLT<MatrixXd> llt(symmetrized(m));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("covariance is not positive definite");
  }
  return llt.matrixL();
}

}  // namespace linalg
}  // namespace filterlab
