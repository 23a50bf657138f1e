// Copyright 2026 The mfpg Authors
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

// Vectorization algebra linking matrices and quadratic forms to the flat
// regression coordinates used by the estimators.
//
//   vec(M)   column stacking, index j*rows + i holds M(i, j)
//   vecv(v)  quadratic monomials [v1^2, v1 v2, .., v1 vn, v2^2, .., vn^2]
//   vecs(P)  upper triangle of a symmetric P, off-diagonals doubled
//
// so that dot(vecs(P), vecv(v)) = v'Pv and dot(kron(x, e), vec(M)) = e'Mx.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>

#include "mfpg/error.hpp"

namespace mfpg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kSymmetryTolerance = 1e-12;

/// Number of free entries of an n x n symmetric matrix.
constexpr Index triangular_size(Index n) { return n * (n + 1) / 2; }

/// Inverse of triangular_size; throws DimensionError when len is not n(n+1)/2.
inline Index triangular_root(Index len) {
  if (len < 0) throw DimensionError("negative length");
  const auto n = static_cast<Index>(std::llround((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0));
  if (triangular_size(n) != len) {
    throw DimensionError("length " + std::to_string(len) + " is not a triangular number");
  }
  return n;
}

template <class Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& m, double rel_tol = kSymmetryTolerance) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

/// Checks symmetry to the relative tolerance and returns (M + M')/2.
template <class Derived>
Matrix symmetrized(const Eigen::MatrixBase<Derived>& m, const char* what = "matrix") {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + " must be square");
  }
  if (!is_symmetric(m)) {
    throw SymmetryError(std::string(what) + " is not symmetric");
  }
  return (m + m.transpose()) / 2.0;
}

template <class Derived>
Vector vec(const Eigen::MatrixBase<Derived>& m) {
  Vector out(m.size());
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) out(j * m.rows() + i) = m(i, j);
  }
  return out;
}

template <class Derived>
Matrix unvec(const Eigen::MatrixBase<Derived>& v, Index rows, Index cols) {
  if (rows < 0 || cols < 0 || v.size() != rows * cols) {
    throw DimensionError("unvec: length " + std::to_string(v.size()) + " != " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) out(i, j) = v(j * rows + i);
  }
  return out;
}

template <class Derived>
Vector vecv(const Eigen::MatrixBase<Derived>& v) {
  const Index n = v.size();
  Vector out(triangular_size(n));
  Index k = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) out(k++) = v(i) * v(j);
  }
  return out;
}

template <class Derived>
Vector vecs(const Eigen::MatrixBase<Derived>& p) {
  const Matrix s = symmetrized(p, "vecs input");
  const Index n = s.rows();
  Vector out(triangular_size(n));
  Index k = 0;
  for (Index i = 0; i < n; ++i) {
    out(k++) = s(i, i);
    for (Index j = i + 1; j < n; ++j) out(k++) = 2.0 * s(i, j);
  }
  return out;
}

template <class Derived>
Matrix unvecs(const Eigen::MatrixBase<Derived>& v) {
  const Index n = triangular_root(v.size());
  Matrix out(n, n);
  Index k = 0;
  for (Index i = 0; i < n; ++i) {
    out(i, i) = v(k++);
    for (Index j = i + 1; j < n; ++j) {
      out(i, j) = out(j, i) = v(k++) / 2.0;
    }
  }
  return out;
}

/// Block i (length y.size()) of the result is x(i) * y.
template <class DerivedX, class DerivedY>
Vector kron(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
  const Index n = y.size();
  Vector out(x.size() * n);
  for (Index i = 0; i < x.size(); ++i) out.segment(i * n, n) = x(i) * y;
  return out;
}

/// Length of the stacked parameter [vec(B'PA); vecs(B'PB); vecs(P)].
constexpr Index parameter_dimension(Index nx, Index nu) {
  return nu * nx + triangular_size(nu) + triangular_size(nx);
}

}  // namespace mfpg
