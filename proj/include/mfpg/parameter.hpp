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

#include <string>
#include <utility>

#include "mfpg/error.hpp"
#include "mfpg/tensorops.hpp"

namespace mfpg {

// Stacked unknown of the Bellman regression,
//   xi = [vec(B'PA); vecs(B'PB); vecs(P)],
// with the block dimensions needed to unpack it.
class ParameterVector {
 public:
  ParameterVector() = default;
  ParameterVector(Vector coords, Index nx, Index nu) : coords_(std::move(coords)), nx_(nx), nu_(nu) {
    if (nx < 1 || nu < 0) throw DimensionError("ParameterVector: bad dimensions");
    if (coords_.size() != parameter_dimension(nx, nu)) {
      throw DimensionError("ParameterVector: length " + std::to_string(coords_.size()) +
                           " does not match n_x=" + std::to_string(nx) + ", n_u=" + std::to_string(nu));
    }
  }

  static ParameterVector zero(Index nx, Index nu) {
    return {Vector::Zero(parameter_dimension(nx, nu)), nx, nu};
  }

  static ParameterVector pack(const Matrix& bt_p_a, const Matrix& bt_p_b, const Matrix& p) {
    const Index nu = bt_p_a.rows(), nx = bt_p_a.cols();
    if (bt_p_b.rows() != nu || bt_p_b.cols() != nu || p.rows() != nx || p.cols() != nx) {
      throw DimensionError("ParameterVector::pack: inconsistent block shapes");
    }
    Vector v(parameter_dimension(nx, nu));
    v << vec(bt_p_a), vecs(bt_p_b), vecs(p);
    return {std::move(v), nx, nu};
  }

  const Vector& coords() const { return coords_; }
  Vector& coords() { return coords_; }
  Index nx() const { return nx_; }
  Index nu() const { return nu_; }
  Index size() const { return coords_.size(); }

  auto cross_block() const { return coords_.segment(0, nu_ * nx_); }
  auto input_block() const { return coords_.segment(nu_ * nx_, triangular_size(nu_)); }
  auto value_block() const { return coords_.tail(triangular_size(nx_)); }

  Matrix bt_p_a() const { return unvec(cross_block(), nu_, nx_); }
  Matrix bt_p_b() const { return unvecs(input_block()); }
  Matrix p() const { return unvecs(value_block()); }

 private:
  Vector coords_;
  Index nx_ = 0;
  Index nu_ = 0;
};

struct UnpackedXi {
  Matrix bt_p_a;  // n_u x n_x
  Matrix bt_p_b;  // n_u x n_u, symmetric
  Matrix p;       // n_x x n_x, symmetric
};

inline UnpackedXi unpack_xi(const Vector& xi, Index nx, Index nu) {
  const ParameterVector pv(xi, nx, nu);
  return {pv.bt_p_a(), pv.bt_p_b(), pv.p()};
}

inline UnpackedXi unpack_xi(const ParameterVector& xi) { return unpack_xi(xi.coords(), xi.nx(), xi.nu()); }

}  // namespace mfpg
