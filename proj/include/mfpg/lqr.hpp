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

// Exact model-based LQR machinery: stability, Lyapunov and Riccati solvers,
// average cost and its gradient, the noise-lift vector and the exact
// regression oracles (xi_K, Gamma) used to validate the estimators.

#include <cmath>
#include <string>
#include <utility>

#include "mfpg/error.hpp"
#include "mfpg/linalg.hpp"
#include "mfpg/parameter.hpp"
#include "mfpg/tensorops.hpp"

namespace mfpg {

inline constexpr double kStabilityMargin = 1e-9;
inline constexpr int kSolverIterationCap = 100000;
inline constexpr double kSolverInternalTolerance = 1e-12;
inline constexpr double kSolverAcceptTolerance = 1e-10;

/// x+ = A x + B u + w, w ~ N(0, sigma_w).
struct LinearSystem {
  Matrix A;
  Matrix B;
  Matrix sigma_w;

  LinearSystem() = default;
  LinearSystem(Matrix a, Matrix b, Matrix sw) : A(std::move(a)), B(std::move(b)) {
    if (A.rows() != A.cols() || A.rows() < 1) throw DimensionError("A must be square and nonempty");
    if (B.rows() != A.rows()) throw DimensionError("B must have as many rows as A");
    if (sw.rows() != A.rows() || sw.cols() != A.rows()) throw DimensionError("sigma_w must be n_x x n_x");
    sigma_w = symmetrized(sw, "sigma_w");
    const double scale = std::max(1.0, sigma_w.cwiseAbs().maxCoeff());
    if (min_eigenvalue(sigma_w) < -1e-12 * scale) throw DomainError("sigma_w is not positive semidefinite");
  }

  Index nx() const { return A.rows(); }
  Index nu() const { return B.cols(); }
};

/// Stage cost x'Qx + u'Ru with Q, R positive definite.
struct CostWeights {
  Matrix Q;
  Matrix R;

  CostWeights() = default;
  CostWeights(const Matrix& q, const Matrix& r) : Q(symmetrized(q, "Q")), R(symmetrized(r, "R")) {
    if (min_eigenvalue(Q) <= 0.0) throw DomainError("Q must be positive definite");
    if (min_eigenvalue(R) <= 0.0) throw DomainError("R must be positive definite");
  }
};

/// State feedback u = K x.
struct Policy {
  Matrix K;

  Policy() = default;
  explicit Policy(Matrix k) : K(std::move(k)) {}
};

inline void check_dims(const LinearSystem& sys, const CostWeights& w) {
  if (w.Q.rows() != sys.nx() || w.R.rows() != sys.nu()) {
    throw DimensionError("cost weights do not match system dimensions");
  }
}

inline void check_dims(const LinearSystem& sys, const Policy& pol) {
  if (pol.K.rows() != sys.nu() || pol.K.cols() != sys.nx()) {
    throw DimensionError("gain must be n_u x n_x");
  }
}

inline Matrix closed_loop(const LinearSystem& sys, const Policy& pol) {
  check_dims(sys, pol);
  return sys.A + sys.B * pol.K;
}

/// Q + K'RK.
inline Matrix policy_state_weight(const CostWeights& w, const Policy& pol) {
  return w.Q + pol.K.transpose() * w.R * pol.K;
}

inline bool is_stabilizing(const LinearSystem& sys, const Policy& pol) {
  return spectral_radius(closed_loop(sys, pol)) < 1.0 - kStabilityMargin;
}

inline void require_stabilizing(const LinearSystem& sys, const Policy& pol) {
  const double rho = spectral_radius(closed_loop(sys, pol));
  if (!(rho < 1.0 - kStabilityMargin)) {
    throw StabilityError("policy is not stabilizing: spectral radius of A+BK is " + std::to_string(rho));
  }
}

// Solves X = M' X M + Q for Schur-stable M. Squaring doubles the number of
// series terms per pass; a few plain fixed-point sweeps then polish the
// residual.
inline Matrix solve_stein(const Matrix& m, const Matrix& q) {
  if (m.rows() != m.cols() || q.rows() != m.rows() || q.cols() != m.cols()) {
    throw DimensionError("solve_stein: shape mismatch");
  }
  Matrix x = q;
  Matrix mk = m;
  int it = 0;
  for (; it < kSolverIterationCap; ++it) {
    const Matrix inc = mk.transpose() * x * mk;
    x += inc;
    mk = mk * mk;
    if (!x.allFinite()) throw ConvergenceError("solve_stein: iteration diverged");
    if (inc.norm() <= kSolverInternalTolerance * x.norm() * 1e-3 || mk.norm() < 1e-300) break;
  }
  auto residual = [&](const Matrix& p) { return (p - m.transpose() * p * m - q).norm(); };
  for (int polish = 0; polish < 50 && residual(x) > kSolverInternalTolerance * x.norm(); ++polish) {
    x = m.transpose() * x * m + q;
  }
  x = (x + x.transpose()) / 2.0;
  if (it >= kSolverIterationCap || residual(x) > kSolverAcceptTolerance * x.norm()) {
    throw ConvergenceError("solve_stein: residual " + std::to_string(residual(x)) + " above tolerance");
  }
  return x;
}

/// P_K = A_K' P_K A_K + Q + K'RK.
inline Matrix solve_policy_lyapunov(const LinearSystem& sys, const CostWeights& w, const Policy& pol) {
  check_dims(sys, w);
  require_stabilizing(sys, pol);
  return solve_stein(closed_loop(sys, pol), policy_state_weight(w, pol));
}

/// Sigma_K = A_K Sigma_K A_K' + sigma_w, the steady-state covariance.
inline Matrix stationary_covariance(const LinearSystem& sys, const Policy& pol) {
  require_stabilizing(sys, pol);
  return solve_stein(closed_loop(sys, pol).transpose(), sys.sigma_w);
}

struct ValueSolution {
  Matrix P;
  double cost = 0.0;
  Matrix sigma_k;
};

inline ValueSolution evaluate_policy(const LinearSystem& sys, const CostWeights& w, const Policy& pol) {
  ValueSolution out;
  out.P = solve_policy_lyapunov(sys, w, pol);
  out.sigma_k = stationary_covariance(sys, pol);
  const double by_value = (out.P * sys.sigma_w).trace();
  const double by_covariance = (policy_state_weight(w, pol) * out.sigma_k).trace();
  const double scale = std::max(std::abs(by_value), std::abs(by_covariance));
  if (std::abs(by_value - by_covariance) > 1e-9 * scale + 1e-300) {
    throw ConvergenceError("average cost self-check failed: Tr(P sigma_w)=" + std::to_string(by_value) +
                           " vs Tr(Q_K Sigma_K)=" + std::to_string(by_covariance));
  }
  out.cost = by_value;
  return out;
}

/// C(K) = Tr(P_K sigma_w), cross-checked against Tr(Q_K Sigma_K).
inline double average_cost(const LinearSystem& sys, const CostWeights& w, const Policy& pol) {
  return evaluate_policy(sys, w, pol).cost;
}

/// grad C(K) = 2 [(R + B'PB) K + B'PA] Sigma_K.
inline Matrix exact_gradient(const LinearSystem& sys, const CostWeights& w, const Policy& pol) {
  const ValueSolution v = evaluate_policy(sys, w, pol);
  const Matrix e = (w.R + sys.B.transpose() * v.P * sys.B) * pol.K + sys.B.transpose() * v.P * sys.A;
  return 2.0 * e * v.sigma_k;
}

struct DareSolution {
  Policy K;
  Matrix P;
};

inline double riccati_residual(const LinearSystem& sys, const CostWeights& w, const Matrix& p) {
  const Matrix btpa = sys.B.transpose() * p * sys.A;
  const Matrix inner = w.R + sys.B.transpose() * p * sys.B;
  const Matrix rhs = w.Q + sys.A.transpose() * p * sys.A - btpa.transpose() * inner.ldlt().solve(btpa);
  return (p - rhs).norm();
}

// Structure-preserving doubling for the discrete algebraic Riccati equation:
//   A_{k+1} = A_k (I + G_k H_k)^{-1} A_k
//   G_{k+1} = G_k + A_k (I + G_k H_k)^{-1} G_k A_k'
//   H_{k+1} = H_k + A_k' H_k (I + G_k H_k)^{-1} A_k
// starting from (A, B R^{-1} B', Q); H_k converges to P*.
inline DareSolution solve_dare(const LinearSystem& sys, const CostWeights& w) {
  check_dims(sys, w);
  const Index n = sys.nx();
  const Matrix eye = Matrix::Identity(n, n);
  Matrix ak = sys.A;
  Matrix gk = sys.B * w.R.ldlt().solve(sys.B.transpose());
  Matrix hk = w.Q;
  bool converged = false;
  for (int it = 0; it < kSolverIterationCap; ++it) {
    const Eigen::PartialPivLU<Matrix> lu(eye + gk * hk);
    const Matrix w_a = lu.solve(ak);
    const Matrix w_g = lu.solve(gk);
    const Matrix h_next = hk + ak.transpose() * hk * w_a;
    gk = gk + ak * w_g * ak.transpose();
    ak = ak * w_a;
    const double change = (h_next - hk).norm();
    hk = (h_next + h_next.transpose()) / 2.0;
    if (!hk.allFinite()) break;
    if (change <= 1e-3 * kSolverInternalTolerance * std::max(1.0, hk.norm())) {
      converged = true;
      break;
    }
  }
  if (!converged) throw StabilizabilityError("solve_dare: doubling iteration did not converge");

  Matrix p = hk;
  // Refine with a couple of Riccati fixed-point sweeps (contractive near P*).
  for (int polish = 0; polish < 20 && riccati_residual(sys, w, p) > kSolverInternalTolerance * std::max(1.0, p.norm()); ++polish) {
    const Matrix btpa = sys.B.transpose() * p * sys.A;
    const Matrix inner = w.R + sys.B.transpose() * p * sys.B;
    p = w.Q + sys.A.transpose() * p * sys.A - btpa.transpose() * inner.ldlt().solve(btpa);
    p = (p + p.transpose()) / 2.0;
  }
  const double res = riccati_residual(sys, w, p);
  if (!(res <= kSolverAcceptTolerance * std::max(1.0, p.norm()))) {
    throw StabilizabilityError("solve_dare: Riccati residual " + std::to_string(res) + " above tolerance");
  }
  const Matrix inner = w.R + sys.B.transpose() * p * sys.B;
  Policy k(-inner.ldlt().solve(sys.B.transpose() * p * sys.A));
  if (!is_stabilizing(sys, k)) throw StabilizabilityError("solve_dare: resulting gain is not stabilizing");
  return {std::move(k), std::move(p)};
}

/// W = sum_k vecv(sqrt(lambda_k) v_k) over the eigenpairs of sigma_w, so that
/// dot(vecs(P), W) = Tr(P sigma_w).
inline Vector noise_lift(const Matrix& sigma_w) {
  const SymmetricEigen eig = jacobi_eigen(sigma_w);
  const Index n = sigma_w.rows();
  const double scale = std::max(1.0, eig.values.cwiseAbs().maxCoeff());
  Vector w = Vector::Zero(triangular_size(n));
  for (Index k = 0; k < n; ++k) {
    double lambda = eig.values(k);
    if (lambda < -1e-12 * scale) throw DomainError("noise_lift: covariance is not positive semidefinite");
    lambda = std::max(lambda, 0.0);
    w += vecv(std::sqrt(lambda) * eig.vectors.col(k));
  }
  return w;
}

/// xi_K = [vec(B'P_K A); vecs(B'P_K B); vecs(P_K)].
inline ParameterVector exact_xi(const LinearSystem& sys, const CostWeights& w, const Policy& pol) {
  const Matrix p = solve_policy_lyapunov(sys, w, pol);
  const Matrix btp = sys.B.transpose() * p;
  return ParameterVector::pack(btp * sys.A, btp * sys.B, p);
}

/// c = x'(Q + K'RK)x.
inline double stage_cost(const CostWeights& w, const Policy& pol, const Vector& x) {
  return x.dot(policy_state_weight(w, pol) * x);
}

// Noise-free regressor. The conditional mean of vecv(x+) is
// vecv(Ax+Bu) + W, so the W terms cancel in the last block.
inline Vector exact_gamma(const LinearSystem& sys, const Policy& pol, const Vector& x, const Vector& u) {
  check_dims(sys, pol);
  if (x.size() != sys.nx() || u.size() != sys.nu()) throw DimensionError("exact_gamma: state/input length");
  const Vector kx = pol.K * x;
  Vector g(parameter_dimension(sys.nx(), sys.nu()));
  g << 2.0 * kron(x, u - kx), vecv(u) - vecv(kx), vecv(x) - vecv(sys.A * x + sys.B * u);
  return g;
}

struct LipschitzConstants {
  double b_k;  // bound on ||K|| over the sublevel set
  double h_c;  // local Lipschitz constant of C
};

// b_K(C) = (||B|| ||A|| C / l(Sw) + sqrt((C - C*)(||R|| + ||B||^2 C / l(Sw)) / l(Sw))) / l(R)
// h_C(C) = 6 (C / (l(Sw) l(Q)))^2 (2 b_K^2 ||R|| ||B|| + b_K ||R||) Tr(Sw)
// where l(.) is the smallest eigenvalue.
inline LipschitzConstants lipschitz_constants(const LinearSystem& sys, const CostWeights& w, double cost_at_k,
                                              double cost_at_opt) {
  const double l_r = min_eigenvalue(w.R);
  const double l_q = min_eigenvalue(w.Q);
  const double l_w = min_eigenvalue(sys.sigma_w);
  if (l_r <= 0.0 || l_w <= 0.0 || l_q <= 0.0) {
    throw DomainError("lipschitz_constants: R, Q and sigma_w must be positive definite");
  }
  if (!(cost_at_opt > 0.0) || cost_at_k < cost_at_opt) {
    throw DomainError("lipschitz_constants: need cost_at_k >= cost_at_opt > 0");
  }
  const double nb = op_norm(sys.B), na = op_norm(sys.A), nr = op_norm(w.R);
  const double c = cost_at_k;
  const double b_k =
      (nb * na * c / l_w + std::sqrt((c - cost_at_opt) * (nr + nb * nb * c / l_w) / l_w)) / l_r;
  const double ratio = c / (l_w * l_q);
  const double h_c = 6.0 * ratio * ratio * (2.0 * b_k * b_k * nr * nb + b_k * nr) * sys.sigma_w.trace();
  return {b_k, h_c};
}

}  // namespace mfpg
