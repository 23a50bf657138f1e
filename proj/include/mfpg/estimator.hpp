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

// Estimators for xi_K from off-policy triples:
//   * regression samples (Gamma_hat, c) built from a triple and a policy,
//   * the ordinary least-squares baseline (biased under noisy regressors),
//   * the conditional stochastic primal-dual solver and its shrinking
//     multi-epoch restart scheme,
//   * step-size schedules and the constants that drive the error bounds.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mfpg/datagen.hpp"
#include "mfpg/error.hpp"
#include "mfpg/linalg.hpp"
#include "mfpg/lqr.hpp"
#include "mfpg/parameter.hpp"
#include "mfpg/tensorops.hpp"

namespace mfpg {

struct RegressionSample {
  Vector gamma_hat;
  double c = 0.0;
};

/// Gamma_hat = [2 x (x) (u - Kx); vecv(u) - vecv(Kx); vecv(x) + W - vecv(x+)],
/// c = x'(Q + K'RK)x.
inline RegressionSample build_sample(const DataTriple& t, const Policy& pol, const CostWeights& w,
                                     const Vector& w_lift) {
  const Index nx = t.x.size(), nu = t.u.size();
  if (pol.K.rows() != nu || pol.K.cols() != nx || t.x_plus.size() != nx || w_lift.size() != triangular_size(nx) ||
      w.Q.rows() != nx || w.R.rows() != nu) {
    throw DimensionError("build_sample: inconsistent dimensions");
  }
  const Vector kx = pol.K * t.x;
  RegressionSample s;
  s.gamma_hat.resize(parameter_dimension(nx, nu));
  s.gamma_hat << 2.0 * kron(t.x, t.u - kx), vecv(t.u) - vecv(kx), vecv(t.x) + w_lift - vecv(t.x_plus);
  s.c = stage_cost(w, pol, t.x);
  return s;
}

inline std::vector<RegressionSample> build_samples(std::span<const DataTriple> triples, const Policy& pol,
                                                   const CostWeights& w, const Vector& w_lift) {
  std::vector<RegressionSample> out;
  out.reserve(triples.size());
  for (const auto& t : triples) out.push_back(build_sample(t, pol, w, w_lift));
  return out;
}

// ---------------------------------------------------------------------------
// Least squares

inline constexpr double kMaxGramCondition = 1e12;

/// Minimizes sum_k (Gamma_hat_k' xi - c_k)^2 through a QR factorization of the
/// stacked regressors.
inline ParameterVector ls_estimate(std::span<const RegressionSample> samples, Index nx, Index nu) {
  const Index d = parameter_dimension(nx, nu);
  const auto n = static_cast<Index>(samples.size());
  if (n < d) {
    throw InformativityError("ls_estimate: " + std::to_string(n) + " samples for " + std::to_string(d) +
                                 " unknowns (Gram matrix singular)",
                             0.0);
  }
  Matrix g(n, d);
  Vector c(n);
  for (Index k = 0; k < n; ++k) {
    const auto& s = samples[static_cast<std::size_t>(k)];
    if (s.gamma_hat.size() != d) throw DimensionError("ls_estimate: regressor length mismatch");
    g.row(k) = s.gamma_hat.transpose();
    c(k) = s.c;
  }
  const Eigen::BDCSVD<Matrix> svd(g);
  const Vector& sv = svd.singularValues();
  const double smin = sv(d - 1), smax = sv(0);
  if (!(smin > 0.0) || (smax / smin) * (smax / smin) > kMaxGramCondition) {
    throw InformativityError("ls_estimate: Gram matrix rank deficient or ill-conditioned (smallest singular value " +
                                 std::to_string(smin) + ")",
                             smin);
  }
  return {g.colPivHouseholderQr().solve(c), nx, nu};
}

// ---------------------------------------------------------------------------
// Feasible sets

template <class R>
concept FeasibleRegion = requires(const R& r, const Vector& v) {
  { r.project(v) } -> std::convertible_to<Vector>;
  { r.contains(v) } -> std::convertible_to<bool>;
};

struct BallSet {
  Vector center;
  double radius = 0.0;

  BallSet() = default;
  BallSet(Vector c, double r) : center(std::move(c)), radius(r) {
    if (!(radius >= 0.0)) throw DomainError("BallSet: radius must be nonnegative");
  }

  static BallSet origin(Index dim, double radius) { return {Vector::Zero(dim), radius}; }

  bool contains(const Vector& v, double tol = 1e-9) const {
    return (v - center).norm() <= radius + tol * std::max(1.0, radius);
  }

  Vector project(const Vector& v) const {
    if (v.size() != center.size()) throw DimensionError("project_ball: dimension mismatch");
    const Vector d = v - center;
    const double n = d.norm();
    if (n <= radius) return v;
    return center + d * (radius / n);
  }
};

inline Vector project_ball(const Vector& v, const BallSet& x) { return x.project(v); }

// Intersection of two balls. The projection is exact when one constraint is
// inactive; otherwise Dykstra's alternating projections are iterated.
struct BallIntersection {
  BallSet outer;
  BallSet inner;
  double tol = 1e-12;
  int max_sweeps = 1000;

  bool contains(const Vector& v, double t = 1e-9) const { return outer.contains(v, t) && inner.contains(v, t); }

  Vector project(const Vector& v) const {
    if (contains(v, 0.0)) return v;
    const Vector a = outer.project(v);
    if (inner.contains(a, 0.0)) return a;
    const Vector b = inner.project(v);
    if (outer.contains(b, 0.0)) return b;

    Vector x = v, p = Vector::Zero(v.size()), q = Vector::Zero(v.size());
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      const Vector y = outer.project(x + p);
      p = x + p - y;
      const Vector x_next = inner.project(y + q);
      q = y + q - x_next;
      const double change = (x_next - x).norm();
      x = x_next;
      if (change <= tol * std::max(1.0, x.norm()) && outer.contains(x, 1e-12)) break;
    }
    return x;
  }
};

static_assert(FeasibleRegion<BallSet>);
static_assert(FeasibleRegion<BallIntersection>);

// ---------------------------------------------------------------------------
// Conditional stochastic primal-dual

/// Per-iteration prox weights (eta, lambda) and extrapolation weights (zeta),
/// indexed from k = 1 at position 0.
struct CspdSchedule {
  std::vector<double> eta;
  std::vector<double> lambda;
  std::vector<double> zeta;

  std::size_t size() const { return std::min({eta.size(), lambda.size(), zeta.size()}); }
};

/// eta_k = lambda_k = scale * sqrt(k), zeta_k = (k-1)/k.
inline CspdSchedule sqrt_schedule(std::size_t n, double scale) {
  if (!(scale > 0.0)) throw DomainError("sqrt_schedule: scale must be positive");
  CspdSchedule s;
  for (std::size_t k = 1; k <= n; ++k) {
    const double kd = static_cast<double>(k);
    s.eta.push_back(scale * std::sqrt(kd));
    s.lambda.push_back(scale * std::sqrt(kd));
    s.zeta.push_back((kd - 1.0) / kd);
  }
  return s;
}

struct CspdResult {
  Vector xi_hat;
  double y_hat = 0.0;
};

struct NoCspdObserver {
  void operator()(std::size_t, const Vector&, double) const {}
};

// One pass over the samples, iteration k consuming sample k:
//   G_k  = xi_{k-1} + zeta_k (xi_{k-1} - xi_{k-2})
//   y_k  = clip_[-1,1](y_{k-1} + (<Gamma_hat_k, G_k> - c_k) / lambda_k)
//   xi_k = Proj_X(xi_{k-1} - (y_k / eta_k) Gamma_hat_k)
// with xi_{-1} = xi_0. Returns the k-weighted average 2/(N(N+1)) sum k (xi_k, y_k).
// The observer sees (k, xi_k, y_k) after each iteration.
template <FeasibleRegion Region, class Observer = NoCspdObserver>
CspdResult cspd(std::span<const RegressionSample> samples, const Region& feasible, const Vector& xi0, double y0,
                const CspdSchedule& sched, Observer&& observe = {}) {
  const std::size_t n = samples.size();
  if (n == 0) throw ArgumentError("cspd: no samples");
  if (sched.size() < n) throw ArgumentError("cspd: schedule shorter than the sample count");
  if (!feasible.contains(xi0)) throw ArgumentError("cspd: initial point outside the feasible set");
  if (!(std::abs(y0) <= 1.0)) throw ArgumentError("cspd: initial dual point outside [-1, 1]");

  Vector prev = xi0, prev2 = xi0;
  double y = y0;
  Vector sum_xi = Vector::Zero(xi0.size());
  double sum_y = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const auto& s = samples[k - 1];
    if (s.gamma_hat.size() != xi0.size()) throw DimensionError("cspd: regressor length mismatch");
    const double eta = sched.eta[k - 1], lambda = sched.lambda[k - 1], zeta = sched.zeta[k - 1];
    if (!(eta > 0.0) || !(lambda > 0.0)) throw ArgumentError("cspd: schedule weights must be positive");

    const Vector g = prev + zeta * (prev - prev2);
    y = std::clamp(y + (s.gamma_hat.dot(g) - s.c) / lambda, -1.0, 1.0);
    Vector next = feasible.project(prev - (y / eta) * s.gamma_hat);

    const double kd = static_cast<double>(k);
    sum_xi += kd * next;
    sum_y += kd * y;
    observe(k, next, y);
    prev2 = std::move(prev);
    prev = std::move(next);
  }
  const double norm = 2.0 / (static_cast<double>(n) * static_cast<double>(n + 1));
  return {norm * sum_xi, norm * sum_y};
}

// ---------------------------------------------------------------------------
// Bound constants and theoretical schedules

struct BoundConstants {
  double L_Gamma = 0.0;  // bound on ||E Gamma_hat||
  double M_Gamma = 0.0;  // high-probability regressor bound, per unit ln(1/delta)
  double M_c = 0.0;      // high-probability target bound, per unit ln(1/delta)
  double M_X = 0.0;      // M_Gamma Omega_Y ln(1/delta)
  double M_Y = 0.0;      // M_Gamma Omega_X ln(1/delta)
  double alpha = 0.0;    // informativity level, min_k ||Gamma_k||^2
  double delta = 0.0;
  double c1 = 1.0;
  double c2 = 1.0;
  double Omega_X = 0.0;
  double Omega_Y = 1.0;
};

inline double log_inv_delta(double delta) {
  if (!(delta > 0.0) || delta > std::exp(-1.0) * (1.0 + 1e-15)) {
    throw DomainError("delta must lie in (0, 1/e]");
  }
  return std::log(1.0 / delta);
}

/// Covariance of the stacked triple [x; u; x+].
inline Matrix triple_covariance(const LinearSystem& sys, const Matrix& sigma_x, const Matrix& sigma_u) {
  const Index nx = sys.nx(), nu = sys.nu();
  const Matrix sxp = sys.A * sigma_x * sys.A.transpose() + sys.B * sigma_u * sys.B.transpose() + sys.sigma_w;
  Matrix s = Matrix::Zero(2 * nx + nu, 2 * nx + nu);
  s.block(0, 0, nx, nx) = sigma_x;
  s.block(nx, nx, nu, nu) = sigma_u;
  s.block(0, nx + nu, nx, nx) = sigma_x * sys.A.transpose();
  s.block(nx, nx + nu, nu, nx) = sigma_u * sys.B.transpose();
  s.block(nx + nu, 0, nx, nx) = sys.A * sigma_x;
  s.block(nx + nu, nx, nx, nu) = sys.B * sigma_u;
  s.block(nx + nu, nx + nu, nx, nx) = sxp;
  return s;
}

// Evaluates
//   L_Gamma = 2||K|| ||Sx||_F + ||Su|| + (||K||^2 + 1)||Sx|| + ||S_x+|| + ||W||
//   M_Gamma = 4 (5 + 2||K|| + ||K||^2) base + ||W||
//   M_c     = 4 (||Q|| + ||K||^2 ||R||) base
// with base = c2^2/sqrt(c1) ||S~|| + c2^2/c1 Tr(S~), and
//   Omega_X = ||xi_K|| + (1 + zeta_bar) sqrt(2) D_X,  Omega_Y = 1.
// zeta_bar defaults to 1, the supremum of (k-1)/k.
inline BoundConstants bound_constants(const LinearSystem& sys, const CostWeights& w, const Policy& pol,
                                      const Matrix& sigma_x, const Matrix& sigma_u, double delta, double c1,
                                      double c2, double d_x, double alpha, double zeta_bar = 1.0) {
  const double lnd = log_inv_delta(delta);
  if (!(c1 > 0.0) || !(c2 > 0.0)) throw DomainError("bound_constants: c1, c2 must be positive");
  if (!(d_x > 0.0)) throw DomainError("bound_constants: D_X must be positive");
  if (!(alpha > 0.0)) throw DomainError("bound_constants: alpha must be positive");
  check_dims(sys, w);
  check_dims(sys, pol);

  const Matrix sxp = sys.A * sigma_x * sys.A.transpose() + sys.B * sigma_u * sys.B.transpose() + sys.sigma_w;
  const Matrix s_tilde = triple_covariance(sys, sigma_x, sigma_u);
  const double nk = op_norm(pol.K);
  const double nw = noise_lift(sys.sigma_w).norm();
  const double base = c2 * c2 / std::sqrt(c1) * op_norm(s_tilde) + c2 * c2 / c1 * s_tilde.trace();

  BoundConstants b;
  b.delta = delta;
  b.c1 = c1;
  b.c2 = c2;
  b.alpha = alpha;
  b.L_Gamma = 2.0 * nk * sigma_x.norm() + op_norm(sigma_u) + (nk * nk + 1.0) * op_norm(sigma_x) + op_norm(sxp) + nw;
  b.M_Gamma = 4.0 * (5.0 + 2.0 * nk + nk * nk) * base + nw;
  b.M_c = 4.0 * (op_norm(w.Q) + nk * nk * op_norm(w.R)) * base;
  b.Omega_Y = 1.0;
  b.Omega_X = exact_xi(sys, w, pol).coords().norm() + (1.0 + zeta_bar) * std::sqrt(2.0) * d_x;
  b.M_X = b.M_Gamma * b.Omega_Y * lnd;
  b.M_Y = b.M_Gamma * b.Omega_X * lnd;
  return b;
}

//   eta_k    = (3 sqrt2 L_Gamma D_Y k + 6 M_X k^1.5) / (2 sqrt2 D_X k)
//   lambda_k = (3 sqrt2 L_Gamma D_X k + 6 M_Y k^1.5) / (2 sqrt2 D_Y k)
//   zeta_k   = (k - 1) / k
inline CspdSchedule bound_schedule(const BoundConstants& bc, double d_x, double d_y, std::size_t n) {
  if (!(bc.L_Gamma > 0.0) || !(bc.M_X > 0.0) || !(bc.M_Y > 0.0) || !(d_x > 0.0) || !(d_y > 0.0)) {
    throw DomainError("bound_schedule: constants and diameters must be positive");
  }
  const double r2 = std::numbers::sqrt2;
  CspdSchedule s;
  for (std::size_t k = 1; k <= n; ++k) {
    const double kd = static_cast<double>(k);
    const double k32 = kd * std::sqrt(kd);
    s.eta.push_back((3.0 * r2 * bc.L_Gamma * d_y * kd + 6.0 * bc.M_X * k32) / (2.0 * r2 * d_x * kd));
    s.lambda.push_back((3.0 * r2 * bc.L_Gamma * d_x * kd + 6.0 * bc.M_Y * k32) / (2.0 * r2 * d_y * kd));
    s.zeta.push_back((kd - 1.0) / kd);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Shrinking multi-epoch scheme

enum class RadiusMode {
  Squared,  // inner radius D_s^2, the default
  Linear,   // inner radius D_s, for sensitivity studies
};

struct EpochPlan {
  int S = 1;
  double D0 = 1.0;
  std::vector<std::size_t> Ns;
  RadiusMode radius_mode = RadiusMode::Squared;

  /// Radius of the inner ball at epoch s (1-based).
  double inner_radius(int s) const {
    const double ds2 = std::ldexp(D0 * D0, -(s - 1));
    return radius_mode == RadiusMode::Squared ? ds2 : std::sqrt(ds2);
  }

  std::size_t total() const {
    std::size_t t = 0;
    for (auto n : Ns) t += n;
    return t;
  }
};

using ScheduleBuilder = std::function<CspdSchedule(std::size_t n, int epoch)>;

struct MultiEpochResult {
  Vector xi_hat;
  std::vector<Vector> epoch_estimates;  // xi~_1 .. xi~_S
};

// Epoch s restarts the primal-dual solver on the next N_s unused samples,
// warm-started at xi~_{s-1}, over X intersected with the ball of the plan's
// inner radius around xi~_{s-1}. The dual restarts at y = 0.
inline MultiEpochResult multi_epoch_cspd(std::span<const RegressionSample> samples, const BallSet& feasible,
                                         const Vector& xi0, const EpochPlan& plan, const ScheduleBuilder& schedule) {
  if (plan.S < 1 || static_cast<int>(plan.Ns.size()) != plan.S) {
    throw ArgumentError("multi_epoch_cspd: plan needs S >= 1 and one sample count per epoch");
  }
  if (!(plan.D0 > 0.0)) throw ArgumentError("multi_epoch_cspd: D0 must be positive");
  for (auto n : plan.Ns) {
    if (n < 1) throw ArgumentError("multi_epoch_cspd: epoch sample counts must be positive");
  }
  if (plan.total() > samples.size()) {
    throw ArgumentError("multi_epoch_cspd: plan needs " + std::to_string(plan.total()) + " samples, only " +
                        std::to_string(samples.size()) + " available");
  }
  if (!feasible.contains(xi0)) throw ArgumentError("multi_epoch_cspd: initial point outside the feasible set");

  MultiEpochResult out;
  Vector current = xi0;
  std::size_t offset = 0;
  for (int s = 1; s <= plan.S; ++s) {
    const std::size_t ns = plan.Ns[static_cast<std::size_t>(s - 1)];
    const BallIntersection region{feasible, BallSet(current, plan.inner_radius(s))};
    const auto result = cspd(samples.subspan(offset, ns), region, current, 0.0, schedule(ns, s));
    offset += ns;
    current = result.xi_hat;
    out.epoch_estimates.push_back(current);
  }
  out.xi_hat = current;
  return out;
}

inline MultiEpochResult multi_epoch_cspd(const Dataset& ds, const Policy& pol, const CostWeights& w,
                                         const Vector& w_lift, const BallSet& feasible, const Vector& xi0,
                                         const EpochPlan& plan, const ScheduleBuilder& schedule) {
  const auto samples = build_samples(ds.triples, pol, w, w_lift);
  return multi_epoch_cspd(samples, feasible, xi0, plan, schedule);
}

struct EpochSizing {
  int S = 1;
  std::vector<double> Ns;  // per-epoch counts; can exceed any practical integer range
  double total = 0.0;      // bound on the total number of iterates
};

// S = max(1, ceil(log2(D0^2 / eps))),
// N_s = ceil(400 max{L_Gamma D_Y / alpha, (4000 + 256 ln(1/delta)) / alpha^2 (M_X^2 + D_Y^2 M_Y^2 / D0^2 2^s)}),
// N   = 400 ceil(2 L_Gamma D_Y / alpha ln(D0/eps)
//                + (4000 + 256 ln(1/delta)) / alpha^2 (2 M_X^2 ln(D0/eps) + D_Y^2 M_Y^2 / eps)).
inline EpochSizing epoch_sample_sizes(const BoundConstants& bc, double d_y, double d0, double epsilon) {
  if (!(d0 > 0.0) || !(d_y > 0.0)) throw DomainError("epoch_sample_sizes: D0 and D_Y must be positive");
  if (!(epsilon > 0.0) || epsilon > d0 * d0) throw ArgumentError("epoch_sample_sizes: epsilon must lie in (0, D0^2]");
  if (!(bc.alpha > 0.0) || !(bc.L_Gamma > 0.0) || !(bc.M_X > 0.0) || !(bc.M_Y > 0.0)) {
    throw DomainError("epoch_sample_sizes: constants must be positive");
  }
  const double lnd = log_inv_delta(bc.delta);
  const double lead = (4000.0 + 256.0 * lnd) / (bc.alpha * bc.alpha);

  EpochSizing out;
  out.S = std::max(1, static_cast<int>(std::ceil(std::log2(d0 * d0 / epsilon))));
  for (int s = 1; s <= out.S; ++s) {
    const double var_term = lead * (bc.M_X * bc.M_X + d_y * d_y * bc.M_Y * bc.M_Y / (d0 * d0) * std::ldexp(1.0, s));
    out.Ns.push_back(std::ceil(400.0 * std::max(bc.L_Gamma * d_y / bc.alpha, var_term)));
  }
  const double ln_ratio = std::log(d0 / epsilon);
  out.total = 400.0 * std::ceil(2.0 * bc.L_Gamma * d_y / bc.alpha * ln_ratio +
                                lead * (2.0 * bc.M_X * bc.M_X * ln_ratio + d_y * d_y * bc.M_Y * bc.M_Y / epsilon));
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics against exact regressors

/// min_k ||Gamma_k||^2.
inline double empirical_alpha(std::span<const Vector> gammas) {
  if (gammas.empty()) throw ArgumentError("empirical_alpha: empty list");
  double a = gammas[0].squaredNorm();
  for (const auto& g : gammas) a = std::min(a, g.squaredNorm());
  return a;
}

/// f(xi) = (1/N) sum_k |<Gamma_k, xi> - c_k|.
inline double empirical_gap_f(const Vector& xi, std::span<const Vector> gammas, std::span<const double> cs) {
  if (gammas.size() != cs.size() || gammas.empty()) throw DimensionError("empirical_gap_f: length mismatch");
  double sum = 0.0;
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    if (gammas[k].size() != xi.size()) throw DimensionError("empirical_gap_f: regressor length mismatch");
    sum += std::abs(gammas[k].dot(xi) - cs[k]);
  }
  return sum / static_cast<double>(gammas.size());
}

}  // namespace mfpg
