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

// Policy updates driven by estimated (or exact) B'PB and B'PA, the
// model-free outer loop that reuses a single dataset across iterations, and
// the contraction and accuracy calculators that accompany them.

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mfpg/datagen.hpp"
#include "mfpg/error.hpp"
#include "mfpg/estimator.hpp"
#include "mfpg/linalg.hpp"
#include "mfpg/lqr.hpp"
#include "mfpg/parameter.hpp"

namespace mfpg {

enum class Method { NPG, GNM };
enum class EstimatorKind { CSPD, MULTI_EPOCH, LS, EXACT, SYSID };

inline std::string to_string(Method m) { return m == Method::NPG ? "NPG" : "GNM"; }

inline std::string to_string(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::CSPD: return "CSPD";
    case EstimatorKind::MULTI_EPOCH: return "MULTI_EPOCH";
    case EstimatorKind::LS: return "LS";
    case EstimatorKind::EXACT: return "EXACT";
    case EstimatorKind::SYSID: return "SYSID";
  }
  return "?";
}

/// K - 2 eta [(R + B'PB) K + B'PA].
inline Policy npg_step(const Policy& pol, const Matrix& bt_p_b, const Matrix& bt_p_a, const Matrix& r, double eta) {
  if (bt_p_b.rows() != pol.K.rows() || bt_p_a.rows() != pol.K.rows() || bt_p_a.cols() != pol.K.cols() ||
      r.rows() != pol.K.rows()) {
    throw DimensionError("npg_step: shape mismatch");
  }
  return Policy(pol.K - 2.0 * eta * ((r + bt_p_b) * pol.K + bt_p_a));
}

/// K - 2 eta [K + (R + B'PB)^{-1} B'PA]; rejects a non positive definite R + B'PB.
inline Policy gnm_step(const Policy& pol, const Matrix& bt_p_b, const Matrix& bt_p_a, const Matrix& r, double eta) {
  if (bt_p_b.rows() != pol.K.rows() || bt_p_a.rows() != pol.K.rows() || bt_p_a.cols() != pol.K.cols() ||
      r.rows() != pol.K.rows()) {
    throw DimensionError("gnm_step: shape mismatch");
  }
  const Matrix inner = r + bt_p_b;
  if (!is_symmetric(inner, 1e-9) || min_eigenvalue((inner + inner.transpose()) / 2.0) <= 1e-10) {
    throw AccuracyError("gnm_step: R + B'PB estimate is not positive definite (estimate violates lambda_1(R)/2 margin)");
  }
  return Policy(pol.K - 2.0 * eta * (pol.K + inner.ldlt().solve(bt_p_a)));
}

/// Largest admissible natural-gradient step for a start K0: 1 / (2 ||R + B'P_K0 B||).
inline double npg_step_cap(const LinearSystem& sys, const CostWeights& w, const Policy& k0) {
  const Matrix p = solve_policy_lyapunov(sys, w, k0);
  return 1.0 / (2.0 * op_norm(w.R + sys.B.transpose() * p * sys.B));
}

struct ContractionFactors {
  double gamma = 0.0;      // exact-update contraction
  double gamma_hat = 0.0;  // contraction tolerated under estimation error
  double rate = 0.0;       // 1 - gamma, i.e. 2 eta [lambda_1(R)] lambda_1(Sw) / ||Sigma_K*||
  double sigma = 0.0;

  /// Iterations after which the gap is guaranteed below epsilon (estimated updates).
  long long iteration_bound(double initial_gap, double epsilon) const {
    if (!(epsilon > 0.0)) throw DomainError("iteration_bound: epsilon must be positive");
    if (initial_gap <= epsilon) return 0;
    return static_cast<long long>(std::ceil(std::log(initial_gap / epsilon) / ((1.0 - sigma) * rate)));
  }

  /// Same bound for exact updates.
  long long exact_iteration_bound(double initial_gap, double epsilon) const {
    if (!(epsilon > 0.0)) throw DomainError("exact_iteration_bound: epsilon must be positive");
    if (initial_gap <= epsilon) return 0;
    return static_cast<long long>(std::ceil(std::log(initial_gap / epsilon) / rate));
  }
};

// NPG: gamma = 1 - 2 eta l(R) l(Sw) / ||Sigma_K*||;  GNM: gamma = 1 - 2 eta l(Sw) / ||Sigma_K*||;
// gamma_hat replaces the decrement by (1 - sigma) times itself. When k0 is
// supplied the NPG step is checked against 1 / (2 ||R + B'P_K0 B||).
inline ContractionFactors contraction_factors(const LinearSystem& sys, const CostWeights& w, double eta, Method method,
                                              double sigma, const std::optional<Policy>& k0 = std::nullopt) {
  if (!(eta > 0.0)) throw DomainError("contraction_factors: step must be positive");
  if (!(sigma > 0.0 && sigma < 1.0)) throw DomainError("contraction_factors: sigma must lie in (0, 1)");
  if (method == Method::GNM && eta > 0.5) throw DomainError("contraction_factors: GNM step must be <= 1/2");
  if (method == Method::NPG && k0 && eta > npg_step_cap(sys, w, *k0) * (1.0 + 1e-12)) {
    throw DomainError("contraction_factors: NPG step exceeds 1/(2||R + B'P_K0 B||)");
  }
  const auto opt = solve_dare(sys, w);
  const double sigma_star = op_norm(stationary_covariance(sys, opt.K));
  const double l_w = min_eigenvalue(sys.sigma_w);
  if (!(l_w > 0.0)) throw DomainError("contraction_factors: sigma_w must be positive definite");
  double rate = 2.0 * eta * l_w / sigma_star;
  if (method == Method::NPG) rate *= min_eigenvalue(w.R);
  return {1.0 - rate, 1.0 - (1.0 - sigma) * rate, rate, sigma};
}

// Per-iteration estimation-error budget under which an estimated update
// still contracts by gamma_hat:
//   NPG: sigma eps l(R) l(Sw) / (h_C (1 + b_K) ||Sigma_K*||)
//   GNM: min(l(R)/2, sigma eps l(Sw) / (h_C ||Sigma_K*|| Dbar)),
//        Dbar = ||R^{-1}|| + l(R)/2 + ||A|| ||B|| C(K0) / l(Sw)
// with b_K, h_C evaluated at C(K0).
inline double required_accuracy(const LinearSystem& sys, const CostWeights& w, double k0_cost, double epsilon,
                                double sigma, Method method) {
  if (!(epsilon > 0.0)) throw DomainError("required_accuracy: epsilon must be positive");
  if (!(sigma > 0.0 && sigma < 1.0)) throw DomainError("required_accuracy: sigma must lie in (0, 1)");
  if (!(k0_cost > 0.0)) throw DomainError("required_accuracy: initial cost must be positive");
  const auto opt = solve_dare(sys, w);
  const double c_star = average_cost(sys, w, opt.K);
  const double sigma_star = op_norm(stationary_covariance(sys, opt.K));
  const auto lc = lipschitz_constants(sys, w, k0_cost, c_star);
  const double l_r = min_eigenvalue(w.R);
  const double l_w = min_eigenvalue(sys.sigma_w);
  if (method == Method::NPG) {
    return sigma * epsilon * l_r * l_w / (lc.h_c * (1.0 + lc.b_k) * sigma_star);
  }
  const double dbar = op_norm(w.R.inverse()) + l_r / 2.0 + op_norm(sys.A) * op_norm(sys.B) * k0_cost / l_w;
  return std::min(l_r / 2.0, sigma * epsilon * l_w / (lc.h_c * sigma_star * dbar));
}

struct SysIdResult {
  Matrix A_hat;
  Matrix B_hat;
};

/// Least-squares fit of x+ ~ [A B][x; u].
inline SysIdResult sysid_ls(const Dataset& ds) {
  const Index nx = ds.meta.nx, nu = ds.meta.nu, p = nx + nu;
  const auto n = static_cast<Index>(ds.size());
  if (n < p) {
    throw InformativityError("sysid_ls: " + std::to_string(n) + " triples cannot identify " + std::to_string(p) +
                                 " regressors",
                             0.0);
  }
  Matrix z(n, p), y(n, nx);
  for (Index k = 0; k < n; ++k) {
    const auto& t = ds.triples[static_cast<std::size_t>(k)];
    z.row(k) << t.x.transpose(), t.u.transpose();
    y.row(k) = t.x_plus.transpose();
  }
  const Eigen::BDCSVD<Matrix> svd(z);
  const double smin = svd.singularValues()(p - 1), smax = svd.singularValues()(0);
  if (!(smin > 1e-12 * smax)) {
    throw InformativityError("sysid_ls: regressor matrix is rank deficient", smin);
  }
  const Matrix theta = z.colPivHouseholderQr().solve(y).transpose();  // nx x (nx + nu)
  return {theta.leftCols(nx), theta.rightCols(nu)};
}

/// xi implied by an identified model (certainty equivalence).
inline ParameterVector model_based_xi(const SysIdResult& model, const Matrix& sigma_w, const CostWeights& w,
                                      const Policy& pol) {
  const LinearSystem identified(model.A_hat, model.B_hat, sigma_w);
  return exact_xi(identified, w, pol);
}

struct EstimatorOptions {
  BallSet ball;                     // feasible set X; empty center means origin of the right size
  ScheduleBuilder schedule;         // CSPD weights for n samples in epoch s
  EpochPlan plan;                   // multi-epoch plan
  bool warm_start = true;           // start CSPD at the previous estimate (projected onto X)
};

inline ScheduleBuilder sqrt_schedule_builder(double scale) {
  return [scale](std::size_t n, int) { return sqrt_schedule(n, scale); };
}

struct PgmConfig {
  Method method = Method::NPG;
  double step = 0.05;
  int max_iters = 50;
  EstimatorKind estimator = EstimatorKind::CSPD;
  bool stability_guard = true;
};

enum class RunStatus { Completed, GuardHalted, NumericalFailure };

inline std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Completed: return "completed";
    case RunStatus::GuardHalted: return "guard_halted";
    case RunStatus::NumericalFailure: return "numerical_failure";
  }
  return "?";
}

struct IterationRecord {
  int iteration = 0;
  Policy K;
  double cost = 0.0;
  double gap = 0.0;  // C(K_i) - C(K*); +inf when K_i is not stabilizing
  double estimation_error = std::numeric_limits<double>::quiet_NaN();  // ||xi_hat(K_i) - xi(K_i)||
  double spectral_radius = 0.0;
  double seconds = 0.0;  // time spent estimating at this iterate
};

struct RunTrace {
  std::vector<IterationRecord> records;
  RunStatus status = RunStatus::Completed;
  int halted_at = -1;  // iterate index that tripped the guard or failed
  std::string message;
  Policy last_good;
  double optimal_cost = 0.0;
  double initial_gap = 0.0;
};

namespace detail {

inline IterationRecord evaluate_iterate(const LinearSystem& sys, const CostWeights& w, const Policy& k, int i,
                                        double c_star) {
  IterationRecord r;
  r.iteration = i;
  r.K = k;
  r.spectral_radius = spectral_radius(closed_loop(sys, k));
  if (r.spectral_radius < 1.0 - kStabilityMargin) {
    r.cost = average_cost(sys, w, k);
    r.gap = r.cost - c_star;
  } else {
    r.cost = r.gap = std::numeric_limits<double>::infinity();
  }
  return r;
}

}  // namespace detail

// Model-free NPG/GNM. The dataset is collected once and reused: at every
// iterate the regression samples are rebuilt for the current gain, xi is
// estimated, unpacked and fed to the update. The true system is used only to
// score iterates (cost gap, estimation error, spectral radius).
inline RunTrace run_modelfree(const LinearSystem& sys, const CostWeights& w, const Policy& k0, const Dataset& ds,
                              const PgmConfig& cfg, const EstimatorOptions& opts) {
  check_dims(sys, w);
  check_dims(sys, k0);
  if (!(cfg.step > 0.0)) throw DomainError("run_modelfree: step must be positive");
  if (cfg.method == Method::GNM && cfg.step > 0.5) throw DomainError("run_modelfree: GNM step must be <= 1/2");
  if (cfg.max_iters < 0) throw ArgumentError("run_modelfree: negative iteration count");
  require_stabilizing(sys, k0);

  const Index nx = sys.nx(), nu = sys.nu(), d = parameter_dimension(nx, nu);
  const auto opt = solve_dare(sys, w);
  const double c_star = average_cost(sys, w, opt.K);
  const Vector w_lift = noise_lift(sys.sigma_w);
  const BallSet ball = opts.ball.center.size() == 0 ? BallSet::origin(d, opts.ball.radius) : opts.ball;
  if (ball.center.size() != d) throw DimensionError("run_modelfree: feasible ball has the wrong dimension");
  const ScheduleBuilder schedule = opts.schedule ? opts.schedule : sqrt_schedule_builder(0.001);

  std::optional<SysIdResult> model;
  if (cfg.estimator == EstimatorKind::SYSID) model = sysid_ls(ds);

  RunTrace trace;
  trace.optimal_cost = c_star;
  trace.last_good = k0;
  trace.records.push_back(detail::evaluate_iterate(sys, w, k0, 0, c_star));
  trace.initial_gap = trace.records.back().gap;

  Policy k = k0;
  Vector previous = ball.center;
  for (int i = 0; i < cfg.max_iters; ++i) {
    auto& rec = trace.records.back();
    const auto t0 = std::chrono::steady_clock::now();
    ParameterVector xi_hat;
    try {
      switch (cfg.estimator) {
        case EstimatorKind::EXACT:
          xi_hat = exact_xi(sys, w, k);
          break;
        case EstimatorKind::SYSID:
          xi_hat = model_based_xi(*model, sys.sigma_w, w, k);
          break;
        case EstimatorKind::LS:
          xi_hat = ls_estimate(build_samples(ds.triples, k, w, w_lift), nx, nu);
          break;
        case EstimatorKind::CSPD: {
          const auto samples = build_samples(ds.triples, k, w, w_lift);
          const Vector start = opts.warm_start ? ball.project(previous) : ball.center;
          xi_hat = ParameterVector(cspd(samples, ball, start, 0.0, schedule(samples.size(), 1)).xi_hat, nx, nu);
          break;
        }
        case EstimatorKind::MULTI_EPOCH: {
          const auto samples = build_samples(ds.triples, k, w, w_lift);
          const Vector start = opts.warm_start ? ball.project(previous) : ball.center;
          xi_hat = ParameterVector(multi_epoch_cspd(samples, ball, start, opts.plan, schedule).xi_hat, nx, nu);
          break;
        }
      }
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      previous = xi_hat.coords();
      if (std::isfinite(rec.gap)) rec.estimation_error = (xi_hat.coords() - exact_xi(sys, w, k).coords()).norm();

      const auto parts = unpack_xi(xi_hat);
      k = cfg.method == Method::NPG ? npg_step(k, parts.bt_p_b, parts.bt_p_a, w.R, cfg.step)
                                    : gnm_step(k, parts.bt_p_b, parts.bt_p_a, w.R, cfg.step);
    } catch (const Error& e) {
      trace.status = RunStatus::NumericalFailure;
      trace.halted_at = i;
      trace.message = e.what();
      return trace;
    }

    trace.records.push_back(detail::evaluate_iterate(sys, w, k, i + 1, c_star));
    if (!std::isfinite(trace.records.back().gap)) {
      if (cfg.stability_guard) {
        trace.status = RunStatus::GuardHalted;
        trace.halted_at = i + 1;
        trace.message = "iterate " + std::to_string(i + 1) + " is not stabilizing (spectral radius " +
                        std::to_string(trace.records.back().spectral_radius) + ")";
        return trace;
      }
    } else {
      trace.last_good = k;
    }
  }
  return trace;
}

}  // namespace mfpg
