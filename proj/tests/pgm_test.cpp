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


#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mfpg/experiment.hpp"
#include "mfpg/pgm.hpp"
#include "oracles.hpp"

namespace {

using mfpg::CostWeights;
using mfpg::EstimatorKind;
using mfpg::LinearSystem;
using mfpg::Matrix;
using mfpg::Method;
using mfpg::Policy;

Matrix s(double x) { return Matrix::Constant(1, 1, x); }

const LinearSystem kScalar(s(0.5), s(1.0), s(0.1));
const CostWeights kUnit(s(1.0), s(1.0));

CostWeights benchmark_weights() { return {0.001 * Matrix::Identity(3, 3), Matrix::Identity(3, 3)}; }

Policy benchmark_k0() {
  return mfpg::solve_dare(mfpg::benchmark_system(), CostWeights(0.1 * Matrix::Identity(3, 3), Matrix::Identity(3, 3))).K;
}

mfpg::Dataset benchmark_dataset(std::uint64_t seed, std::size_t n = 100) {
  return mfpg::collect_dataset(mfpg::benchmark_system(), n, Matrix::Identity(3, 3), Matrix::Identity(3, 3), seed);
}

mfpg::EstimatorOptions benchmark_estimator() {
  mfpg::EstimatorOptions o;
  o.ball = mfpg::BallSet::origin(21, 1.0);
  o.schedule = mfpg::sqrt_schedule_builder(0.001);
  o.plan = mfpg::EpochPlan{4, 1.0, {8, 16, 24, 52}};
  return o;
}

// Model-based update computed from an independent value-matrix solve.
Matrix reference_step(const LinearSystem& sys, const CostWeights& w, const Matrix& k, double eta, Method m) {
  const Matrix p = oracle::value_matrix(sys.A, sys.B, w.Q, w.R, k);
  const Matrix btpb = sys.B.transpose() * p * sys.B, btpa = sys.B.transpose() * p * sys.A;
  if (m == Method::NPG) return k - 2.0 * eta * ((w.R + btpb) * k + btpa);
  return k - 2.0 * eta * (k + (w.R + btpb).inverse() * btpa);
}

// ---------------------------------------------------------------------------

TEST(NpgStep, ScalarExactInputs) {
  const auto k1 = mfpg::npg_step(Policy(s(0.0)), s(4.0 / 3.0), s(2.0 / 3.0), s(1.0), 0.25);
  EXPECT_NEAR(k1.K(0, 0), -1.0 / 3.0, 1e-15);
}

TEST(NpgStep, ZeroEstimatesShrinkByR) {
  const Matrix k = (Matrix(2, 2) << 0.3, -0.1, 0.2, 0.4).finished();
  const Matrix r = (Matrix(2, 2) << 2.0, 0.5, 0.5, 1.0).finished();
  const auto k1 = mfpg::npg_step(Policy(k), Matrix::Zero(2, 2), Matrix::Zero(2, 2), r, 0.1);
  EXPECT_LE((k1.K - (k - 0.2 * r * k)).norm(), 1e-15);
}

TEST(NpgStep, FixedPointAtOptimum) {
  const auto sys = mfpg::benchmark_system();
  const auto opt = mfpg::solve_dare(sys, benchmark_weights());
  const auto xi = mfpg::unpack_xi(mfpg::exact_xi(sys, benchmark_weights(), opt.K));
  const auto k1 = mfpg::npg_step(opt.K, xi.bt_p_b, xi.bt_p_a, Matrix::Identity(3, 3), 0.05);
  EXPECT_LE((k1.K - opt.K.K).norm(), 1e-8);
  const auto k2 = mfpg::gnm_step(opt.K, xi.bt_p_b, xi.bt_p_a, Matrix::Identity(3, 3), 0.5);
  EXPECT_LE((k2.K - opt.K.K).norm(), 1e-8);
}

TEST(NpgStep, ShapeMismatch) {
  EXPECT_THROW(mfpg::npg_step(Policy(Matrix::Zero(2, 3)), Matrix::Zero(2, 2), Matrix::Zero(3, 3), Matrix::Identity(2, 2), 0.1),
               mfpg::DimensionError);
}

TEST(GnmStep, ScalarExactInputs) {
  const auto k1 = mfpg::gnm_step(Policy(s(0.0)), s(4.0 / 3.0), s(2.0 / 3.0), s(1.0), 0.5);
  EXPECT_NEAR(k1.K(0, 0), -2.0 / 7.0, 1e-15);
}

TEST(GnmStep, HalfStepIsPolicyIteration) {
  const auto sys = mfpg::benchmark_system();
  const auto w = benchmark_weights();
  const Policy k0 = benchmark_k0();
  const auto xi = mfpg::unpack_xi(mfpg::exact_xi(sys, w, k0));
  const auto k1 = mfpg::gnm_step(k0, xi.bt_p_b, xi.bt_p_a, w.R, 0.5);
  const Matrix ref = oracle::policy_improvement(sys.A, sys.B, w.Q, w.R, k0.K);
  EXPECT_LE((k1.K - ref).norm(), 1e-10 * ref.norm());
  const double c_ref = (oracle::value_matrix(sys.A, sys.B, w.Q, w.R, ref) * sys.sigma_w).trace();
  EXPECT_NEAR(mfpg::average_cost(sys, w, k1), c_ref, 1e-2 * c_ref);
}

TEST(GnmStep, HalfStepOnRandomPlants) {
  std::mt19937_64 gen(404);
  for (int i = 0; i < 10; ++i) {
    const auto pl = oracle::random_plant(gen, 1 + i % 4, 1 + (i / 3) % 3);
    const LinearSystem sys(pl.A, pl.B, pl.Sw);
    const CostWeights w(pl.Q, pl.R);
    const auto xi = mfpg::unpack_xi(mfpg::exact_xi(sys, w, Policy(pl.K)));
    const auto k1 = mfpg::gnm_step(Policy(pl.K), xi.bt_p_b, xi.bt_p_a, pl.R, 0.5);
    const Matrix ref = oracle::policy_improvement(pl.A, pl.B, pl.Q, pl.R, pl.K);
    EXPECT_LE((k1.K - ref).norm(), 1e-8 * std::max(1.0, ref.norm())) << i;
  }
}

TEST(GnmStep, RejectsIndefiniteInnerMatrix) {
  const Matrix btpb = (Matrix(2, 2) << -1.1, 0.0, 0.0, 0.5).finished();
  EXPECT_THROW(mfpg::gnm_step(Policy(Matrix::Zero(2, 2)), btpb, Matrix::Identity(2, 2), Matrix::Identity(2, 2), 0.5),
               mfpg::AccuracyError);
  const Matrix asym = (Matrix(2, 2) << 1.0, 0.5, 0.0, 1.0).finished();
  EXPECT_THROW(mfpg::gnm_step(Policy(Matrix::Zero(2, 2)), asym, Matrix::Identity(2, 2), Matrix::Identity(2, 2), 0.5),
               mfpg::AccuracyError);
}

// ---------------------------------------------------------------------------

TEST(ContractionFactors, SmallSigmaLimit) {
  const auto sys = mfpg::benchmark_system();
  const auto f = mfpg::contraction_factors(sys, benchmark_weights(), 0.05, Method::NPG, 1e-12);
  EXPECT_NEAR(f.gamma_hat, f.gamma, 1e-12);
  EXPECT_GT(f.gamma, 0.0);
  EXPECT_LT(f.gamma, 1.0);
}

TEST(ContractionFactors, GaussNewtonHalfStep) {
  const auto sys = mfpg::benchmark_system();
  const auto w = benchmark_weights();
  const auto opt = mfpg::solve_dare(sys, w);
  const Matrix sigma_star = oracle::state_covariance(sys.A, sys.B, sys.sigma_w, opt.K.K);
  const double norm = sigma_star.jacobiSvd().singularValues()(0);
  const auto f = mfpg::contraction_factors(sys, w, 0.5, Method::GNM, 0.5);
  EXPECT_NEAR(f.gamma, 1.0 - 0.1 / norm, 1e-12);
  EXPECT_NEAR(f.gamma_hat, 1.0 - 0.5 * 0.1 / norm, 1e-12);
}

TEST(ContractionFactors, GaussNewtonFasterAtMaximalSteps) {
  const auto sys = mfpg::benchmark_system();
  const auto w = benchmark_weights();
  const Policy k0 = benchmark_k0();
  const double cap = mfpg::npg_step_cap(sys, w, k0);
  const auto n = mfpg::contraction_factors(sys, w, cap, Method::NPG, 0.5, k0);
  const auto g = mfpg::contraction_factors(sys, w, 0.5, Method::GNM, 0.5);
  EXPECT_LT(g.gamma, n.gamma);
  EXPECT_LT(g.gamma_hat, n.gamma_hat);
}

TEST(ContractionFactors, IterationBounds) {
  mfpg::ContractionFactors f{0.9, 0.95, 0.1, 0.5};
  EXPECT_EQ(f.exact_iteration_bound(1.0, 1e-3), static_cast<long long>(std::ceil(std::log(1e3) / 0.1)));
  EXPECT_EQ(f.iteration_bound(1.0, 1e-3), static_cast<long long>(std::ceil(std::log(1e3) / 0.05)));
  EXPECT_EQ(f.iteration_bound(1e-4, 1e-3), 0);
  EXPECT_THROW(f.iteration_bound(1.0, 0.0), mfpg::DomainError);
}

TEST(ContractionFactors, DomainErrors) {
  const auto sys = mfpg::benchmark_system();
  const auto w = benchmark_weights();
  EXPECT_THROW(mfpg::contraction_factors(sys, w, 0.6, Method::GNM, 0.5), mfpg::DomainError);
  EXPECT_THROW(mfpg::contraction_factors(sys, w, 0.0, Method::NPG, 0.5), mfpg::DomainError);
  EXPECT_THROW(mfpg::contraction_factors(sys, w, 0.05, Method::NPG, 1.0), mfpg::DomainError);
  EXPECT_THROW(mfpg::contraction_factors(sys, w, 10.0, Method::NPG, 0.5, benchmark_k0()), mfpg::DomainError);
}

TEST(RequiredAccuracy, LinearInEpsilon) {
  const auto sys = mfpg::benchmark_system();
  const auto w = benchmark_weights();
  const double c0 = mfpg::average_cost(sys, w, benchmark_k0());
  const double a = mfpg::required_accuracy(sys, w, c0, 0.01, 0.5, Method::NPG);
  EXPECT_NEAR(mfpg::required_accuracy(sys, w, c0, 0.02, 0.5, Method::NPG), 2.0 * a, 1e-12 * a);
  const double g = mfpg::required_accuracy(sys, w, c0, 1e-6, 0.5, Method::GNM);
  EXPECT_NEAR(mfpg::required_accuracy(sys, w, c0, 2e-6, 0.5, Method::GNM), 2.0 * g, 1e-12 * g);
}

TEST(RequiredAccuracy, TighterForWorseStart) {
  const auto sys = mfpg::benchmark_system();
  const auto w = benchmark_weights();
  const double c0 = mfpg::average_cost(sys, w, benchmark_k0());
  for (Method m : {Method::NPG, Method::GNM}) {
    double prev = std::numeric_limits<double>::infinity();
    for (double factor : {1.0, 1.5, 3.0, 10.0}) {
      const double a = mfpg::required_accuracy(sys, w, factor * c0, 0.01, 0.5, m);
      EXPECT_LE(a, prev);
      prev = a;
    }
  }
}

TEST(RequiredAccuracy, BenchmarkSystemValue) {
  const auto sys = mfpg::benchmark_system();
  const auto w = benchmark_weights();
  const double c0 = mfpg::average_cost(sys, w, benchmark_k0());
  for (Method m : {Method::NPG, Method::GNM}) {
    const double a = mfpg::required_accuracy(sys, w, c0, 0.01, 0.5, m);
    EXPECT_GT(a, 0.0);
    EXPECT_TRUE(std::isfinite(a));
    EXPECT_LE(a, 0.5);
  }
  EXPECT_THROW(mfpg::required_accuracy(sys, w, c0, 0.0, 0.5, Method::NPG), mfpg::DomainError);
  EXPECT_THROW(mfpg::required_accuracy(sys, w, c0, 0.01, 0.0, Method::NPG), mfpg::DomainError);
}

// ---------------------------------------------------------------------------

TEST(SysId, NoiselessRecovery) {
  const auto base = mfpg::benchmark_system();
  const LinearSystem quiet(base.A, base.B, Matrix::Zero(3, 3));
  const auto ds = mfpg::collect_dataset(quiet, 6, Matrix::Identity(3, 3), Matrix::Identity(3, 3), 8);
  const auto id = mfpg::sysid_ls(ds);
  EXPECT_LE((id.A_hat - base.A).norm(), 1e-9);
  EXPECT_LE((id.B_hat - base.B).norm(), 1e-9);
}

TEST(SysId, BenchmarkSystemAccuracy) {
  const auto sys = mfpg::benchmark_system();
  std::vector<double> errs;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto id = mfpg::sysid_ls(benchmark_dataset(seed));
    Matrix diff(3, 6);
    diff << id.A_hat - sys.A, id.B_hat - sys.B;
    errs.push_back(diff.norm());
  }
  std::nth_element(errs.begin(), errs.begin() + 15, errs.end());
  EXPECT_LE(errs[15], 0.2);
}

TEST(SysId, TooFewSamples) { EXPECT_THROW(mfpg::sysid_ls(benchmark_dataset(1, 1)), mfpg::InformativityError); }

// ---------------------------------------------------------------------------

TEST(RunModelFree, ExactEstimatorMatchesModelBasedIteration) {
  const auto sys = mfpg::benchmark_system();
  const auto w = benchmark_weights();
  for (Method m : {Method::NPG, Method::GNM}) {
    mfpg::PgmConfig cfg;
    cfg.method = m;
    cfg.step = m == Method::NPG ? 0.05 : 0.25;
    cfg.max_iters = 40;
    cfg.estimator = EstimatorKind::EXACT;
    const auto tr = mfpg::run_modelfree(sys, w, benchmark_k0(), benchmark_dataset(1), cfg, benchmark_estimator());
    ASSERT_EQ(tr.records.size(), 41u);
    for (std::size_t i = 0; i + 1 < tr.records.size(); ++i) {
      const Matrix ref = reference_step(sys, w, tr.records[i].K.K, cfg.step, m);
      EXPECT_LE((tr.records[i + 1].K.K - ref).norm(), 1e-12) << i;
      EXPECT_LE(tr.records[i].estimation_error, 1e-12);
    }
  }
}

TEST(RunModelFree, ZeroIterations) {
  mfpg::PgmConfig cfg;
  cfg.max_iters = 0;
  const auto tr = mfpg::run_modelfree(mfpg::benchmark_system(), benchmark_weights(), benchmark_k0(), benchmark_dataset(1), cfg,
                                      benchmark_estimator());
  ASSERT_EQ(tr.records.size(), 1u);
  EXPECT_EQ(tr.records[0].K.K, benchmark_k0().K);
  EXPECT_EQ(tr.status, mfpg::RunStatus::Completed);
}

TEST(RunModelFree, RejectsBadConfig) {
  mfpg::PgmConfig cfg;
  cfg.method = Method::GNM;
  cfg.step = 0.6;
  EXPECT_THROW(mfpg::run_modelfree(mfpg::benchmark_system(), benchmark_weights(), benchmark_k0(), benchmark_dataset(1), cfg,
                                   benchmark_estimator()),
               mfpg::DomainError);
  cfg.step = 0.5;
  EXPECT_THROW(mfpg::run_modelfree(mfpg::benchmark_system(), benchmark_weights(), Policy(Matrix::Zero(3, 3)),
                                   benchmark_dataset(1), cfg, benchmark_estimator()),
               mfpg::StabilityError);
}

TEST(RunModelFree, DeterministicGivenDataset) {
  const auto ds = benchmark_dataset(9);
  for (auto kind : {EstimatorKind::CSPD, EstimatorKind::MULTI_EPOCH, EstimatorKind::LS, EstimatorKind::SYSID}) {
    mfpg::PgmConfig cfg;
    cfg.estimator = kind;
    cfg.max_iters = 10;
    const auto a = mfpg::run_modelfree(mfpg::benchmark_system(), benchmark_weights(), benchmark_k0(), ds, cfg, benchmark_estimator());
    const auto b = mfpg::run_modelfree(mfpg::benchmark_system(), benchmark_weights(), benchmark_k0(), ds, cfg, benchmark_estimator());
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      EXPECT_EQ(a.records[i].K.K, b.records[i].K.K);
      EXPECT_EQ(a.records[i].gap, b.records[i].gap);
    }
  }
}

TEST(RunModelFree, GapNeverBelowOptimum) {
  const auto ds = benchmark_dataset(2);
  for (auto kind : {EstimatorKind::CSPD, EstimatorKind::LS, EstimatorKind::EXACT}) {
    mfpg::PgmConfig cfg;
    cfg.estimator = kind;
    const auto tr = mfpg::run_modelfree(mfpg::benchmark_system(), benchmark_weights(), benchmark_k0(), ds, cfg, benchmark_estimator());
    for (const auto& r : tr.records) EXPECT_GE(r.gap, -1e-9);
  }
}

// Checks C(K_{i+1}) - C* <= gamma (C(K_i) - C*) along an exact run until the gap reaches 1e-10.
void expect_exact_contraction(const LinearSystem& sys, const CostWeights& w, const Policy& k0, Method m) {
  const double eta = m == Method::NPG ? mfpg::npg_step_cap(sys, w, k0) : 0.5;
  const auto f = mfpg::contraction_factors(sys, w, eta, m, 0.5, m == Method::NPG ? std::optional(k0) : std::nullopt);
  mfpg::PgmConfig cfg;
  cfg.method = m;
  cfg.step = eta;
  cfg.estimator = EstimatorKind::EXACT;
  cfg.max_iters = 3000;
  const auto ds = mfpg::collect_dataset(sys, 1, Matrix::Identity(sys.nx(), sys.nx()),
                                        Matrix::Identity(sys.nu(), sys.nu()), 1);
  const auto tr = mfpg::run_modelfree(sys, w, k0, ds, cfg, {});
  ASSERT_EQ(tr.status, mfpg::RunStatus::Completed) << tr.message;
  bool reached = false;
  for (std::size_t i = 0; i + 1 < tr.records.size(); ++i) {
    const double g0 = tr.records[i].gap, g1 = tr.records[i + 1].gap;
    if (g0 <= 1e-10) {
      reached = true;
      break;
    }
    EXPECT_LE(g1, f.gamma * g0 + 1e-12) << "iteration " << i;
  }
  EXPECT_TRUE(reached);
}

TEST(RunModelFree, ExactContractionBenchmarkSystem) {
  expect_exact_contraction(mfpg::benchmark_system(), benchmark_weights(), benchmark_k0(), Method::NPG);
  expect_exact_contraction(mfpg::benchmark_system(), benchmark_weights(), benchmark_k0(), Method::GNM);
}

TEST(RunModelFree, ExactContractionRandomSystems) {
  std::mt19937_64 gen(606);
  for (int i = 0; i < 5; ++i) {
    const auto pl = oracle::random_plant(gen, 1 + i % 4, 1 + (i + 2) % 4);
    SCOPED_TRACE(i);
    for (Method m : {Method::NPG, Method::GNM}) {
      expect_exact_contraction(LinearSystem(pl.A, pl.B, pl.Sw), CostWeights(pl.Q, pl.R), Policy(pl.K), m);
    }
  }
}

TEST(RunModelFree, GaussNewtonPolicyIterationSpeed) {
  mfpg::PgmConfig cfg;
  cfg.method = Method::GNM;
  cfg.step = 0.5;
  cfg.estimator = EstimatorKind::EXACT;
  cfg.max_iters = 30;
  const auto tr = mfpg::run_modelfree(mfpg::benchmark_system(), benchmark_weights(), benchmark_k0(), benchmark_dataset(1), cfg, {});
  EXPECT_LE(tr.records.back().gap, 1e-8);
}

TEST(RunModelFree, BenchmarkConfigurationStaysStabilizing) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    mfpg::PgmConfig cfg;
    const auto tr = mfpg::run_modelfree(mfpg::benchmark_system(), benchmark_weights(), benchmark_k0(), benchmark_dataset(seed), cfg,
                                        benchmark_estimator());
    EXPECT_EQ(tr.status, mfpg::RunStatus::Completed) << "seed " << seed << ": " << tr.message;
    EXPECT_EQ(tr.records.size(), 51u);
  }
}

TEST(RunModelFree, GuardHaltsOnDestabilizingStep) {
  mfpg::PgmConfig cfg;
  cfg.step = 5.0;
  cfg.estimator = EstimatorKind::EXACT;
  const auto tr = mfpg::run_modelfree(mfpg::benchmark_system(), benchmark_weights(), benchmark_k0(), benchmark_dataset(1), cfg, {});
  EXPECT_EQ(tr.status, mfpg::RunStatus::GuardHalted);
  EXPECT_EQ(tr.halted_at, 1);
  EXPECT_EQ(tr.last_good.K, benchmark_k0().K);
  EXPECT_FALSE(std::isfinite(tr.records.back().gap));
}

}  // namespace
