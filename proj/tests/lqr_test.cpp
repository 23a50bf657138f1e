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

#include <random>

#include "mfpg/experiment.hpp"
#include "mfpg/lqr.hpp"
#include "oracles.hpp"

namespace {

using mfpg::CostWeights;
using mfpg::LinearSystem;
using mfpg::Matrix;
using mfpg::Policy;
using mfpg::Vector;

Matrix s(double x) { return Matrix::Constant(1, 1, x); }

LinearSystem scalar_system(double sw = 0.1) { return {s(0.5), s(1.0), s(sw)}; }
CostWeights unit_weights() { return {s(1.0), s(1.0)}; }

CostWeights benchmark_weights() { return {0.001 * Matrix::Identity(3, 3), Matrix::Identity(3, 3)}; }

Policy benchmark_k0() {
  const auto sys = mfpg::benchmark_system();
  return mfpg::solve_dare(sys, CostWeights(0.1 * Matrix::Identity(3, 3), Matrix::Identity(3, 3))).K;
}

TEST(SpectralRadius, Examples) {
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 0.5, -0.9;
  EXPECT_NEAR(mfpg::spectral_radius(d), 0.9, 1e-12);
  EXPECT_NEAR(mfpg::spectral_radius(Matrix::Identity(3, 3)), 1.0, 1e-12);
  EXPECT_THROW(mfpg::spectral_radius(Matrix::Zero(2, 3)), mfpg::DimensionError);
}

TEST(SpectralRadius, BenchmarkOpenLoopMatchesCharacteristicRoot) {
  // Symmetric tridiagonal with diagonal a and off-diagonal b has eigenvalues
  // a + b * 2 cos(j pi / 4), j = 1..3; the largest is 1.01 + 0.01 sqrt(2).
  const double expect = 1.01 + 0.01 * std::sqrt(2.0);
  EXPECT_NEAR(mfpg::spectral_radius(mfpg::benchmark_system().A), expect, 1e-10);
  EXPECT_NEAR(expect, 1.0241, 1e-4);
}

TEST(Lyapunov, ScalarClosedForm) {
  const Matrix p = mfpg::solve_policy_lyapunov(scalar_system(), unit_weights(), Policy(s(0.0)));
  EXPECT_NEAR(p(0, 0), 4.0 / 3.0, 1e-12);
}

TEST(Lyapunov, OneStepSystemReturnsQ) {
  Matrix q(2, 2);
  q << 2, 0.5, 0.5, 1;
  const LinearSystem sys(Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  const Matrix p = mfpg::solve_policy_lyapunov(sys, CostWeights(q, Matrix::Identity(2, 2)), Policy(Matrix::Zero(2, 2)));
  EXPECT_LE((p - q).norm(), 1e-14);
}

TEST(Lyapunov, MatchesRiccatiSolutionAtOptimum) {
  const auto sys = mfpg::benchmark_system();
  const auto opt = mfpg::solve_dare(sys, benchmark_weights());
  const Matrix p = mfpg::solve_policy_lyapunov(sys, benchmark_weights(), opt.K);
  EXPECT_LE((p - opt.P).norm(), 1e-9 * opt.P.norm());
}

TEST(Lyapunov, RejectsUnstablePolicy) {
  EXPECT_THROW(mfpg::solve_policy_lyapunov(scalar_system(), unit_weights(), Policy(s(0.6))), mfpg::StabilityError);
  EXPECT_THROW(mfpg::average_cost(mfpg::benchmark_system(), benchmark_weights(), Policy(Matrix::Zero(3, 3))),
               mfpg::StabilityError);
}

TEST(Lyapunov, ResidualOnRandomPlants) {
  std::mt19937_64 gen(7);
  for (int t = 0; t < 20; ++t) {
    const auto pl = oracle::random_plant(gen, 1 + t % 4, 1 + (t / 4) % 4);
    const LinearSystem sys(pl.A, pl.B, pl.Sw);
    const CostWeights w(pl.Q, pl.R);
    const Policy k(pl.K);
    const Matrix p = mfpg::solve_policy_lyapunov(sys, w, k);
    const Matrix ak = pl.A + pl.B * pl.K;
    const Matrix res = p - ak.transpose() * p * ak - (pl.Q + pl.K.transpose() * pl.R * pl.K);
    EXPECT_LE(res.norm(), 1e-10 * std::max(1.0, p.norm()));
    EXPECT_LE((p - oracle::value_matrix(pl.A, pl.B, pl.Q, pl.R, pl.K)).norm(), 1e-9 * std::max(1.0, p.norm()));
    EXPECT_GT(mfpg::min_eigenvalue(p), 0.0);
  }
}

TEST(StationaryCovariance, Examples) {
  const Matrix sig = mfpg::stationary_covariance(scalar_system(), Policy(s(0.0)));
  EXPECT_NEAR(sig(0, 0), 2.0 / 15.0, 1e-14);
  const LinearSystem dead(s(0.5), s(1.0), s(0.1));
  EXPECT_NEAR(mfpg::stationary_covariance(dead, Policy(s(-0.5)))(0, 0), 0.1, 1e-15);
  const LinearSystem quiet(Matrix::Identity(2, 2) * 0.5, Matrix::Identity(2, 2), Matrix::Zero(2, 2));
  EXPECT_EQ(mfpg::stationary_covariance(quiet, Policy(Matrix::Zero(2, 2))).norm(), 0.0);
}

TEST(StationaryCovariance, DominatesNoiseAndSolvesFixedPoint) {
  const auto sys = mfpg::benchmark_system();
  const Policy k = benchmark_k0();
  const Matrix sig = mfpg::stationary_covariance(sys, k);
  const Matrix ak = mfpg::closed_loop(sys, k);
  EXPECT_LE((sig - ak * sig * ak.transpose() - sys.sigma_w).norm(), 1e-10 * std::max(1.0, sig.norm()));
  EXPECT_GE(mfpg::min_eigenvalue(Matrix(sig - sys.sigma_w)), -1e-12);
  EXPECT_LE((sig - oracle::state_covariance(sys.A, sys.B, sys.sigma_w, k.K)).norm(), 1e-10);
}

TEST(AverageCost, Examples) {
  EXPECT_NEAR(mfpg::average_cost(scalar_system(), unit_weights(), Policy(s(0.0))), 0.4 / 3.0, 1e-14);
  EXPECT_NEAR(mfpg::average_cost(scalar_system(1e-14), unit_weights(), Policy(s(0.0))), 0.0, 1e-13);
}

TEST(AverageCost, DualityOnRandomPlants) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int sysno = 0; sysno < 10; ++sysno) {
    const auto pl = oracle::random_plant(gen, 1 + sysno % 4, 1 + (sysno / 2) % 4);
    const LinearSystem sys(pl.A, pl.B, pl.Sw);
    const CostWeights w(pl.Q, pl.R);
    int accepted = 0;
    while (accepted < 50) {
      Matrix k = pl.K;
      for (Eigen::Index i = 0; i < k.size(); ++i) k(i) += 0.1 * normal(gen);
      if (oracle::spectral_radius(pl.A + pl.B * k) >= 0.95) continue;
      ++accepted;
      const auto v = mfpg::evaluate_policy(sys, w, Policy(k));
      const double by_cov = ((pl.Q + k.transpose() * pl.R * k) * v.sigma_k).trace();
      EXPECT_NEAR(v.cost, by_cov, 1e-9 * std::abs(by_cov));
      const Matrix p_ref = oracle::value_matrix(pl.A, pl.B, pl.Q, pl.R, k);
      EXPECT_NEAR(v.cost, (p_ref * pl.Sw).trace(), 1e-9 * std::abs(v.cost));
    }
  }
}

TEST(AverageCost, OptimalCostMatchesRollout) {
  const auto sys = mfpg::benchmark_system();
  const auto opt = mfpg::solve_dare(sys, benchmark_weights());
  const double c = mfpg::average_cost(sys, benchmark_weights(), opt.K);
  const double mc = oracle::rollout_cost(sys.A, sys.B, sys.sigma_w, benchmark_weights().Q, benchmark_weights().R, opt.K.K,
                                         1000000, 99);
  EXPECT_NEAR(mc, c, 0.01 * c);
}

TEST(Gradient, ScalarClosedForm) {
  const Matrix g = mfpg::exact_gradient(scalar_system(), unit_weights(), Policy(s(0.0)));
  EXPECT_NEAR(g(0, 0), 8.0 / 45.0, 1e-13);
}

TEST(Gradient, VanishesAtOptimum) {
  const auto sys = mfpg::benchmark_system();
  const auto opt = mfpg::solve_dare(sys, benchmark_weights());
  EXPECT_LE(mfpg::exact_gradient(sys, benchmark_weights(), opt.K).norm(), 1e-8);
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  int checked = 0;
  while (checked < 20) {
    const auto pl = oracle::random_plant(gen, 1 + checked % 3, 1 + (checked / 3) % 3);
    const LinearSystem sys(pl.A, pl.B, pl.Sw);
    const CostWeights w(pl.Q, pl.R);
    const Matrix g = mfpg::exact_gradient(sys, w, Policy(pl.K));
    const double h = 1e-6;
    Matrix fd(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      Matrix kp = pl.K, km = pl.K;
      kp(i) += h;
      km(i) -= h;
      fd(i) = (mfpg::average_cost(sys, w, Policy(kp)) - mfpg::average_cost(sys, w, Policy(km))) / (2 * h);
    }
    EXPECT_LE((fd - g).norm(), 1e-5 * std::max(g.norm(), 1e-3)) << "plant " << checked;
    ++checked;
  }
}

TEST(Dare, ScalarQuadraticFormula) {
  // P^2 - 0.25 P - 1 = 0 for A = 0.5, B = Q = R = 1.
  const auto opt = mfpg::solve_dare(scalar_system(), unit_weights());
  const double p = (0.25 + std::sqrt(4.0625)) / 2.0;
  EXPECT_NEAR(opt.P(0, 0), p, 1e-12);
  EXPECT_NEAR(opt.K.K(0, 0), -0.5 * p / (1.0 + p), 1e-12);
  EXPECT_NEAR(opt.P(0, 0), 1.132782, 1e-6);
  EXPECT_NEAR(opt.K.K(0, 0), -0.265564, 1e-6);
}

TEST(Dare, CheapControlIsDeadbeat) {
  const auto sys = mfpg::benchmark_system();
  const auto opt = mfpg::solve_dare(sys, CostWeights(Matrix::Identity(3, 3), 1e-8 * Matrix::Identity(3, 3)));
  EXPECT_LE((opt.K.K + sys.A).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Dare, BenchmarkInitialGainAgreesWithValueIteration) {
  const auto sys = mfpg::benchmark_system();
  const CostWeights w100(0.1 * Matrix::Identity(3, 3), Matrix::Identity(3, 3));
  const auto opt = mfpg::solve_dare(sys, w100);
  EXPECT_LE(mfpg::riccati_residual(sys, w100, opt.P), 1e-10 * std::max(1.0, opt.P.norm()));
  const Matrix p_ref = oracle::riccati_iteration(sys.A, sys.B, w100.Q, w100.R);
  EXPECT_LE((opt.P - p_ref).norm(), 1e-9 * p_ref.norm());
  EXPECT_LE((opt.K.K - oracle::riccati_gain(sys.A, sys.B, w100.R, p_ref)).norm(), 1e-9);
  const Matrix p_k = mfpg::solve_policy_lyapunov(sys, w100, opt.K);
  EXPECT_LE((p_k - opt.P).norm(), 1e-9 * opt.P.norm());
}

TEST(Dare, OptimumBeatsRandomGains) {
  const auto sys = mfpg::benchmark_system();
  const auto w = benchmark_weights();
  const auto opt = mfpg::solve_dare(sys, w);
  const double c_star = mfpg::average_cost(sys, w, opt.K);
  std::mt19937_64 gen(5);
  std::normal_distribution<double> normal(0.0, 0.2);
  int n = 0;
  while (n < 100) {
    Matrix k = opt.K.K;
    for (Eigen::Index i = 0; i < k.size(); ++i) k(i) += normal(gen);
    if (!mfpg::is_stabilizing(sys, Policy(k))) continue;
    ++n;
    EXPECT_GE(mfpg::average_cost(sys, w, Policy(k)), c_star * (1 - 1e-12));
  }
}

TEST(Dare, UnstabilizableSystemFails) {
  Matrix a = Matrix::Identity(2, 2) * 1.2;
  Matrix b(2, 1);
  b << 1, 0;
  const LinearSystem sys(a, b, Matrix::Identity(2, 2));
  EXPECT_THROW(mfpg::solve_dare(sys, CostWeights(Matrix::Identity(2, 2), s(1.0))), mfpg::StabilizabilityError);
}

TEST(NoiseLift, Examples) {
  Vector expect(6);
  expect << 0.1, 0, 0, 0.1, 0, 0.1;
  EXPECT_LE((mfpg::noise_lift(0.1 * Matrix::Identity(3, 3)) - expect).norm(), 1e-15);
  EXPECT_EQ(mfpg::noise_lift(Matrix::Zero(3, 3)), Vector::Zero(6));
  Matrix sw(2, 2);
  sw << 2, 1, 1, 2;
  Vector e2(3);
  e2 << 2, 1, 2;
  EXPECT_LE((mfpg::noise_lift(sw) - e2).norm(), 1e-12);
  Matrix bad(2, 2);
  bad << 2, 1, 0, 2;
  EXPECT_THROW(mfpg::noise_lift(bad), mfpg::SymmetryError);
}

TEST(NoiseLift, PairsWithVecsAsTrace) {
  std::mt19937_64 gen(13);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + t % 5;
    Matrix g(n, n), h(n, n);
    for (int i = 0; i < n * n; ++i) g(i) = normal(gen), h(i) = normal(gen);
    const Matrix sw = g * g.transpose();
    const Matrix p = h + h.transpose();
    const double expect = (p * sw).trace();
    EXPECT_NEAR(mfpg::vecs(p).dot(mfpg::noise_lift(sw)), expect, 1e-11 * std::max(1.0, p.norm() * sw.norm()));
  }
}

TEST(ExactXi, Examples) {
  const auto xi = mfpg::exact_xi(scalar_system(), unit_weights(), Policy(s(0.0)));
  Vector expect(3);
  expect << 2.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0;
  EXPECT_LE((xi.coords() - expect).norm(), 1e-12);
  EXPECT_EQ(mfpg::exact_xi(mfpg::benchmark_system(), benchmark_weights(), benchmark_k0()).size(), 21);

  const LinearSystem no_input(0.5 * Matrix::Identity(2, 2), Matrix::Zero(2, 1), Matrix::Identity(2, 2));
  const CostWeights w(Matrix::Identity(2, 2), s(1.0));
  const auto xi0 = mfpg::exact_xi(no_input, w, Policy(Matrix::Zero(1, 2)));
  EXPECT_EQ(xi0.coords().head(3).norm(), 0.0);
  EXPECT_LE((xi0.value_block() - mfpg::vecs(Matrix(Matrix::Identity(2, 2) / 0.75))).norm(), 1e-12);
}

TEST(ExactGamma, ScalarHandEvaluation) {
  Vector x(1), u(1);
  x << 1;
  u << 0;
  const Vector g = mfpg::exact_gamma(scalar_system(), Policy(s(0.0)), x, u);
  Vector expect(3);
  expect << 0, 0, 0.75;
  EXPECT_LE((g - expect).norm(), 1e-15);
  const auto xi = mfpg::exact_xi(scalar_system(), unit_weights(), Policy(s(0.0)));
  EXPECT_NEAR(g.dot(xi.coords()), 1.0, 1e-12);
  EXPECT_EQ(mfpg::stage_cost(unit_weights(), Policy(s(0.0)), x), 1.0);

  x << 0;
  EXPECT_EQ(mfpg::exact_gamma(scalar_system(), Policy(s(0.0)), x, u).norm(), 0.0);
  EXPECT_EQ(mfpg::stage_cost(unit_weights(), Policy(s(0.0)), x), 0.0);
}

TEST(ExactGamma, BellmanIdentityOnRandomDraws) {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int sysno = 0; sysno < 10; ++sysno) {
    const int nx = 1 + sysno % 4, nu = 1 + (sysno * 3) % 4;
    const auto pl = oracle::random_plant(gen, nx, nu);
    const LinearSystem sys(pl.A, pl.B, pl.Sw);
    const CostWeights w(pl.Q, pl.R);
    for (int draw = 0; draw < 100; ++draw) {
      Matrix k = pl.K;
      for (Eigen::Index i = 0; i < k.size(); ++i) k(i) += 0.05 * normal(gen);
      if (!mfpg::is_stabilizing(sys, Policy(k))) continue;
      Vector x(nx), u(nu);
      for (int i = 0; i < nx; ++i) x(i) = normal(gen);
      for (int i = 0; i < nu; ++i) u(i) = normal(gen);
      const Vector xi = mfpg::exact_xi(sys, w, Policy(k)).coords();
      const double c = mfpg::stage_cost(w, Policy(k), x);
      EXPECT_NEAR(mfpg::exact_gamma(sys, Policy(k), x, u).dot(xi), c, 1e-10 * std::max(1.0, xi.norm() * x.squaredNorm()));
    }
  }
}

TEST(ExactGamma, AgreesWithSampledConditionalMean) {
  // E[vecv(x+)] estimated by simulation; the W terms of the sampled
  // regressor average out to the closed form.
  const auto sys = mfpg::benchmark_system();
  const Policy k = benchmark_k0();
  Vector x(3), u(3);
  x << 0.3, -1.0, 0.5;
  u << 0.2, 0.1, -0.4;
  std::mt19937_64 gen(23);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.1));
  Vector mean = Vector::Zero(6);
  const int n = 1000000;
  for (int t = 0; t < n; ++t) {
    Vector w(3);
    for (int i = 0; i < 3; ++i) w(i) = normal(gen);
    mean += mfpg::vecv(Vector(sys.A * x + sys.B * u + w));
  }
  mean /= n;
  const Vector lift = mfpg::noise_lift(sys.sigma_w);
  const Vector kx = k.K * x;
  Vector sampled(21);
  sampled << 2.0 * mfpg::kron(x, Vector(u - kx)), mfpg::vecv(u) - mfpg::vecv(kx), mfpg::vecv(x) + lift - mean;
  EXPECT_LE((sampled - mfpg::exact_gamma(sys, k, x, u)).norm(), 5e-3);
}

TEST(Lipschitz, ScalarAtOptimum) {
  const auto sys = scalar_system();
  const auto w = unit_weights();
  const double c = mfpg::average_cost(sys, w, mfpg::solve_dare(sys, w).K);
  const auto lc = mfpg::lipschitz_constants(sys, w, c, c);
  EXPECT_NEAR(lc.b_k, 0.5 * c / 0.1, 1e-14);
  const double h_expect = 6.0 * std::pow(c / 0.1, 2) * (2.0 * lc.b_k * lc.b_k + lc.b_k) * 0.1;
  EXPECT_NEAR(lc.h_c, h_expect, 1e-12 * h_expect);
}

TEST(Lipschitz, MonotoneInCost) {
  const auto sys = mfpg::benchmark_system();
  const auto w = benchmark_weights();
  const double c_star = mfpg::average_cost(sys, w, mfpg::solve_dare(sys, w).K);
  double prev_b = 0.0, prev_h = 0.0;
  for (double f = 1.0; f < 10.0; f *= 1.3) {
    const auto lc = mfpg::lipschitz_constants(sys, w, f * c_star, c_star);
    EXPECT_GE(lc.b_k, prev_b);
    EXPECT_GE(lc.h_c, prev_h);
    prev_b = lc.b_k;
    prev_h = lc.h_c;
  }
  EXPECT_THROW(mfpg::lipschitz_constants(sys, w, 0.5 * c_star, c_star), mfpg::DomainError);
  const LinearSystem quiet(sys.A, sys.B, Matrix::Zero(3, 3));
  EXPECT_THROW(mfpg::lipschitz_constants(quiet, w, 2.0, 1.0), mfpg::DomainError);
}

TEST(Lipschitz, BenchmarkInitialGainFinite) {
  const auto sys = mfpg::benchmark_system();
  const auto w = benchmark_weights();
  const double c_star = mfpg::average_cost(sys, w, mfpg::solve_dare(sys, w).K);
  const double c0 = mfpg::average_cost(sys, w, benchmark_k0());
  const auto lc = mfpg::lipschitz_constants(sys, w, c0, c_star);
  EXPECT_TRUE(std::isfinite(lc.b_k) && lc.b_k > 0.0);
  EXPECT_TRUE(std::isfinite(lc.h_c) && lc.h_c > 0.0);
}

TEST(Types, ValidateInputs) {
  EXPECT_THROW(LinearSystem(Matrix::Zero(2, 3), Matrix::Zero(2, 1), Matrix::Identity(2, 2)), mfpg::DimensionError);
  EXPECT_THROW(LinearSystem(Matrix::Zero(2, 2), Matrix::Zero(3, 1), Matrix::Identity(2, 2)), mfpg::DimensionError);
  EXPECT_THROW(LinearSystem(Matrix::Zero(2, 2), Matrix::Zero(2, 1), -Matrix::Identity(2, 2)), mfpg::DomainError);
  EXPECT_THROW(CostWeights(Matrix::Zero(2, 2), s(1.0)), mfpg::DomainError);
  Matrix asym(2, 2);
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(CostWeights(asym, s(1.0)), mfpg::SymmetryError);
}

}  // namespace
