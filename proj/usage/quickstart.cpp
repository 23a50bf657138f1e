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


// Walks one policy-gradient loop on the three-state benchmark plant: solve
// the Riccati equation, collect off-policy data, estimate the Bellman
// parameter for the initial gain, then take model-free NPG steps.

#include <iostream>

#include "mfpg/mfpg.hpp"

int main() {
  const mfpg::LinearSystem sys = mfpg::benchmark_system();
  const mfpg::CostWeights w(0.001 * mfpg::Matrix::Identity(3, 3), mfpg::Matrix::Identity(3, 3));
  const mfpg::Matrix eye = mfpg::Matrix::Identity(3, 3);

  const auto opt = mfpg::solve_dare(sys, w);
  const mfpg::Policy k0 = mfpg::solve_dare(sys, mfpg::CostWeights(100.0 * w.Q, w.R)).K;
  std::cout << "C(K*) = " << mfpg::average_cost(sys, w, opt.K) << "\n"
            << "C(K0) = " << mfpg::average_cost(sys, w, k0) << "\n";

  const auto ds = mfpg::collect_dataset(sys, 100, eye, eye, 1);
  const auto samples = mfpg::build_samples(ds.triples, k0, w, mfpg::noise_lift(sys.sigma_w));
  const mfpg::Vector truth = mfpg::exact_xi(sys, w, k0).coords();

  const auto ls = mfpg::ls_estimate(samples, 3, 3);
  const auto pd = mfpg::cspd(samples, mfpg::BallSet::origin(21, 1.0), mfpg::Vector::Zero(21), 0.0,
                             mfpg::sqrt_schedule(samples.size(), 0.001));
  std::cout << "least-squares error  " << (ls.coords() - truth).norm() << "\n"
            << "primal-dual error    " << (pd.xi_hat - truth).norm() << "\n";

  mfpg::PgmConfig cfg;
  cfg.estimator = mfpg::EstimatorKind::LS;
  cfg.max_iters = 10;
  const auto trace = mfpg::run_modelfree(sys, w, k0, ds, cfg, {});
  for (const auto& r : trace.records) {
    std::cout << "iteration " << r.iteration << "  gap " << r.gap << "  rho " << r.spectral_radius << "\n";
  }
  std::cout << "status: " << mfpg::to_string(trace.status) << "\n";
  return 0;
}
