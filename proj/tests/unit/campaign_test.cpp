// Copyright 2026 The kftune Authors
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

#include <atomic>
#include <vector>

#include "kftune/campaign.hpp"
#include "kftune/dataset.hpp"
#include "kftune/errors.hpp"

namespace kftune {
namespace {

TruthConfig small_truth() {
  TruthConfig t = smd_truth(false);
  t.seed = 99;
  return t;
}

TuningConfig small_tuning() {
  TuningConfig c = rrr_q0_config();
  c.n_sims = 3;
  c.max_iters = 6;
  return c;
}

TEST(MonteCarlo, IndependentOfThreadCount) {
  const ModelSpec m = make_smd_model();
  const MonteCarloReport a = run_monte_carlo(m, small_truth(), small_tuning(), {true, false, 1});
  const MonteCarloReport b = run_monte_carlo(m, small_truth(), small_tuning(), {true, false, 3});
  ASSERT_EQ(a.sims.size(), 3u);
  ASSERT_EQ(b.sims.size(), 3u);
  for (std::size_t s = 0; s < 3; ++s) {
    EXPECT_EQ(a.sims[s].index, s);
    EXPECT_EQ(a.sims[s].seed, b.sims[s].seed);
    EXPECT_EQ(a.sims[s].theta_init, b.sims[s].theta_init);
    EXPECT_EQ(a.sims[s].tuning.theta_hat, b.sims[s].tuning.theta_hat);
    ASSERT_TRUE(a.sims[s].nr && b.sims[s].nr);
    EXPECT_EQ(a.sims[s].nr->theta_hat, b.sims[s].nr->theta_hat);
  }
  EXPECT_EQ(a.metrics.theta_ratio, b.metrics.theta_ratio);
  EXPECT_EQ(a.metrics.cost_mean, b.metrics.cost_mean);
}

TEST(MonteCarlo, SimulationsUseDistinctStreams) {
  const ModelSpec m = make_smd_model();
  const SimOutcome s0 = run_single_sim(m, small_truth(), small_tuning(), {false, false, 1}, 0);
  const SimOutcome s1 = run_single_sim(m, small_truth(), small_tuning(), {false, false, 1}, 1);
  EXPECT_NE(s0.seed, s1.seed);
  EXPECT_NE(s0.theta_init, s1.theta_init);
  EXPECT_FALSE(s0.nr.has_value());
  EXPECT_FALSE(s0.tuning.filter);
  const Vector rel = (s0.theta_init - small_truth().theta).cwiseQuotient(small_truth().theta);
  EXPECT_LE(rel.cwiseAbs().maxCoeff(), 0.2);
}

TEST(MonteCarlo, TooFewUsableSimulationsIsAnError) {
  TuningConfig c = small_tuning();
  c.filter.divergence_growth = 1e-6;
  EXPECT_THROW(run_monte_carlo(make_smd_model(), small_truth(), c, {false, false, 1}), Error);
}

TEST(NoiseAgreement, RatioToInjectedNoise) {
  Dataset ds;
  ds.Q = Matrix::Identity(1, 1);
  ds.Z.resize(2);
  ds.v = {Vector::Constant(1, 1.0), Vector::Constant(1, -3.0)};
  ds.w = {Vector::Constant(1, 2.0), Vector::Constant(1, 0.0)};
  const NoiseAgreement n =
      noise_agreement(ds, Matrix::Constant(1, 1, 10.0), Matrix::Constant(2, 2, 4.0), 1);
  EXPECT_DOUBLE_EQ(n.r_ratio(0), 2.0);
  EXPECT_DOUBLE_EQ(n.q_ratio(0), 2.0);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(37);
  parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_EQ(campaign_threads(5), 5u);
  EXPECT_GE(campaign_threads(0), 1u);
}

std::vector<IterationRecord> history_of(const std::vector<double>& j5) {
  std::vector<IterationRecord> h(j5.size());
  for (std::size_t i = 0; i < j5.size(); ++i) h[i].costs.J[5] = j5[i];
  return h;
}

TEST(J5Tail, DetectsOscillationOnly) {
  EXPECT_TRUE(j5_tail_oscillates(history_of({5, 4, 3, 2, 1, 2, 1, 2, 1, 2})));
  EXPECT_FALSE(j5_tail_oscillates(history_of({5, 4, 3, 2, 1, 0.5, 0.4, 0.3, 0.2, 0.1})));
  EXPECT_FALSE(j5_tail_oscillates(history_of({1, 1 + 1e-9, 1, 1 + 1e-9, 1, 1 + 1e-9})));
  EXPECT_FALSE(j5_tail_oscillates(history_of({1, 2, 1})));
  // Only the last ten values count.
  EXPECT_FALSE(j5_tail_oscillates(history_of({1, 2, 1, 2, 1, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1})));
}

TEST(StandardMethods, NamesAndEstimators) {
  const auto methods = standard_methods(rrr_qpos_config());
  std::vector<std::string> names;
  for (const auto& m : methods) names.push_back(m.name);
  EXPECT_EQ(names, (std::vector<std::string>{"reference", "iim", "bavdekar", "mt", "ms"}));
  EXPECT_EQ(methods[1].tuning.estimator.p0_method, P0Method::kIim);
  EXPECT_EQ(methods[2].tuning.estimator.p0_method, P0Method::kSmoothed);
  EXPECT_EQ(methods[3].tuning.estimator.r_method, RMethod::kMt);
  EXPECT_EQ(methods[4].tuning.estimator.q_method, QMethod::kMs);
}

TEST(MethodFlags, RatioDriftAndConvergence) {
  MonteCarloReport r;
  r.sims.resize(2);
  r.n_converged = 2;
  r.metrics.r_ratio = Eigen::Vector2d(1.1, 0.7);
  MethodFlags f = method_flags(r);
  EXPECT_TRUE(f.r_drift);
  EXPECT_TRUE(f.all_converged);
  EXPECT_EQ(f.oscillating, 0u);
  r.metrics.r_ratio = Eigen::Vector2d(1.1, 0.9);
  r.n_converged = 1;
  f = method_flags(r);
  EXPECT_FALSE(f.r_drift);
  EXPECT_FALSE(f.all_converged);
}

}  // namespace
}  // namespace kftune
