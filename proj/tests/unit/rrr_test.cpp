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

#include <cmath>

#include "kftune/dataset.hpp"
#include "kftune/errors.hpp"
#include "kftune/rrr.hpp"

namespace kftune {
namespace {

Vector smd_x0() {
  Vector X(5);
  X << 1.0, 0.0, 4.0, 0.4, 0.6;
  return X;
}

Dataset q0_data(std::uint64_t seed, double r_scale = 1.0) {
  return simulate(make_smd_model(), smd_x0(),
                  NoiseSpec{Matrix(r_scale * Eigen::Vector2d(0.001, 0.004).asDiagonal()),
                            Matrix::Zero(2, 2)},
                  100, seed);
}

Vector perturbed_start() {
  Vector X = smd_x0();
  X.tail(3) << 4.8, 0.32, 0.72;
  return X;
}

TEST(RunRrr, NoiseFreeTruthStartKeepsParameters) {
  TuningConfig c = rrr_q0_config();
  c.max_iters = 5;
  const TuningResult r = run_rrr(make_smd_model(), q0_data(1, 0.0), c, smd_x0());
  ASSERT_FALSE(r.diverged) << r.message;
  for (const auto& rec : r.history)
    EXPECT_LE((rec.theta_final - smd_x0().tail(3)).cwiseAbs().maxCoeff(), 1e-10)
        << "iteration " << rec.iteration;
}

TEST(RunRrr, ParametersSettleEarly) {
  const TuningResult r = run_rrr(make_smd_model(), q0_data(2), rrr_q0_config(), perturbed_start());
  ASSERT_FALSE(r.diverged) << r.message;
  ASSERT_GE(r.history.size(), 3u);
  const Vector rel = (r.history[2].theta_final - r.theta_hat).cwiseQuotient(r.theta_hat);
  EXPECT_LT(rel.cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_NEAR(r.theta_hat(0), 4.0, 0.2);
}

TEST(RunRrr, FixedIterationCountAndHistory) {
  TuningConfig c = rrr_q0_config();
  c.max_iters = 4;
  c.fixed_iterations = true;
  const TuningResult r = run_rrr(make_smd_model(), q0_data(3), c, perturbed_start());
  EXPECT_EQ(r.iterations_used, 4u);
  ASSERT_EQ(r.history.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(r.history[i].iteration, i + 1);
    EXPECT_EQ(r.history[i].theta_trace.size(), 101u);
  }
  EXPECT_EQ(r.history[0].theta0, perturbed_start().tail(3));
  EXPECT_EQ(r.history[1].theta0, r.history[0].theta_final);
  EXPECT_EQ(r.Q_hat.rows(), 5);
  EXPECT_EQ(r.Q_hat.diagonal().tail(3), Vector::Zero(3));
}

TEST(RunRrr, DeterministicForSameInputs) {
  const Dataset ds = q0_data(4);
  const TuningResult a = run_rrr(make_smd_model(), ds, rrr_q0_config(), perturbed_start());
  const TuningResult b = run_rrr(make_smd_model(), ds, rrr_q0_config(), perturbed_start());
  EXPECT_EQ(a.theta_hat, b.theta_hat);
  EXPECT_EQ(a.R_hat, b.R_hat);
  EXPECT_EQ(a.history.size(), b.history.size());
  EXPECT_EQ(a.history.back().costs, b.history.back().costs);
}

TEST(RunRrr, DivergenceIsFlaggedNotThrown) {
  TuningConfig c = rrr_q0_config();
  c.filter.divergence_growth = 1e-6;
  const TuningResult r = run_rrr(make_smd_model(), q0_data(5), c, perturbed_start());
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.converged);
  EXPECT_NE(r.message.find("step"), std::string::npos) << r.message;
}

TEST(RunRrr, ProcessNoiseModeEstimatesQ) {
  const Dataset ds = simulate(make_smd_model(), smd_x0(),
                              NoiseSpec{Matrix(Eigen::Vector2d(0.001, 0.004).asDiagonal()),
                                        Matrix(Eigen::Vector2d(0.001, 0.002).asDiagonal())},
                              100, 6);
  TuningConfig c = rrr_qpos_config();
  c.max_iters = 30;
  const TuningResult r = run_rrr(make_smd_model(), ds, c, perturbed_start());
  ASSERT_FALSE(r.diverged) << r.message;
  EXPECT_GT(r.Q_hat(0, 0), 0.0);
  EXPECT_EQ(r.Q_hat(0, 1), 0.0);
  EXPECT_EQ(r.P0_hat.diagonal().head(2), Vector::Zero(2));
}

TEST(TuningConfig, Validation) {
  TuningConfig c = rrr_qpos_config();
  c.estimator.r_method = RMethod::kDynResidue;
  EXPECT_THROW(c.validate(), ConfigError);
  c.q_zero = true;
  EXPECT_NO_THROW(c.validate());
  c.initial.R_diag = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(MaxRelativeChange, LargestComponent) {
  EXPECT_NEAR(max_relative_change(Eigen::Vector2d(1.1, 2.0), Eigen::Vector2d(1.0, 2.0)), 0.1,
              1e-15);
  EXPECT_EQ(max_relative_change(Eigen::Vector2d(1.0, 2.0), Eigen::Vector2d(1.0, 2.0)), 0.0);
}

TEST(X0Policy, ParseRoundTrip) {
  EXPECT_EQ(to_string(parse_x0_policy("given")), "given");
  EXPECT_EQ(to_string(parse_x0_policy("smoothed")), "smoothed");
  EXPECT_THROW(parse_x0_policy("random"), ConfigError);
}

}  // namespace
}  // namespace kftune
