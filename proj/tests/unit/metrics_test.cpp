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

#include "kftune/errors.hpp"
#include "kftune/metrics.hpp"

namespace kftune {
namespace {

SimEstimate make_sim(const Vector& theta, double var) {
  SimEstimate s;
  s.theta = theta;
  s.P_theta = var * Matrix::Identity(theta.size(), theta.size());
  s.P_theta(0, 1) = s.P_theta(1, 0) = 0.5 * var;
  s.R = Matrix::Identity(2, 2);
  s.Q = 2.0 * Matrix::Identity(2, 2);
  s.costs.J[1] = 2.0;
  return s;
}

McReference reference() {
  McReference ref;
  ref.theta_true = Eigen::Vector3d(4.0, 0.4, 0.6);
  ref.R_true = Matrix::Identity(2, 2);
  ref.Q_true = Matrix::Identity(2, 2);
  return ref;
}

TEST(AggregateMc, IdenticalSimulationsGiveExactRatios) {
  const std::vector<SimEstimate> sims(4, make_sim(Eigen::Vector3d(4.0, 0.4, 0.6), 0.01));
  const McMetrics m = aggregate_mc(sims, reference());
  EXPECT_EQ(m.n_used, 4u);
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(m.theta_ratio(i), 1.0);
    EXPECT_EQ(m.consistency_ratio(i), 0.0);
  }
  EXPECT_DOUBLE_EQ(m.r_ratio(0), 1.0);
  EXPECT_DOUBLE_EQ(m.q_ratio(1), 2.0);
  EXPECT_DOUBLE_EQ(m.cost_mean[1], 2.0);
  EXPECT_EQ(m.cost_std[1], 0.0);
  EXPECT_NEAR(m.spread_factor(0), 0.1 * 100.0 / 4.0, 1e-12);
}

TEST(AggregateMc, CorrelationMatrixHasUnitDiagonal) {
  const std::vector<SimEstimate> sims(3, make_sim(Eigen::Vector3d(4.0, 0.4, 0.6), 0.04));
  const McMetrics m = aggregate_mc(sims, reference());
  EXPECT_EQ(m.correlation_matrix.diagonal(), Vector::Ones(3));
  EXPECT_DOUBLE_EQ(m.correlation_matrix(0, 1), 0.5);
  EXPECT_EQ(m.correlation_matrix, m.correlation_matrix.transpose());
}

TEST(AggregateMc, ZeroDenominatorsAreUndefined) {
  const std::vector<SimEstimate> sims(2, make_sim(Eigen::Vector3d(4.0, 0.4, 0.6), 0.01));
  McReference ref = reference();
  ref.Q_true = Matrix::Zero(2, 2);
  const McMetrics m = aggregate_mc(sims, ref);
  EXPECT_TRUE(std::isnan(m.q_ratio(0)));
  EXPECT_TRUE(std::isnan(m.crb_ratio(2)));
  auto listed = [&](const std::string& name) {
    return std::find(m.undefined.begin(), m.undefined.end(), name) != m.undefined.end();
  };
  EXPECT_TRUE(listed("q_ratio[0]"));
  EXPECT_TRUE(listed("crb_ratio[2]"));
  EXPECT_FALSE(listed("r_ratio[0]"));
}

TEST(AggregateMc, PerSimulationReference) {
  std::vector<SimEstimate> sims{make_sim(Eigen::Vector3d(4.0, 0.4, 0.6), 0.01),
                                make_sim(Eigen::Vector3d(4.4, 0.4, 0.6), 0.04)};
  McReference ref = reference();
  ref.per_sim = {{Eigen::Vector3d(4.0, 0.4, 0.6), Vector::Constant(3, 0.1), Matrix::Identity(2, 2)},
                 {Eigen::Vector3d(4.0, 0.4, 0.6), Vector::Constant(3, 0.1), Matrix::Identity(2, 2)}};
  const McMetrics m = aggregate_mc(sims, ref);
  EXPECT_DOUBLE_EQ(m.theta_ratio(0), 0.5 * (1.0 + 1.1));
  EXPECT_DOUBLE_EQ(m.crb_ratio(0), 0.5 * (1.0 + 2.0));
  ref.per_sim.pop_back();
  EXPECT_THROW(aggregate_mc(sims, ref), Error);
}

TEST(AggregateMc, NeedsTwoSimulations) {
  EXPECT_THROW(aggregate_mc({make_sim(Eigen::Vector3d(4.0, 0.4, 0.6), 0.01)}, reference()),
               Error);
}

TEST(Consistency, MatchedScatterGivesUnitRatio) {
  const Vector truth = Vector::Constant(1, 10.0);
  // Population scatter of {9, 11} is 1; the reported sigma is 1.
  const ConsistencyStats c = consistency_stats(
      {Vector::Constant(1, 9.0), Vector::Constant(1, 11.0)},
      {Vector::Constant(1, 1.0), Vector::Constant(1, 1.0)}, truth);
  EXPECT_DOUBLE_EQ(c.consistency_ratio(0), 1.0);
  EXPECT_DOUBLE_EQ(c.spread_factor(0), std::sqrt(2.0) * 10.0);
}

TEST(CorrelationMatrix, NormalisesCovariance) {
  Matrix P(2, 2);
  P << 4.0, 1.0, 1.0, 1.0;
  const Matrix C = correlation_matrix(P);
  EXPECT_DOUBLE_EQ(C(0, 1), 0.5);
  EXPECT_EQ(C(1, 1), 1.0);
}

}  // namespace
}  // namespace kftune
