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
#include "kftune/nr.hpp"
#include "test_models.hpp"

namespace kftune {
namespace {

Vector smd_x0() {
  Vector X(5);
  X << 1.0, 0.0, 4.0, 0.4, 0.6;
  return X;
}

Dataset q0_data(std::uint64_t seed) {
  return simulate(make_smd_model(), smd_x0(),
                  NoiseSpec{Matrix(Eigen::Vector2d(0.001, 0.004).asDiagonal()),
                            Matrix::Zero(2, 2)},
                  100, seed);
}

const Vector kTheta = Eigen::Vector3d(4.0, 0.4, 0.6);

TEST(NrEstimate, TruthStartConvergesQuickly) {
  const NrResult r = nr_estimate(make_smd_model(), q0_data(1), kTheta);
  EXPECT_TRUE(r.converged) << r.message;
  EXPECT_LE(r.iterations, 6u);
  ASSERT_EQ(r.crb.size(), 3);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_LT(std::abs(r.theta_hat(i) - kTheta(i)), 4.0 * r.crb(i));
  EXPECT_TRUE((r.crb.array() > 0.0).all());
  EXPECT_EQ(r.R_hat.rows(), 2);
  EXPECT_EQ(r.x0_hat, Vector(Eigen::Vector2d(1.0, 0.0)));
}

TEST(NrEstimate, PerturbedStartReachesSameMinimum) {
  const Dataset ds = q0_data(2);
  const NrResult a = nr_estimate(make_smd_model(), ds, kTheta);
  const NrResult b = nr_estimate(make_smd_model(), ds, 1.2 * kTheta);
  ASSERT_TRUE(a.converged && b.converged) << a.message << " / " << b.message;
  EXPECT_LT((a.theta_hat - b.theta_hat).cwiseQuotient(a.theta_hat).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(NrGradient, MatchesFiniteDifferenceOfCost) {
  const ModelSpec m = make_smd_model();
  const Dataset ds = q0_data(3);
  const Vector x0 = Eigen::Vector2d(1.0, 0.0);
  const Vector r = Eigen::Vector2d(0.001, 0.004);
  for (const Vector& theta : {Vector(kTheta), Vector(1.1 * kTheta), Vector(0.9 * kTheta)}) {
    const Vector g = nr_gradient(m, ds, x0, theta, r);
    for (Eigen::Index i = 0; i < 3; ++i) {
      const double h = 1e-5 * std::abs(theta(i));
      Vector tp = theta, tm = theta;
      tp(i) += h;
      tm(i) -= h;
      const double fd =
          (nr_weighted_cost(m, ds, x0, tp, r) - nr_weighted_cost(m, ds, x0, tm, r)) / (2.0 * h);
      EXPECT_NEAR(g(i), fd, 1e-4 * std::max(1.0, std::abs(fd))) << "theta " << i;
    }
  }
}

TEST(NrEstimate, InvariantToChannelOrder) {
  const ModelSpec m = make_smd_model();
  const Dataset ds = q0_data(4);
  ModelSpec swapped = m;
  swapped.measurement_fn = [](const Vector& X) { return Vector(Eigen::Vector2d(X(1), X(0))); };
  Dataset ds2 = ds;
  for (auto& z : ds2.Z) z = Eigen::Vector2d(z(1), z(0));
  const NrResult a = nr_estimate(m, ds, 1.1 * kTheta);
  const NrResult b = nr_estimate(swapped, ds2, 1.1 * kTheta);
  EXPECT_LT((a.theta_hat - b.theta_hat).cwiseQuotient(a.theta_hat).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(a.R_hat(0, 0), b.R_hat(1, 1), 1e-9 * a.R_hat(0, 0));
}

TEST(NrEstimate, InitialStateCanBeEstimated) {
  const NrResult r = nr_estimate(make_smd_model(), q0_data(5), kTheta, true);
  EXPECT_TRUE(r.converged) << r.message;
  EXPECT_NEAR(r.x0_hat(0), 1.0, 0.05);
}

TEST(NrEstimate, UnidentifiableParameterIsReported) {
  // theta3 multiplies x^3, which is identically zero for a system at rest.
  Vector X = smd_x0();
  X.head(2).setZero();
  const Dataset ds = simulate(make_smd_model(), X,
                              NoiseSpec{Matrix(0.001 * Matrix::Identity(2, 2)), Matrix::Zero(2, 2)},
                              50, 6);
  EXPECT_THROW(nr_estimate(make_smd_model(), ds, kTheta), SingularMatrixError);
}

TEST(NrResiduals, ZeroOnNoiseFreeData) {
  const Dataset ds = simulate(make_smd_model(), smd_x0(),
                              NoiseSpec{Matrix::Zero(2, 2), Matrix::Zero(2, 2)}, 30, 7);
  for (const Vector& e : nr_residuals(make_smd_model(), ds, Eigen::Vector2d(1.0, 0.0), kTheta))
    EXPECT_EQ(e.norm(), 0.0);
}

}  // namespace
}  // namespace kftune
