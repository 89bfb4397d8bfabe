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

#include "kftune/costs.hpp"
#include "kftune/dataset.hpp"
#include "kftune/errors.hpp"
#include "kftune/rng.hpp"
#include "test_models.hpp"

namespace kftune {
namespace {

struct Passes {
  FilterPass f;
  SmootherPass s;
  DynamicalPass d;
};

Passes scalar_passes(double q, double r, std::size_t N, std::uint64_t seed) {
  const ModelSpec m = testing::scalar_linear_model(0.0);
  const Dataset ds = simulate(m, Vector::Zero(1),
                              NoiseSpec{Matrix::Constant(1, 1, r), Matrix::Constant(1, 1, q)}, N,
                              seed);
  Passes p;
  p.f = ekf_forward(m, Vector::Zero(1), Matrix::Constant(1, 1, 1e-6), Matrix::Constant(1, 1, q),
                    Matrix::Constant(1, 1, r), ds);
  p.s = rts_smooth(m, p.f);
  p.s.lag_one = lag_one_covariances(p.f, p.s);
  p.d = dynamical_pass(m, p.s, Vector(), m.dt);
  return p;
}

TEST(Costs, NormalisedInnovationNearChannelCount) {
  const Passes p = scalar_passes(0.2, 0.5, 2000, 11);
  const CostReport c = compute_costs(testing::scalar_linear_model(0.0), p.f, p.s, p.d,
                                     Matrix::Constant(1, 1, 0.2), Matrix::Constant(1, 1, 0.5));
  EXPECT_NEAR(c.J[1], 1.0, 0.2);
  EXPECT_NEAR(c.J[6], 1.0, 0.2);
  EXPECT_FALSE(c.has_J0);
  EXPECT_EQ(c.s1_events, 0u);
}

TEST(Costs, InitialPriorTermVanishesAtTruth) {
  const Passes p = scalar_passes(0.2, 0.5, 50, 12);
  const InitialPrior prior{Vector::Constant(1, 0.25), Vector::Constant(1, 0.25),
                           Matrix::Constant(1, 1, 2.0)};
  const CostReport c = compute_costs(testing::scalar_linear_model(0.0), p.f, p.s, p.d,
                                     Matrix::Constant(1, 1, 0.2), Matrix::Constant(1, 1, 0.5),
                                     prior);
  EXPECT_TRUE(c.has_J0);
  EXPECT_EQ(c.J[0], 0.0);
  const InitialPrior off{Vector::Constant(1, 0.0), Vector::Constant(1, 1.0),
                         Matrix::Constant(1, 1, 2.0)};
  EXPECT_DOUBLE_EQ(compute_costs(testing::scalar_linear_model(0.0), p.f, p.s, p.d,
                                 Matrix::Constant(1, 1, 0.2), Matrix::Constant(1, 1, 0.5), off)
                       .J[0],
                   0.25);
}

TEST(Costs, PureFunctionOfItsInputs) {
  const Passes p = scalar_passes(0.2, 0.5, 100, 13);
  const Passes copy = p;
  const ModelSpec m = testing::scalar_linear_model(0.0);
  const CostReport a = compute_costs(m, p.f, p.s, p.d, Matrix::Constant(1, 1, 0.2),
                                     Matrix::Constant(1, 1, 0.5));
  const CostReport b = compute_costs(m, p.f, p.s, p.d, Matrix::Constant(1, 1, 0.2),
                                     Matrix::Constant(1, 1, 0.5));
  EXPECT_EQ(a, b);
  for (std::size_t k = 0; k <= p.f.size(); ++k) {
    EXPECT_EQ(p.f.P_post[k], copy.f.P_post[k]);
    EXPECT_EQ(p.s.X_smooth[k], copy.s.X_smooth[k]);
  }
}

TEST(FlooredQuadratic, CountsAndFloorsIndefiniteWeights) {
  std::size_t events = 0;
  Matrix W = Matrix::Identity(2, 2);
  EXPECT_DOUBLE_EQ(floored_quadratic(Eigen::Vector2d(1.0, 2.0), 2.0 * W, &events), 2.5);
  EXPECT_EQ(events, 0u);
  W(1, 1) = -0.5;
  // The negative eigenvalue is raised to 1e-10 * |trace| = 5e-11.
  const double v = floored_quadratic(Eigen::Vector2d(1.0, 1e-5), W, &events);
  EXPECT_EQ(events, 1u);
  EXPECT_NEAR(v, 3.0, 1e-9);
}

TEST(Whiteness, IndependentSamplesMostlyInsideBand) {
  CounterRng rng(21);
  VectorSeq s;
  for (int k = 0; k < 10000; ++k) s.push_back(Vector::Constant(1, rng.normal()));
  const WhitenessReport w = whiteness(s);
  EXPECT_NEAR(w.band, 0.02, 1e-15);
  EXPECT_LE(w.fraction_outside, 0.15);
  EXPECT_DOUBLE_EQ(w.autocorr(0, 0), 1.0);
  EXPECT_FALSE(w.degenerate[0]);
}

TEST(Whiteness, AlternatingSequenceIsAnticorrelated) {
  VectorSeq s;
  for (int k = 0; k < 100; ++k) s.push_back(Vector::Constant(1, k % 2 ? 1.0 : -1.0));
  const WhitenessReport w = whiteness(s, 5);
  EXPECT_NEAR(w.autocorr(1, 0), -1.0, 1e-12);
  EXPECT_NEAR(w.autocorr(2, 0), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(w.fraction_outside, 1.0);
}

TEST(Whiteness, ConstantChannelIsDegenerate) {
  const VectorSeq s(50, Vector::Constant(2, 3.0));
  EXPECT_TRUE(whiteness(s).degenerate[0]);
  EXPECT_TRUE(whiteness(s).degenerate[1]);
}

TEST(Whiteness, ShortSequenceRejected) {
  EXPECT_THROW(whiteness(VectorSeq(29, Vector::Zero(1))), Error);
}

TEST(MeasurementSlots, DropsEmptySlotZero) {
  const VectorSeq seq{Vector(), Vector::Constant(1, 1.0), Vector::Constant(1, 2.0)};
  const VectorSeq out = measurement_slots(seq);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1](0), 2.0);
}

}  // namespace
}  // namespace kftune
