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

#include "kftune/dataset.hpp"
#include "kftune/errors.hpp"
#include "kftune/estimators.hpp"
#include "kftune/masks.hpp"
#include "test_models.hpp"

namespace kftune {
namespace {

struct Passes {
  FilterPass f;
  SmootherPass s;
  DynamicalPass d;
  PassProducts products() const { return {&f, &s, &d}; }
};

Passes run_passes(const ModelSpec& m, const Dataset& ds, const Vector& X0, const Matrix& P0,
                  const Matrix& Q, const Matrix& R) {
  Passes p;
  p.f = ekf_forward(m, X0, P0, Q, R, ds);
  p.s = rts_smooth(m, p.f);
  p.s.lag_one = lag_one_covariances(p.f, p.s);
  p.d = dynamical_pass(m, p.s, X0.tail(m.n_params), m.dt);
  return p;
}

Dataset random_walk(double q, double r, std::size_t N, std::uint64_t seed) {
  return simulate(testing::scalar_linear_model(0.0), Vector::Zero(1),
                  NoiseSpec{Matrix::Constant(1, 1, r), Matrix::Constant(1, 1, q)}, N, seed);
}

Vector smd_x0() {
  Vector X(5);
  X << 1.0, 0.0, 4.0, 0.4, 0.6;
  return X;
}

TEST(ScaleUp, MultipliesByLengthAndMasks) {
  Matrix P = Matrix::Identity(5, 5) * 0.01;
  P(0, 3) = P(3, 0) = 0.002;
  const Matrix out = p0_scale_up(P, 50, TrimMask::kReferenceParamOnly, 2);
  Matrix expect = Matrix::Zero(5, 5);
  expect.diagonal().tail(3).setConstant(0.5);
  EXPECT_EQ(out, expect);
  EXPECT_EQ(p0_scale_up(P, 50, TrimMask::kFull, 2), 50.0 * P);
}

TEST(Iim, ScalarDirectMeasurementGivesR) {
  const ModelSpec m = testing::scalar_linear_model(0.0);
  const Dataset ds = random_walk(0.0, 0.7, 20, 1);
  const FilterPass f = ekf_forward(m, Vector::Zero(1), Matrix::Identity(1, 1),
                                   Matrix::Zero(1, 1), Matrix::Constant(1, 1, 0.7), ds);
  EXPECT_NEAR(p0_iim(f, Matrix::Constant(1, 1, 0.7), TrimMask::kFull, 1)(0, 0), 0.7, 1e-9);
}

TEST(Iim, IdentityTwoStateSystem) {
  const ModelSpec m = testing::linear_model(Matrix::Zero(2, 2), 0.1);
  const Dataset ds = simulate(m, Vector::Zero(2),
                              NoiseSpec{Matrix::Identity(2, 2), Matrix::Zero(2, 2)}, 15, 2);
  const FilterPass f = ekf_forward(m, Vector::Zero(2), Matrix::Identity(2, 2),
                                   Matrix::Zero(2, 2), Matrix::Identity(2, 2), ds);
  EXPECT_LE((p0_iim(f, Matrix::Identity(2, 2), TrimMask::kFull, 2) - Matrix::Identity(2, 2))
                .cwiseAbs()
                .maxCoeff(),
            1e-9);
}

TEST(Iim, UnexcitedDirectionIsSingular) {
  ModelSpec m = testing::linear_model(Matrix::Zero(2, 2), 0.1);
  m.n_meas = 1;
  m.measurement_fn = [](const Vector& X) { return Vector(X.head(1)); };
  const Dataset ds = simulate(m, Vector::Zero(2),
                              NoiseSpec{Matrix::Identity(1, 1), Matrix::Zero(2, 2)}, 15, 2);
  const FilterPass f = ekf_forward(m, Vector::Zero(2), Matrix::Identity(2, 2),
                                   Matrix::Zero(2, 2), Matrix::Identity(1, 1), ds);
  try {
    p0_iim(f, Matrix::Identity(1, 1), TrimMask::kFull, 2);
    FAIL() << "expected a singular information matrix";
  } catch (const SingularMatrixError& e) {
    EXPECT_NE(std::string(e.what()).find("[1]"), std::string::npos) << e.what();
  }
}

TEST(P0Smoothed, TakesInitialSmoothedCovariance) {
  SmootherPass s;
  s.P_smooth = {Matrix::Constant(5, 5, 0.3)};
  const Matrix out = p0_smoothed(s, TrimMask::kDiagonal, 2);
  EXPECT_EQ(out, Matrix(0.3 * Matrix::Identity(5, 5)));
}

TEST(EstimateR, ExpectationMaximisationRecoversTruthOnLongRecord) {
  const double q = 0.3, r = 0.5;
  const Passes p = run_passes(testing::scalar_linear_model(0.0), random_walk(q, r, 20000, 3),
                              Vector::Zero(1), Matrix::Identity(1, 1), Matrix::Constant(1, 1, q),
                              Matrix::Constant(1, 1, r));
  const ModelSpec m = testing::scalar_linear_model(0.0);
  EXPECT_NEAR(estimate_R(RMethod::kEm, p.products(), m, TrimMask::kDiagOnly)(0, 0), r, 0.05 * r);
  EXPECT_NEAR(estimate_Q(QMethod::kEm, p.products(), m, TrimMask::kFull)(0, 0), q, 0.05 * q);
  for (RMethod method : {RMethod::kMs, RMethod::kMt})
    EXPECT_NEAR(estimate_R(method, p.products(), m, TrimMask::kDiagOnly)(0, 0), r, 0.1 * r)
        << to_string(method);
}

TEST(EstimateR, NoiseFreeDataGivesTinyR) {
  const ModelSpec m = make_smd_model();
  const Dataset ds =
      simulate(m, smd_x0(), NoiseSpec{Matrix::Zero(2, 2), Matrix::Zero(2, 2)}, 200, 4);
  const Passes p = run_passes(m, ds, smd_x0(), 1e-12 * Matrix::Identity(5, 5),
                              q_floor_matrix(m, 1e-12), 1e-12 * Matrix::Identity(2, 2));
  const Matrix R = estimate_R(RMethod::kEm, p.products(), m, TrimMask::kDiagOnly);
  EXPECT_LT(R.cwiseAbs().maxCoeff(), 1e-8);
  const Matrix Q = estimate_Q(QMethod::kEm, p.products(), m, TrimMask::kReferenceStateOnly);
  EXPECT_LT(Q.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(EstimateQ, DynamicalAndSmoothedFormsAgree) {
  const ModelSpec m = make_smd_model();
  const Matrix R = Matrix(Eigen::Vector2d(0.001, 0.004).asDiagonal());
  const Matrix Qx = Matrix(Eigen::Vector2d(0.001, 0.002).asDiagonal());
  const Dataset ds = simulate(m, smd_x0(), NoiseSpec{R, Qx}, 1000, 5);
  Matrix Q = Matrix::Zero(5, 5);
  Q.topLeftCorner(2, 2) = Qx;
  const Passes p = run_passes(m, ds, smd_x0(), 1e-6 * Matrix::Identity(5, 5), Q, R);
  const Matrix em = estimate_Q(QMethod::kEm, p.products(), m, TrimMask::kReferenceStateOnly);
  const Matrix dsdt = estimate_Q(QMethod::kDsdt, p.products(), m, TrimMask::kReferenceStateOnly);
  for (Eigen::Index i = 0; i < 2; ++i) EXPECT_NEAR(dsdt(i, i), em(i, i), 0.1 * em(i, i));
}

TEST(EstimateMt, NegativeDiagonalIsClampedAndCounted) {
  const ModelSpec m = testing::scalar_linear_model(0.0);
  const Dataset ds = random_walk(0.0, 1e-6, 10, 6);
  const Passes p = run_passes(m, ds, Vector::Zero(1), Matrix::Constant(1, 1, 100.0),
                              Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0));
  EstimatorTelemetry tel;
  const Matrix R = estimate_R(RMethod::kMt, p.products(), m, TrimMask::kDiagOnly, &tel);
  EXPECT_EQ(tel.clamped_entries, 1u);
  EXPECT_GT(R(0, 0), 0.0);
}

TEST(EstimateQ, FloorMatrixOnStatesOnly) {
  const Matrix Q = estimate_Q(QMethod::kFixedFloor, {}, make_smd_model(), TrimMask::kFull, 1e-10);
  EXPECT_EQ(Q.diagonal().head(2), Vector::Constant(2, 1e-10));
  EXPECT_EQ(Q.diagonal().tail(3), Vector::Zero(3));
  EXPECT_EQ(Q.trace(), Q.diagonal().sum());
}

TEST(EstimateR, MissingPassIsAnError) {
  EXPECT_THROW(estimate_R(RMethod::kEm, {}, make_smd_model(), TrimMask::kDiagOnly), Error);
}

TEST(Masks, IdempotentAndRoleAware) {
  Matrix M = Matrix::Random(5, 5);
  M = symmetrize(M);
  for (TrimMask mask : {TrimMask::kReferenceParamOnly, TrimMask::kReferenceStateOnly,
                        TrimMask::kDiagonal, TrimMask::kFull}) {
    const Matrix once = apply_mask(M, mask, 2);
    EXPECT_EQ(apply_mask(once, mask, 2), once) << to_string(mask);
  }
  EXPECT_EQ(parse_mask("ref", MaskRole::kP0), TrimMask::kReferenceParamOnly);
  EXPECT_EQ(parse_mask("ref", MaskRole::kQ), TrimMask::kReferenceStateOnly);
  EXPECT_EQ(parse_mask("ref", MaskRole::kR), TrimMask::kDiagOnly);
  EXPECT_EQ(parse_mask("full", MaskRole::kQ), TrimMask::kFull);
  EXPECT_THROW(parse_mask("upper", MaskRole::kQ), ConfigError);
}

TEST(Methods, ParseRoundTrip) {
  for (const char* s : {"em", "dsdt", "ms", "mt", "floor"})
    EXPECT_EQ(to_string(parse_q_method(s)), s);
  for (const char* s : {"em", "ms", "mt", "dyn"}) EXPECT_EQ(to_string(parse_r_method(s)), s);
  for (const char* s : {"scale_up", "iim", "smoothed"})
    EXPECT_EQ(to_string(parse_p0_method(s)), s);
  EXPECT_THROW(parse_q_method("kalman"), ConfigError);
}

}  // namespace
}  // namespace kftune
