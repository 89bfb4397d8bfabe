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

#include "kftune/filter.hpp"

#include <cmath>
#include <iomanip>

#include "kftune/errors.hpp"

namespace kftune {

Matrix solve_spd(const Matrix& A, const Matrix& B, std::size_t step, bool* regularized,
                 const char* what) {
  Eigen::LLT<Matrix> llt(symmetrize(A));
  if (llt.info() == Eigen::Success) return llt.solve(B);
  const double ridge = 1e-12 * std::max(A.trace(), 0.0) / static_cast<double>(A.rows());
  Matrix Ar = symmetrize(A);
  Ar.diagonal().array() += ridge;
  llt.compute(Ar);
  if (llt.info() != Eigen::Success || !(ridge > 0.0))
    throw SingularMatrixError(std::string(what) + " is not positive definite", step);
  if (regularized) *regularized = true;
  return llt.solve(B);
}

FilterPass ekf_forward(const ModelSpec& model, const Vector& X0, const Matrix& P0,
                       const Matrix& Q_aug, const Matrix& R, const Dataset& data,
                       const FilterOptions& options) {
  const auto dim = static_cast<Eigen::Index>(model.augmented_size());
  const auto m = static_cast<Eigen::Index>(model.n_meas);
  if (X0.size() != dim || P0.rows() != dim || P0.cols() != dim || Q_aug.rows() != dim ||
      Q_aug.cols() != dim)
    throw DimensionError("ekf_forward: X0/P0/Q_aug do not match the augmented state size");
  if (R.rows() != m || R.cols() != m) throw DimensionError("ekf_forward: R has wrong size");

  const std::size_t N = data.size();
  FilterPass pass;
  pass.Q_aug = Q_aug;
  pass.R = R;
  pass.dt = model.dt;
  for (auto* seq : {&pass.X_prior, &pass.X_post, &pass.innovation, &pass.residue, &pass.Z})
    seq->resize(N + 1);
  for (auto* seq : {&pass.P_prior, &pass.P_post, &pass.H, &pass.H_post, &pass.gain, &pass.S1})
    seq->resize(N + 1);
  pass.F.resize(N);

  pass.X_prior[0] = pass.X_post[0] = X0;
  pass.P_prior[0] = pass.P_post[0] = symmetrize(P0);

  const double scale = std::max({P0.trace(), Q_aug.trace(), 1e-300});
  const Matrix I = Matrix::Identity(dim, dim);

  for (std::size_t k = 1; k <= N; ++k) {
    const double t_prev = static_cast<double>(k - 1) * model.dt;
    const Matrix& F = pass.F[k - 1] = state_jacobian(model, pass.X_post[k - 1], model.dt, t_prev);
    pass.X_prior[k] = propagate(model, pass.X_post[k - 1], model.dt, t_prev, k);
    pass.P_prior[k] = symmetrize(F * pass.P_post[k - 1] * F.transpose() + Q_aug);

    const Matrix& H = pass.H[k] = measurement_jacobian(model, pass.X_prior[k]);
    pass.Z[k] = data.z(k);
    pass.innovation[k] = pass.Z[k] - measure(model, pass.X_prior[k]);
    const Matrix PHt = pass.P_prior[k] * H.transpose();
    pass.S1[k] = symmetrize(H * PHt + R);

    bool regularized = false;
    const Matrix Kt = solve_spd(pass.S1[k], PHt.transpose(), k, &regularized,
                                "innovation covariance S1");
    if (regularized) {
      ++pass.regularized_solves;
      pass.warnings.push_back("S1 regularized at step " + std::to_string(k));
    }
    const Matrix& K = pass.gain[k] = Kt.transpose();

    pass.X_post[k] = pass.X_prior[k] + K * pass.innovation[k];
    const Matrix A = I - K * H;
    pass.P_post[k] = symmetrize(A * pass.P_prior[k] * A.transpose() + K * R * K.transpose());

    if (!pass.X_post[k].allFinite() || !pass.P_post[k].allFinite())
      throw DivergenceError("filter state became non-finite", k);
    if (pass.P_post[k].trace() > options.divergence_growth * scale)
      throw DivergenceError("posterior covariance trace grew beyond bound", k);

    pass.H_post[k] = measurement_jacobian(model, pass.X_post[k]);
    pass.residue[k] = pass.Z[k] - measure(model, pass.X_post[k]);
  }
  return pass;
}

SmootherPass rts_smooth(const ModelSpec& model, const FilterPass& pass) {
  const std::size_t N = pass.size();
  SmootherPass s;
  s.X_smooth.resize(N + 1);
  s.P_smooth.resize(N + 1);
  s.H_smooth.resize(N + 1);
  s.lag_one.resize(N + 1);
  s.smoothed_residue.resize(N + 1);
  s.gain_smooth.resize(N);
  s.F_smooth.resize(N);

  s.X_smooth[N] = pass.X_post[N];
  s.P_smooth[N] = pass.P_post[N];
  for (std::size_t k = N; k-- > 0;) {
    // K_{k|N} = P_{k|k} F_k^T P_{k+1|k}^{-1}
    bool regularized = false;
    const Matrix Kt = solve_spd(pass.P_prior[k + 1], pass.F[k] * pass.P_post[k], k + 1,
                                &regularized, "prior covariance P_{k+1|k}");
    if (regularized) {
      ++s.regularized_solves;
      s.warnings.push_back("P_prior regularized at step " + std::to_string(k + 1));
    }
    const Matrix& K = s.gain_smooth[k] = Kt.transpose();
    s.X_smooth[k] = pass.X_post[k] + K * (s.X_smooth[k + 1] - pass.X_prior[k + 1]);
    s.P_smooth[k] =
        symmetrize(pass.P_post[k] + K * (s.P_smooth[k + 1] - pass.P_prior[k + 1]) * K.transpose());
  }
  for (std::size_t k = 0; k < N; ++k)
    s.F_smooth[k] = state_jacobian(model, s.X_smooth[k], pass.dt, static_cast<double>(k) * pass.dt);
  for (std::size_t k = 1; k <= N; ++k) {
    s.H_smooth[k] = measurement_jacobian(model, s.X_smooth[k]);
    s.smoothed_residue[k] = pass.Z[k] - measure(model, s.X_smooth[k]);
  }
  return s;
}

MatrixSeq lag_one_covariances(const FilterPass& pass, const SmootherPass& smoother) {
  const std::size_t N = pass.size();
  MatrixSeq lag(N + 1);
  if (N == 0) return lag;
  const auto dim = pass.X_post[0].size();
  const Matrix I = Matrix::Identity(dim, dim);
  lag[N] = (I - pass.gain[N] * pass.H[N]) * pass.F[N - 1] * pass.P_post[N - 1];
  for (std::size_t k = N - 1; k >= 1; --k) {
    const Matrix& Kk = smoother.gain_smooth[k];
    const Matrix& Kprev = smoother.gain_smooth[k - 1];
    lag[k] = pass.P_post[k] * Kprev.transpose() +
             Kk * (lag[k + 1] - pass.F[k] * pass.P_post[k]) * Kprev.transpose();
  }
  return lag;
}

DynamicalPass dynamical_pass(const ModelSpec& model, const SmootherPass& smoother,
                             const Vector& theta_hat, double dt) {
  const std::size_t N = smoother.X_smooth.size() - 1;
  if (static_cast<std::size_t>(theta_hat.size()) != model.n_params)
    throw DimensionError("dynamical_pass: theta_hat has wrong size");
  DynamicalPass d;
  d.Xd.resize(N + 1);
  d.Pd.resize(N + 1);
  d.Pd_lag_one.resize(N + 1);
  d.Fd.resize(N);
  d.Xd[0] = smoother.X_smooth[0];
  d.Xd[0].tail(model.n_params) = theta_hat;
  d.Pd[0] = smoother.P_smooth[0];
  for (std::size_t k = 1; k <= N; ++k) {
    const double t_prev = static_cast<double>(k - 1) * dt;
    d.Fd[k - 1] = state_jacobian(model, d.Xd[k - 1], dt, t_prev);
    d.Xd[k] = propagate(model, d.Xd[k - 1], dt, t_prev, k);
    d.Pd[k] = symmetrize(d.Fd[k - 1] * d.Pd[k - 1] * d.Fd[k - 1].transpose());
    d.Pd_lag_one[k] = d.Fd[k - 1] * d.Pd[k - 1];
  }
  return d;
}

void write_trace_csv(std::ostream& out, const FilterPass& pass, const SmootherPass& smoother) {
  const std::size_t N = pass.size();
  const auto dim = pass.X_post.empty() ? 0 : pass.X_post[0].size();
  const auto m = N > 0 ? pass.innovation[1].size() : 0;
  out << "k";
  for (const char* name : {"X_prior", "X_post", "X_smooth", "P_prior", "P_post", "P_smooth"})
    for (Eigen::Index i = 0; i < dim; ++i) out << ',' << name << i;
  for (const char* name : {"innovation", "residue"})
    for (Eigen::Index i = 0; i < m; ++i) out << ',' << name << i;
  out << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k <= N; ++k) {
    out << k;
    for (const Vector* v : {&pass.X_prior[k], &pass.X_post[k], &smoother.X_smooth[k]})
      for (Eigen::Index i = 0; i < dim; ++i) out << ',' << (*v)(i);
    for (const Matrix* P : {&pass.P_prior[k], &pass.P_post[k], &smoother.P_smooth[k]})
      for (Eigen::Index i = 0; i < dim; ++i) out << ',' << (*P)(i, i);
    for (const Vector* v : {&pass.innovation[k], &pass.residue[k]})
      for (Eigen::Index i = 0; i < m; ++i) out << ',' << (k == 0 ? 0.0 : (*v)(i));
    out << '\n';
  }
}

}  // namespace kftune
