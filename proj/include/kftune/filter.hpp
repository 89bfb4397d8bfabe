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

#ifndef KFTUNE_FILTER_HPP_
#define KFTUNE_FILTER_HPP_

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "kftune/dataset.hpp"
#include "kftune/model.hpp"
#include "kftune/types.hpp"

namespace kftune {

/// Products of one forward EKF sweep over N samples.
///
/// Every sequence has N+1 slots. Slot 0 holds the initial condition
/// (X_post[0] = X_prior[0] = X0, P_post[0] = P_prior[0] = P0); measurement
/// quantities (H, gain, innovation, residue, S1) are zero-sized at slot 0.
/// F has N slots: F[k] is the Jacobian at X_post[k] mapping step k to k+1.
struct FilterPass {
  VectorSeq Z;  // Z[k], slot 0 empty
  VectorSeq X_prior, X_post;
  MatrixSeq P_prior, P_post;
  MatrixSeq F;
  MatrixSeq H;       // at X_prior[k]
  MatrixSeq H_post;  // at X_post[k]
  MatrixSeq gain;
  VectorSeq innovation;  // Z_k - h(X_prior[k])
  VectorSeq residue;     // Z_k - h(X_post[k])
  MatrixSeq S1;          // H P_prior H^T + R
  Matrix Q_aug;
  Matrix R;
  double dt = 0.0;
  std::size_t regularized_solves = 0;
  std::vector<std::string> warnings;

  std::size_t size() const { return X_post.empty() ? 0 : X_post.size() - 1; }
};

/// Backward RTS sweep. X_smooth/P_smooth/H_smooth/smoothed_residue/lag_one
/// have N+1 slots; gain_smooth and F_smooth have N (k = 0..N-1).
struct SmootherPass {
  VectorSeq X_smooth;
  MatrixSeq P_smooth;
  MatrixSeq gain_smooth;  // K_{k|N}
  MatrixSeq F_smooth;     // Jacobian at X_smooth[k]
  MatrixSeq H_smooth;     // Jacobian at X_smooth[k], slot 0 empty
  MatrixSeq lag_one;      // P_{k,k-1|N}, slot 0 empty; filled by lag_one_covariances
  VectorSeq smoothed_residue;
  std::size_t regularized_solves = 0;
  std::vector<std::string> warnings;
};

/// Noise-free trajectory from the smoothed initial state with the final
/// parameter estimate, and its first-order covariance.
struct DynamicalPass {
  VectorSeq Xd;          // N+1
  MatrixSeq Pd;          // N+1
  MatrixSeq Pd_lag_one;  // N+1, slot 0 empty
  MatrixSeq Fd;          // N, Jacobian at Xd[k]
};

struct FilterOptions {
  // trace(P_post) above this multiple of the initial scale counts as divergence.
  double divergence_growth = 1e12;
};

FilterPass ekf_forward(const ModelSpec& model, const Vector& X0, const Matrix& P0,
                       const Matrix& Q_aug, const Matrix& R, const Dataset& data,
                       const FilterOptions& options = {});

SmootherPass rts_smooth(const ModelSpec& model, const FilterPass& pass);

MatrixSeq lag_one_covariances(const FilterPass& pass, const SmootherPass& smoother);

DynamicalPass dynamical_pass(const ModelSpec& model, const SmootherPass& smoother,
                             const Vector& theta_hat, double dt);

// Solves A X = B for symmetric positive definite A. When the Cholesky
// factorization fails, retries once with ridge 1e-12 * trace(A) / dim and sets
// *regularized. Throws SingularMatrixError (tagged with step) if that fails too.
Matrix solve_spd(const Matrix& A, const Matrix& B, std::size_t step, bool* regularized,
                 const char* what);

// CSV trace of one pass: k, X_prior, X_post, X_smooth, diag(P_prior),
// diag(P_post), diag(P_smooth), innovation, residue.
void write_trace_csv(std::ostream& out, const FilterPass& pass, const SmootherPass& smoother);

}  // namespace kftune

#endif  // KFTUNE_FILTER_HPP_
