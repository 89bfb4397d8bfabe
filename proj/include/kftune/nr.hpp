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

#ifndef KFTUNE_NR_HPP_
#define KFTUNE_NR_HPP_

#include <cstddef>
#include <string>

#include "kftune/dataset.hpp"
#include "kftune/model.hpp"
#include "kftune/types.hpp"

namespace kftune {

struct NrOptions {
  std::size_t max_iters = 50;
  double cost_tol = 1e-10;
  std::size_t max_halvings = 10;
  // Keeps R estimates invertible on noise-free data.
  double r_floor = 1e-280;
};

struct NrResult {
  Vector theta_hat;
  Vector x0_hat;  // physical initial state (estimated or as given)
  Vector crb;     // Cramer-Rao standard deviations for theta
  Matrix R_hat;
  double cost_final = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::string message;
};

// Output-error Gauss-Newton fit with zero gain. The unknown vector is
// [x0; theta] when estimate_x0 is set, otherwise theta with x0 taken from the
// dataset.
NrResult nr_estimate(const ModelSpec& model, const Dataset& data, const Vector& theta_init,
                     bool estimate_x0 = false, const NrOptions& options = {});

// Building blocks, exposed for testing.

// e_k = Z_k - h(Xd_k), k = 1..N.
VectorSeq nr_residuals(const ModelSpec& model, const Dataset& data, const Vector& x0,
                       const Vector& theta);

// 0.5 * sum e_k^T diag(r)^{-1} e_k.
double nr_weighted_cost(const ModelSpec& model, const Dataset& data, const Vector& x0,
                        const Vector& theta, const Vector& r_diag);

// Gauss-Newton gradient of nr_weighted_cost with respect to theta.
Vector nr_gradient(const ModelSpec& model, const Dataset& data, const Vector& x0,
                   const Vector& theta, const Vector& r_diag);

}  // namespace kftune

#endif  // KFTUNE_NR_HPP_
