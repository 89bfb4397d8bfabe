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

#ifndef KFTUNE_METRICS_HPP_
#define KFTUNE_METRICS_HPP_

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "kftune/costs.hpp"
#include "kftune/types.hpp"

namespace kftune {

// What one simulation contributes to the campaign aggregate.
struct SimEstimate {
  Vector theta;    // final parameter estimate
  Matrix P_theta;  // its covariance
  Matrix R;
  Matrix Q;        // physical-state block
  CostReport costs;
};

// Per-simulation reference values (the output-error results for Q = 0).
struct ReferenceEstimate {
  Vector theta;
  Vector sigma;  // Cramer-Rao standard deviations
  Matrix R;
};

// Reference against which ratios are formed. When per_sim is non-empty the
// theta/CRB/R ratios use it (one entry per simulation); otherwise theta and R
// ratios use the truth and the CRB ratio is undefined.
struct McReference {
  Vector theta_true;
  Matrix R_true;
  Matrix Q_true;
  std::vector<ReferenceEstimate> per_sim;
};

// Scatter of estimates against their own reported uncertainty.
struct ConsistencyStats {
  Vector consistency_ratio;  // sigma_theta / mean(sqrt(P))
  Vector spread_factor;      // percent
};

// sigma_theta uses the 1/n_s population form. Spread factor combines the
// error against theta_true with the reported variance.
ConsistencyStats consistency_stats(const std::vector<Vector>& estimates,
                                   const std::vector<Vector>& sigmas, const Vector& theta_true);

struct McMetrics {
  Vector theta_ratio;
  Vector crb_ratio;
  Vector consistency_ratio;
  Vector spread_factor;
  Vector r_ratio;
  Vector q_ratio;
  std::array<double, 9> cost_mean{};
  std::array<double, 9> cost_std{};
  Matrix correlation_matrix;  // mean over simulations
  std::size_t n_used = 0;
  // Components whose denominator was zero; their values are NaN.
  std::vector<std::string> undefined;
};

// Requires at least two simulations. Folds in index order.
McMetrics aggregate_mc(const std::vector<SimEstimate>& sims, const McReference& reference);

// C_ij = d_ij / sqrt(d_ii d_jj).
Matrix correlation_matrix(const Matrix& P);

}  // namespace kftune

#endif  // KFTUNE_METRICS_HPP_
