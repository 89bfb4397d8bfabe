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

#ifndef KFTUNE_RRR_HPP_
#define KFTUNE_RRR_HPP_

#include <array>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "kftune/costs.hpp"
#include "kftune/dataset.hpp"
#include "kftune/estimators.hpp"
#include "kftune/filter.hpp"
#include "kftune/model.hpp"

namespace kftune {

enum class X0Policy { kGiven, kSmoothed };

X0Policy parse_x0_policy(const std::string& s);
std::string to_string(X0Policy p);

struct InitialGuess {
  double P0_diag = 1e-1;
  double Q_diag = 1e-1;
  double R_diag = 0.5;
  double theta_perturb = 0.2;
};

struct TuningConfig {
  EstimatorChoice estimator;
  // Process noise fixed at the floor on every iteration.
  bool q_zero = false;
  std::size_t max_iters = 20;
  double tol = 1e-6;
  // Run exactly max_iters iterations instead of stopping at tol.
  bool fixed_iterations = false;
  InitialGuess initial;
  X0Policy x0_policy = X0Policy::kGiven;
  std::size_t n_sims = 50;
  // Report J0 against the dataset's true initial state.
  bool report_j0 = false;
  // Keep per-step parameter traces in the history (for cumulative-time plots).
  bool record_traces = true;
  FilterOptions filter;

  void validate() const;
};

// Defaults for the process-noise-free study.
TuningConfig rrr_q0_config();
// Defaults for the study with process noise.
TuningConfig rrr_qpos_config();

struct IterationRecord {
  std::size_t iteration = 0;  // 1-based
  Vector theta0;              // parameters the pass started from
  Vector P0_diag;
  Vector Q_diag;  // physical-state block
  Vector R_diag;
  CostReport costs;
  Vector theta_final;  // Theta_{N|N}
  Vector sigma_final;  // sqrt(diag P_theta) at N
  double max_rel_change = 0.0;
  std::size_t clamped_entries = 0;
  std::size_t regularized_solves = 0;
  // theta_trace[k] and sigma_trace[k] for k = 0..N, when recorded.
  VectorSeq theta_trace;
  VectorSeq sigma_trace;
};

struct TuningResult {
  Vector theta_hat;
  Matrix P_theta;
  Matrix R_hat;
  Matrix Q_hat;  // augmented size; parameter block zero under the default masks
  Matrix P0_hat;
  Vector X0_hat;
  std::size_t iterations_used = 0;
  std::vector<IterationRecord> history;
  bool converged = false;
  bool diverged = false;
  std::string message;
  // Products of the last completed pass.
  std::shared_ptr<const FilterPass> filter;
  std::shared_ptr<const SmootherPass> smoother;
  std::shared_ptr<const DynamicalPass> dyn;
};

// X0_initial is the augmented starting point [x0; theta0].
TuningResult run_rrr(const ModelSpec& model, const Dataset& data, const TuningConfig& config,
                     const Vector& X0_initial);

// Largest |a - b| / |b| over the entries; entries with b == 0 use |a - b|.
double max_relative_change(const Vector& a, const Vector& b);

}  // namespace kftune

#endif  // KFTUNE_RRR_HPP_
