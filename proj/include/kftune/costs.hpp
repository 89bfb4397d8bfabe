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

#ifndef KFTUNE_COSTS_HPP_
#define KFTUNE_COSTS_HPP_

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "kftune/filter.hpp"
#include "kftune/model.hpp"

namespace kftune {

/// Generalized cost terms of one filter/smoother iteration.
///
/// J[0] is the prior term and only meaningful when has_J0; J[5] is a negative
/// log likelihood and may be negative. The event counters record how many
/// time steps needed an eigenvalue-floored weight because the weight matrix
/// (a difference of covariances) was not positive definite.
struct CostReport {
  std::array<double, 9> J{};
  bool has_J0 = false;
  std::size_t s1_events = 0;
  std::size_t s2_events = 0;
  std::size_t s3_events = 0;
  std::size_t w1_events = 0;
  std::size_t w2_events = 0;
  std::size_t w3_events = 0;

  bool operator==(const CostReport&) const = default;
};

// Prior used by J0: the true initial state and the filter's (X0, P0).
struct InitialPrior {
  Vector X_true;
  Vector X0;
  Matrix P0;
};

CostReport compute_costs(const ModelSpec& model, const FilterPass& pass,
                         const SmootherPass& smoother, const DynamicalPass& dyn,
                         const Matrix& Q_aug, const Matrix& R,
                         const std::optional<InitialPrior>& prior = std::nullopt);

// e^T W^-1 e where W is floored at 1e-10 * |trace(W)| when it is not positive
// definite; *events is incremented in that case.
double floored_quadratic(const Vector& e, const Matrix& W, std::size_t* events);

struct WhitenessReport {
  // autocorr(lag, channel) for lags 0..max_lag.
  Matrix autocorr;
  double band = 0.0;              // 2 / sqrt(N)
  double fraction_outside = 0.0;  // over lags 1..max_lag and all channels
  std::vector<bool> degenerate;   // channel has (numerically) zero variance
};

// Normalized autocorrelation r(l) = [sum x_k x_{k+l} / (N-l)] / [sum x_k^2 / N]
// per channel (no mean removal: the sequences are zero mean by hypothesis).
WhitenessReport whiteness(const VectorSeq& samples, std::size_t max_lag = 20);

// Drops slot 0 from a filter sequence so it can be fed to whiteness().
VectorSeq measurement_slots(const VectorSeq& seq);

}  // namespace kftune

#endif  // KFTUNE_COSTS_HPP_
