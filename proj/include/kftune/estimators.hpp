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

#ifndef KFTUNE_ESTIMATORS_HPP_
#define KFTUNE_ESTIMATORS_HPP_

#include <cstddef>
#include <string>

#include "kftune/filter.hpp"
#include "kftune/masks.hpp"
#include "kftune/model.hpp"

namespace kftune {

enum class P0Method { kScaleUp, kIim, kSmoothed };
enum class QMethod { kEm, kDsdt, kMs, kMt, kFixedFloor };
enum class RMethod { kEm, kMs, kMt, kDynResidue };

struct EstimatorChoice {
  P0Method p0_method = P0Method::kScaleUp;
  TrimMask p0_mask = TrimMask::kReferenceParamOnly;
  QMethod q_method = QMethod::kEm;
  TrimMask q_mask = TrimMask::kReferenceStateOnly;
  double q_floor = 1e-10;
  RMethod r_method = RMethod::kEm;
  TrimMask r_mask = TrimMask::kDiagOnly;
};

P0Method parse_p0_method(const std::string& s);
QMethod parse_q_method(const std::string& s);
RMethod parse_r_method(const std::string& s);
std::string to_string(P0Method m);
std::string to_string(QMethod m);
std::string to_string(RMethod m);

// Pass products one re-estimation step consumes. dyn may be null unless the
// chosen method needs it (DSDT, dynamical residue).
struct PassProducts {
  const FilterPass* filter = nullptr;
  const SmootherPass* smoother = nullptr;
  const DynamicalPass* dyn = nullptr;
};

struct EstimatorTelemetry {
  // Negative diagonal entries flipped to their absolute value (MT estimates).
  std::size_t clamped_entries = 0;
};

// N * P_final, then trimmed.
Matrix p0_scale_up(const Matrix& P_final, std::size_t n_samples, TrimMask mask,
                   std::size_t n_states);

// Inverse of the averaged information matrix (1/N) sum F^T H^T R^-1 H F,
// trimmed. Throws SingularMatrixError when some direction is not excited.
Matrix p0_iim(const FilterPass& pass, const Matrix& R, TrimMask mask, std::size_t n_states);

// Smoothed initial covariance P_{0|N}, trimmed.
Matrix p0_smoothed(const SmootherPass& smoother, TrimMask mask, std::size_t n_states);

Matrix estimate_R(RMethod method, const PassProducts& passes, const ModelSpec& model,
                  TrimMask mask, EstimatorTelemetry* telemetry = nullptr);

// Returns an augmented (n+p) x (n+p) matrix.
Matrix estimate_Q(QMethod method, const PassProducts& passes, const ModelSpec& model,
                  TrimMask mask, double floor = 1e-10, EstimatorTelemetry* telemetry = nullptr);

// Fixed process-noise floor on the physical-state diagonal.
Matrix q_floor_matrix(const ModelSpec& model, double floor);

}  // namespace kftune

#endif  // KFTUNE_ESTIMATORS_HPP_
