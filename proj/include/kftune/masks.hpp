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

#ifndef KFTUNE_MASKS_HPP_
#define KFTUNE_MASKS_HPP_

#include <cstddef>
#include <string>

#include "kftune/types.hpp"

namespace kftune {

/// Trimming patterns over an augmented covariance split as [states, params].
enum class TrimMask {
  kReferenceParamOnly,  // [0,0;0,diag]: only the parameter variances survive
  kReferenceStateOnly,  // [diag,0;0,0]: only the physical-state variances survive
  kDiagonal,            // [diag,0;0,diag]
  kFull,                // untouched (symmetrized)
  kDiagOnly,            // diagonal of a matrix without block structure (R)
};

// Entries outside the pattern are zeroed. n_states locates the block split.
Matrix apply_mask(const Matrix& m, TrimMask mask, std::size_t n_states);

// Role-aware parsing: "ref" means the parameter reference for P0, the state
// reference for Q and the diagonal for R.
enum class MaskRole { kP0, kQ, kR };
TrimMask parse_mask(const std::string& text, MaskRole role);
std::string to_string(TrimMask mask);

}  // namespace kftune

#endif  // KFTUNE_MASKS_HPP_
