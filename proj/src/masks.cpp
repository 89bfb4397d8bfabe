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

#include "kftune/masks.hpp"

#include "kftune/errors.hpp"

namespace kftune {

Matrix apply_mask(const Matrix& m, TrimMask mask, std::size_t n_states) {
  const auto n = static_cast<Eigen::Index>(n_states);
  if (mask == TrimMask::kFull) return symmetrize(m);
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const bool keep = mask == TrimMask::kDiagonal || mask == TrimMask::kDiagOnly ||
                      (mask == TrimMask::kReferenceParamOnly && i >= n) ||
                      (mask == TrimMask::kReferenceStateOnly && i < n);
    if (keep) out(i, i) = m(i, i);
  }
  return out;
}

TrimMask parse_mask(const std::string& text, MaskRole role) {
  if (text == "ref") {
    switch (role) {
      case MaskRole::kP0: return TrimMask::kReferenceParamOnly;
      case MaskRole::kQ: return TrimMask::kReferenceStateOnly;
      case MaskRole::kR: return TrimMask::kDiagOnly;
    }
  }
  if (text == "ref_param") return TrimMask::kReferenceParamOnly;
  if (text == "ref_state") return TrimMask::kReferenceStateOnly;
  if (text == "diag") return role == MaskRole::kR ? TrimMask::kDiagOnly : TrimMask::kDiagonal;
  if (text == "full") return TrimMask::kFull;
  throw ConfigError("unknown mask '" + text + "' (expected ref|diag|full)");
}

std::string to_string(TrimMask mask) {
  switch (mask) {
    case TrimMask::kReferenceParamOnly: return "ref_param";
    case TrimMask::kReferenceStateOnly: return "ref_state";
    case TrimMask::kDiagonal: return "diag";
    case TrimMask::kFull: return "full";
    case TrimMask::kDiagOnly: return "diag";
  }
  return "?";
}

}  // namespace kftune
