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

#ifndef KFTUNE_TYPES_HPP_
#define KFTUNE_TYPES_HPP_

#include <Eigen/Dense>

#include <vector>

namespace kftune {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Time-indexed sequences. Index 0 is the initial condition (t0); measurement
// related entries start at index 1.
using VectorSeq = std::vector<Vector>;
using MatrixSeq = std::vector<Matrix>;

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Smallest eigenvalue of the symmetric part of m.
double min_eigenvalue(const Matrix& m);

// Largest absolute asymmetry |m(i,j) - m(j,i)|.
double asymmetry(const Matrix& m);

// True when every entry is finite.
bool all_finite(const Matrix& m);

// Replace eigenvalues below floor by floor. Returns the repaired matrix and
// whether any eigenvalue was lifted.
struct FlooredMatrix {
  Matrix value;
  bool floored = false;
};
FlooredMatrix eigen_floor(const Matrix& m, double floor);

Vector stack(const Vector& x, const Vector& theta);

}  // namespace kftune

#endif  // KFTUNE_TYPES_HPP_
