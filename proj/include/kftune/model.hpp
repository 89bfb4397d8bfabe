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

#ifndef KFTUNE_MODEL_HPP_
#define KFTUNE_MODEL_HPP_

#include <cstddef>
#include <functional>
#include <limits>
#include <string>

#include "kftune/types.hpp"

namespace kftune {

/// Nonlinear state-space model with constant unknown parameters.
///
/// The filter works on the augmented state X = [x; theta]. The physical block
/// x (n_states) evolves through derivative_fn, integrated by one fixed RK4 step
/// per sample interval dt; the parameter block (n_params) is constant.
/// measurement_fn maps the augmented state to n_meas outputs.
struct ModelSpec {
  using DerivativeFn = std::function<Vector(const Vector& x, const Vector& theta,
                                            double t, const Vector& u)>;
  using MeasurementFn = std::function<Vector(const Vector& X)>;
  using ControlFn = std::function<Vector(double t)>;

  std::string id;
  std::size_t n_states = 0;
  std::size_t n_params = 0;
  std::size_t n_meas = 0;
  double dt = 0.0;
  DerivativeFn derivative_fn;
  MeasurementFn measurement_fn;
  ControlFn control_fn;  // optional; empty means no exogenous input

  std::size_t augmented_size() const { return n_states + n_params; }

  // Throws ConfigError when dimensions or callbacks are unusable.
  void validate() const;
};

/// Split view of an augmented state.
struct AugmentedState {
  Vector x;
  Vector theta;

  Vector stacked() const { return stack(x, theta); }
  static AugmentedState split(const ModelSpec& model, const Vector& X);
};

/// Spring-mass-damper with a cubic spring term.
struct SmdParams {
  double theta1 = 4.0;  // linear spring constant
  double theta2 = 0.4;  // damping coefficient
  double theta3 = 0.6;  // cubic spring constant

  Vector to_vector() const;
};

// Continuous-time derivative of the augmented state. The parameter block of
// the result is zero.
Vector derivative(const ModelSpec& model, const Vector& X, double t);

// One RK4 step of length dt starting at time t. dt == 0 returns X unchanged.
// The parameter block is copied through untouched. A non-finite result throws
// DivergenceError tagged with `step`.
Vector propagate(const ModelSpec& model, const Vector& X, double dt, double t = 0.0,
                 std::size_t step = 0);

// Jacobian of propagate() with respect to X by central differences.
Matrix state_jacobian(const ModelSpec& model, const Vector& X, double dt,
                      double t = 0.0);

Vector measure(const ModelSpec& model, const Vector& X);

// m x (n+p) Jacobian of measure() by central differences.
Matrix measurement_jacobian(const ModelSpec& model, const Vector& X);

// Finite-difference step used by both Jacobians.
inline double fd_step(double value) {
  const double rel = 1e-6 * std::abs(value);
  return rel > 1e-6 ? rel : 1e-6;
}

ModelSpec make_smd_model(double dt = 0.1);

// Registry keyed by model id. "smd" is registered by default.
using ModelFactory = std::function<ModelSpec(double dt)>;
void register_model(const std::string& id, ModelFactory factory);
ModelSpec make_model(const std::string& id, double dt);
bool has_model(const std::string& id);

}  // namespace kftune

#endif  // KFTUNE_MODEL_HPP_
