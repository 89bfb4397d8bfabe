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

#include "kftune/model.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "kftune/errors.hpp"

namespace kftune {

void ModelSpec::validate() const {
  if (n_states < 1) throw ConfigError("model '" + id + "': n_states must be >= 1");
  if (n_meas < 1) throw ConfigError("model '" + id + "': n_meas must be >= 1");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("model '" + id + "': dt must be > 0");
  if (!derivative_fn) throw ConfigError("model '" + id + "': missing derivative_fn");
  if (!measurement_fn) throw ConfigError("model '" + id + "': missing measurement_fn");
}

AugmentedState AugmentedState::split(const ModelSpec& model, const Vector& X) {
  if (static_cast<std::size_t>(X.size()) != model.augmented_size())
    throw DimensionError("augmented state has size " + std::to_string(X.size()) +
                         ", model '" + model.id + "' expects " +
                         std::to_string(model.augmented_size()));
  return {X.head(model.n_states), X.tail(model.n_params)};
}

Vector SmdParams::to_vector() const { return Vector{{theta1, theta2, theta3}}; }

namespace {

void check_size(const ModelSpec& model, const Vector& X) {
  if (static_cast<std::size_t>(X.size()) != model.augmented_size())
    throw DimensionError("augmented state has size " + std::to_string(X.size()) +
                         ", model '" + model.id + "' expects " +
                         std::to_string(model.augmented_size()));
}

Vector control_at(const ModelSpec& model, double t) {
  return model.control_fn ? model.control_fn(t) : Vector();
}

// Physical-state derivative only.
Vector physical_rate(const ModelSpec& model, const Vector& x, const Vector& theta,
                     double t) {
  Vector xdot = model.derivative_fn(x, theta, t, control_at(model, t));
  if (static_cast<std::size_t>(xdot.size()) != model.n_states)
    throw DimensionError("derivative_fn of model '" + model.id + "' returned size " +
                         std::to_string(xdot.size()));
  return xdot;
}

}  // namespace

Vector derivative(const ModelSpec& model, const Vector& X, double t) {
  check_size(model, X);
  Vector out = Vector::Zero(X.size());
  out.head(model.n_states) =
      physical_rate(model, X.head(model.n_states), X.tail(model.n_params), t);
  return out;
}

Vector propagate(const ModelSpec& model, const Vector& X, double dt, double t,
                 std::size_t step) {
  check_size(model, X);
  if (dt == 0.0) return X;
  const auto n = static_cast<Eigen::Index>(model.n_states);
  const Vector theta = X.tail(model.n_params);
  const Vector x = X.head(n);

  const Vector k1 = physical_rate(model, x, theta, t);
  const Vector k2 = physical_rate(model, x + 0.5 * dt * k1, theta, t + 0.5 * dt);
  const Vector k3 = physical_rate(model, x + 0.5 * dt * k2, theta, t + 0.5 * dt);
  const Vector k4 = physical_rate(model, x + dt * k3, theta, t + dt);

  Vector out = X;
  out.head(n) = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!out.allFinite()) throw DivergenceError("propagation produced a non-finite state", step);
  return out;
}

Matrix state_jacobian(const ModelSpec& model, const Vector& X, double dt, double t) {
  check_size(model, X);
  const auto size = X.size();
  Matrix F = Matrix::Identity(size, size);
  if (dt == 0.0) return F;
  const auto n = static_cast<Eigen::Index>(model.n_states);
  for (Eigen::Index j = 0; j < size; ++j) {
    const double h = fd_step(X(j));
    Vector plus = X, minus = X;
    plus(j) += h;
    minus(j) -= h;
    // Divide by the representable perturbation so linear maps come out exact.
    const double width = plus(j) - minus(j);
    F.col(j).head(n) =
        (propagate(model, plus, dt, t).head(n) - propagate(model, minus, dt, t).head(n)) / width;
  }
  // Parameters map to themselves.
  F.bottomRows(model.n_params).setZero();
  F.bottomRightCorner(model.n_params, model.n_params).setIdentity();
  return F;
}

Vector measure(const ModelSpec& model, const Vector& X) {
  check_size(model, X);
  Vector z = model.measurement_fn(X);
  if (static_cast<std::size_t>(z.size()) != model.n_meas)
    throw DimensionError("measurement_fn of model '" + model.id + "' returned size " +
                         std::to_string(z.size()));
  return z;
}

Matrix measurement_jacobian(const ModelSpec& model, const Vector& X) {
  check_size(model, X);
  Matrix H(model.n_meas, X.size());
  for (Eigen::Index j = 0; j < X.size(); ++j) {
    const double h = fd_step(X(j));
    Vector plus = X, minus = X;
    plus(j) += h;
    minus(j) -= h;
    const double width = plus(j) - minus(j);
    H.col(j) = (measure(model, plus) - measure(model, minus)) / width;
  }
  return H;
}

ModelSpec make_smd_model(double dt) {
  ModelSpec m;
  m.id = "smd";
  m.n_states = 2;
  m.n_params = 3;
  m.n_meas = 2;
  m.dt = dt;
  m.derivative_fn = [](const Vector& x, const Vector& th, double, const Vector&) {
    const double x1 = x(0), x2 = x(1);
    return Vector{{x2, -th(0) * x1 - th(1) * x2 - th(2) * x1 * x1 * x1}};
  };
  m.measurement_fn = [](const Vector& X) { return Vector(X.head(2)); };
  m.validate();
  return m;
}

namespace {

std::mutex& registry_mutex() {
  static std::mutex mu;
  return mu;
}

std::map<std::string, ModelFactory>& registry() {
  static std::map<std::string, ModelFactory> models{{"smd", &make_smd_model}};
  return models;
}

}  // namespace

void register_model(const std::string& id, ModelFactory factory) {
  std::lock_guard<std::mutex> lock(registry_mutex());
  registry()[id] = std::move(factory);
}

bool has_model(const std::string& id) {
  std::lock_guard<std::mutex> lock(registry_mutex());
  return registry().count(id) > 0;
}

ModelSpec make_model(const std::string& id, double dt) {
  ModelFactory factory;
  {
    std::lock_guard<std::mutex> lock(registry_mutex());
    auto it = registry().find(id);
    if (it == registry().end()) throw ConfigError("unknown model id '" + id + "'");
    factory = it->second;
  }
  ModelSpec m = factory(dt);
  m.validate();
  return m;
}

}  // namespace kftune
