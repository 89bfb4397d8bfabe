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

#include "kftune/rrr.hpp"

#include <algorithm>
#include <cmath>

#include "kftune/errors.hpp"

namespace kftune {

X0Policy parse_x0_policy(const std::string& s) {
  if (s == "given") return X0Policy::kGiven;
  if (s == "smoothed") return X0Policy::kSmoothed;
  throw ConfigError("unknown x0_policy '" + s + "' (expected given|smoothed)");
}

std::string to_string(X0Policy p) { return p == X0Policy::kGiven ? "given" : "smoothed"; }

void TuningConfig::validate() const {
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
  if (!(initial.P0_diag >= 0.0) || !(initial.Q_diag >= 0.0) || !(initial.R_diag > 0.0))
    throw ConfigError("initial guesses must be non-negative (R strictly positive)");
  if (!(initial.theta_perturb >= 0.0 && initial.theta_perturb < 1.0))
    throw ConfigError("theta_perturb must be in [0, 1)");
  if (!(estimator.q_floor >= 0.0)) throw ConfigError("q_floor must be >= 0");
  if (!q_zero && estimator.r_method == RMethod::kDynResidue)
    throw ConfigError("r=dyn is only available with q_zero");
}

TuningConfig rrr_q0_config() {
  TuningConfig c;
  c.q_zero = true;
  c.estimator.q_method = QMethod::kFixedFloor;
  c.max_iters = 20;
  return c;
}

TuningConfig rrr_qpos_config() {
  TuningConfig c;
  c.q_zero = false;
  c.max_iters = 100;
  return c;
}

double max_relative_change(const Vector& a, const Vector& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = std::abs(a(i) - b(i));
    worst = std::max(worst, b(i) != 0.0 ? d / std::abs(b(i)) : d);
  }
  return worst;
}

namespace {

bool needs_dynamical_pass(const EstimatorChoice& e) {
  return e.q_method == QMethod::kDsdt || e.r_method == RMethod::kDynResidue;
}

Matrix next_P0(const EstimatorChoice& e, const FilterPass& pass, const SmootherPass& smoother,
               std::size_t n_states) {
  switch (e.p0_method) {
    case P0Method::kScaleUp:
      return p0_scale_up(pass.P_post.back(), pass.size(), e.p0_mask, n_states);
    case P0Method::kIim:
      return p0_iim(pass, pass.R, e.p0_mask, n_states);
    case P0Method::kSmoothed:
      return p0_smoothed(smoother, e.p0_mask, n_states);
  }
  return {};
}

Vector sigma_at(const Matrix& P, std::size_t n_states, std::size_t n_params) {
  return P.diagonal().segment(n_states, n_params).cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

TuningResult run_rrr(const ModelSpec& model, const Dataset& data, const TuningConfig& config,
                     const Vector& X0_initial) {
  model.validate();
  config.validate();
  data.validate(model);
  const std::size_t n = model.n_states, p = model.n_params;
  const auto dim = static_cast<Eigen::Index>(model.augmented_size());
  if (X0_initial.size() != dim) throw DimensionError("run_rrr: X0_initial has wrong size");

  const EstimatorChoice& est = config.estimator;
  const bool q_floor_mode = config.q_zero || est.q_method == QMethod::kFixedFloor;

  Vector X0 = X0_initial;
  Matrix P0 = config.initial.P0_diag * Matrix::Identity(dim, dim);
  Matrix Q = q_floor_mode ? q_floor_matrix(model, est.q_floor) : Matrix::Zero(dim, dim);
  if (!q_floor_mode) Q.diagonal().head(n).setConstant(config.initial.Q_diag);
  Matrix R = config.initial.R_diag *
             Matrix::Identity(static_cast<Eigen::Index>(model.n_meas),
                              static_cast<Eigen::Index>(model.n_meas));

  TuningResult res;
  Vector theta_prev = X0.tail(p);

  for (std::size_t it = 1; it <= config.max_iters; ++it) {
    IterationRecord rec;
    rec.iteration = it;
    rec.theta0 = X0.tail(p);
    rec.P0_diag = P0.diagonal();
    rec.Q_diag = Q.diagonal().head(n);
    rec.R_diag = R.diagonal();

    auto filter = std::make_shared<FilterPass>();
    auto smoother = std::make_shared<SmootherPass>();
    auto dyn = std::make_shared<DynamicalPass>();
    Matrix P0_new, Q_new, R_new;
    EstimatorTelemetry telemetry;
    try {
      *filter = ekf_forward(model, X0, P0, Q, R, data, config.filter);
      *smoother = rts_smooth(model, *filter);
      smoother->lag_one = lag_one_covariances(*filter, *smoother);
      const Vector theta_hat = filter->X_post.back().tail(p);
      *dyn = dynamical_pass(model, *smoother, theta_hat, model.dt);

      std::optional<InitialPrior> prior;
      if (config.report_j0) prior = InitialPrior{data.x0_true, X0, P0};
      rec.costs = compute_costs(model, *filter, *smoother, *dyn, Q, R, prior);

      const PassProducts products{filter.get(), smoother.get(),
                                  needs_dynamical_pass(est) ? dyn.get() : nullptr};
      P0_new = next_P0(est, *filter, *smoother, n);
      R_new = estimate_R(est.r_method, products, model, est.r_mask, &telemetry);
      Q_new = q_floor_mode ? q_floor_matrix(model, est.q_floor)
                           : estimate_Q(est.q_method, products, model, est.q_mask, est.q_floor,
                                        &telemetry);
    } catch (const DivergenceError& e) {
      res.diverged = true;
      res.message = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    } catch (const SingularMatrixError& e) {
      res.diverged = true;
      res.message = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }

    const Matrix& P_N = filter->P_post.back();
    const Vector theta_hat = filter->X_post.back().tail(p);
    rec.theta_final = theta_hat;
    rec.sigma_final = sigma_at(P_N, n, p);
    rec.clamped_entries = telemetry.clamped_entries;
    rec.regularized_solves = filter->regularized_solves + smoother->regularized_solves;
    if (config.record_traces) {
      for (std::size_t k = 0; k < filter->X_post.size(); ++k) {
        rec.theta_trace.push_back(filter->X_post[k].tail(p));
        rec.sigma_trace.push_back(sigma_at(filter->P_post[k], n, p));
      }
    }

    rec.max_rel_change =
        std::max({max_relative_change(theta_hat, theta_prev),
                  max_relative_change(R_new.diagonal(), R.diagonal()),
                  max_relative_change(Q_new.diagonal().head(n), Q.diagonal().head(n))});
    theta_prev = theta_hat;

    res.theta_hat = theta_hat;
    res.P_theta = P_N.bottomRightCorner(p, p);
    res.R_hat = R_new;
    res.Q_hat = Q_new;
    res.P0_hat = P0_new;
    res.X0_hat = X0;
    res.iterations_used = it;
    res.filter = filter;
    res.smoother = smoother;
    res.dyn = dyn;
    const double change = rec.max_rel_change;
    res.history.push_back(std::move(rec));

    // Statistics for the next pass.
    X0.head(n) = config.x0_policy == X0Policy::kGiven ? Vector(data.x0_true.head(n))
                                                      : Vector(smoother->X_smooth[0].head(n));
    X0.tail(p) = theta_hat;
    P0 = P0_new;
    Q = Q_new;
    R = R_new;

    res.converged = change <= config.tol;
    if (res.converged && !config.fixed_iterations) break;
  }
  if (res.history.empty() && !res.diverged) res.message = "no iterations completed";
  return res;
}

}  // namespace kftune
