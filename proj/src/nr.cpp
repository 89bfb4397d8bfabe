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

#include "kftune/nr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kftune/errors.hpp"

namespace kftune {

namespace {

// Stacked output trajectory y_k = h(Xd_k), one block of m rows per sample.
Vector outputs(const ModelSpec& model, const Dataset& data, const Vector& x0,
               const Vector& theta) {
  const std::size_t N = data.size();
  const auto m = static_cast<Eigen::Index>(model.n_meas);
  Vector y(static_cast<Eigen::Index>(N) * m);
  Vector X = stack(x0, theta);
  for (std::size_t k = 1; k <= N; ++k) {
    X = propagate(model, X, model.dt, static_cast<double>(k - 1) * model.dt, k);
    y.segment(static_cast<Eigen::Index>(k - 1) * m, m) = measure(model, X);
  }
  return y;
}

Vector stacked_measurements(const ModelSpec& model, const Dataset& data) {
  const auto m = static_cast<Eigen::Index>(model.n_meas);
  Vector z(static_cast<Eigen::Index>(data.size()) * m);
  for (std::size_t k = 1; k <= data.size(); ++k)
    z.segment(static_cast<Eigen::Index>(k - 1) * m, m) = data.z(k);
  return z;
}

struct Unknowns {
  std::size_t n_x0;
  Vector x0_fixed;

  Vector x0(const Vector& beta) const { return n_x0 ? Vector(beta.head(n_x0)) : x0_fixed; }
  Vector theta(const Vector& beta) const { return beta.tail(beta.size() - n_x0); }
};

// Central-difference sensitivities of the stacked outputs, (N*m) x dim(beta).
Matrix sensitivities(const ModelSpec& model, const Dataset& data, const Unknowns& u,
                     const Vector& beta) {
  Matrix S(static_cast<Eigen::Index>(data.size() * model.n_meas), beta.size());
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double h = fd_step(beta(j));
    Vector bp = beta, bm = beta;
    bp(j) += h;
    bm(j) -= h;
    const double width = bp(j) - bm(j);
    S.col(j) = (outputs(model, data, u.x0(bp), u.theta(bp)) -
                outputs(model, data, u.x0(bm), u.theta(bm))) /
               width;
  }
  return S;
}

// Per-sample weights repeated over the stacked output layout.
Vector stacked_weights(const Vector& r_diag, std::size_t N) {
  return r_diag.cwiseInverse().replicate(static_cast<Eigen::Index>(N), 1);
}

Vector diag_residual_cov(const Vector& e, Eigen::Index m, double floor) {
  const Eigen::Index N = e.size() / m;
  Vector r = Vector::Zero(m);
  for (Eigen::Index k = 0; k < N; ++k) r += e.segment(k * m, m).cwiseAbs2();
  r /= static_cast<double>(N);
  return r.cwiseMax(floor);
}

}  // namespace

VectorSeq nr_residuals(const ModelSpec& model, const Dataset& data, const Vector& x0,
                       const Vector& theta) {
  const Vector e = stacked_measurements(model, data) - outputs(model, data, x0, theta);
  const auto m = static_cast<Eigen::Index>(model.n_meas);
  VectorSeq out;
  for (std::size_t k = 0; k < data.size(); ++k)
    out.push_back(e.segment(static_cast<Eigen::Index>(k) * m, m));
  return out;
}

double nr_weighted_cost(const ModelSpec& model, const Dataset& data, const Vector& x0,
                        const Vector& theta, const Vector& r_diag) {
  const Vector e = stacked_measurements(model, data) - outputs(model, data, x0, theta);
  return 0.5 * e.cwiseAbs2().dot(stacked_weights(r_diag, data.size()));
}

Vector nr_gradient(const ModelSpec& model, const Dataset& data, const Vector& x0,
                   const Vector& theta, const Vector& r_diag) {
  const Unknowns u{0, x0};
  const Vector e = stacked_measurements(model, data) - outputs(model, data, x0, theta);
  const Matrix S = sensitivities(model, data, u, theta);
  return -(S.transpose() * stacked_weights(r_diag, data.size()).asDiagonal() * e);
}

NrResult nr_estimate(const ModelSpec& model, const Dataset& data, const Vector& theta_init,
                     bool estimate_x0, const NrOptions& options) {
  model.validate();
  data.validate(model);
  if (static_cast<std::size_t>(theta_init.size()) != model.n_params)
    throw DimensionError("nr_estimate: theta_init has wrong size");

  const auto m = static_cast<Eigen::Index>(model.n_meas);
  const std::size_t N = data.size();
  const Vector z = stacked_measurements(model, data);
  const Vector x0_given = data.x0_true.head(model.n_states);
  const Unknowns u{estimate_x0 ? model.n_states : 0, x0_given};
  Vector beta = estimate_x0 ? stack(x0_given, theta_init) : theta_init;

  auto weighted = [&](const Vector& e, const Vector& w) { return 0.5 * e.cwiseAbs2().dot(w); };

  NrResult res;
  Vector e = z - outputs(model, data, u.x0(beta), u.theta(beta));
  Vector r = diag_residual_cov(e, m, options.r_floor);
  Matrix M;

  for (std::size_t it = 1; it <= options.max_iters; ++it) {
    res.iterations = it;
    const Vector w = stacked_weights(r, N);
    const double cost = weighted(e, w);
    const Matrix S = sensitivities(model, data, u, beta);
    M = S.transpose() * w.asDiagonal() * S;
    const Vector g = S.transpose() * w.asDiagonal() * e;

    Eigen::LDLT<Matrix> ldlt(M);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
      throw SingularMatrixError("output-error information matrix is singular", it);
    const Vector step = ldlt.solve(g);

    if (cost == 0.0 || g.isZero(0.0)) {
      res.converged = true;
      break;
    }

    double scale = 1.0;
    Vector trial_beta, trial_e;
    double trial_cost = 0.0;
    bool accepted = false;
    for (std::size_t h = 0; h <= options.max_halvings; ++h, scale *= 0.5) {
      trial_beta = beta + scale * step;
      try {
        trial_e = z - outputs(model, data, u.x0(trial_beta), u.theta(trial_beta));
      } catch (const DivergenceError&) {
        continue;
      }
      trial_cost = weighted(trial_e, w);
      if (trial_cost <= cost) {
        accepted = true;
        break;
      }
    }
    const double rel_step =
        (scale * step).norm() / std::max(beta.norm(), std::numeric_limits<double>::min());
    if (!accepted) {
      // No descent left: either at the numerical floor or genuinely stuck.
      res.converged = rel_step < 1e-8;
      if (!res.converged) res.message = "step halving failed to reduce the cost";
      break;
    }
    beta = trial_beta;
    e = trial_e;
    r = diag_residual_cov(e, m, options.r_floor);
    if ((cost - trial_cost) <= options.cost_tol * cost || rel_step < 1e-12) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged && res.message.empty()) res.message = "iteration limit reached";

  // Information matrix at the final estimate with the final R.
  const Vector w = stacked_weights(r, N);
  const Matrix S = sensitivities(model, data, u, beta);
  M = S.transpose() * w.asDiagonal() * S;
  Eigen::SelfAdjointEigenSolver<Matrix> es(M);
  if (!(es.eigenvalues().minCoeff() > 1e-14 * es.eigenvalues().cwiseAbs().maxCoeff())) {
    std::string dirs;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      if (es.eigenvalues()(i) > 1e-14 * es.eigenvalues().cwiseAbs().maxCoeff()) continue;
      Eigen::Index arg;
      es.eigenvectors().col(i).cwiseAbs().maxCoeff(&arg);
      dirs += (dirs.empty() ? "" : ", ") + std::to_string(arg);
    }
    throw SingularMatrixError("output-error information matrix is singular in unknowns [" + dirs +
                                  "]",
                              res.iterations);
  }
  const Matrix Minv =
      es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();

  res.theta_hat = u.theta(beta);
  res.x0_hat = u.x0(beta);
  res.crb = Minv.diagonal().tail(model.n_params).cwiseSqrt();
  res.R_hat = r.asDiagonal();
  res.cost_final = weighted(e, w) + 0.5 * static_cast<double>(N) * r.array().log().sum();
  return res;
}

}  // namespace kftune
