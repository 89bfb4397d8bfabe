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

#include "kftune/costs.hpp"

#include <cmath>

#include "kftune/errors.hpp"

namespace kftune {

namespace {

struct Quadratic {
  double value = 0.0;
  double log_det = 0.0;
};

Quadratic floored_quadratic_impl(const Vector& e, const Matrix& W, std::size_t* events) {
  const Matrix Ws = symmetrize(W);
  const double floor = 1e-10 * std::max(std::abs(Ws.trace()), 1e-300);
  Eigen::SelfAdjointEigenSolver<Matrix> es(Ws);
  Vector ev = es.eigenvalues();
  if (ev.minCoeff() < floor) {
    if (events) ++*events;
    ev = ev.cwiseMax(floor);
  }
  const Vector y = es.eigenvectors().transpose() * e;
  return {y.cwiseAbs2().cwiseQuotient(ev).sum(), ev.array().log().sum()};
}

}  // namespace

double floored_quadratic(const Vector& e, const Matrix& W, std::size_t* events) {
  return floored_quadratic_impl(e, W, events).value;
}

CostReport compute_costs(const ModelSpec& model, const FilterPass& pass,
                         const SmootherPass& smoother, const DynamicalPass& dyn,
                         const Matrix& Q_aug, const Matrix& R,
                         const std::optional<InitialPrior>& prior) {
  const std::size_t N = pass.size();
  if (N == 0) throw Error("compute_costs: empty pass");
  const auto n = static_cast<Eigen::Index>(model.n_states);
  CostReport c;

  if (prior) {
    const Vector d = prior->X0 - prior->X_true;
    const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(symmetrize(prior->P0));
    c.J[0] = 0.5 * d.dot(cod.pseudoInverse() * d);
    c.has_J0 = true;
  }

  for (std::size_t k = 1; k <= N; ++k) {
    // Measurement balance.
    const Vector& nu = pass.innovation[k];
    const Quadratic q1 = floored_quadratic_impl(nu, pass.S1[k], &c.s1_events);
    c.J[1] += q1.value;
    c.J[5] += q1.value + q1.log_det;

    const Matrix S2 = R - pass.H_post[k] * pass.P_post[k] * pass.H_post[k].transpose();
    c.J[2] += floored_quadratic(pass.residue[k], S2, &c.s2_events);

    const Matrix S3 = R - smoother.H_smooth[k] * smoother.P_smooth[k] *
                              smoother.H_smooth[k].transpose();
    c.J[3] += floored_quadratic(smoother.smoothed_residue[k], S3, &c.s3_events);

    const Vector ed = pass.Z[k] - measure(model, dyn.Xd[k]);
    c.J[4] += ed.squaredNorm();

    // State balance, physical-state block.
    const Matrix& L = smoother.lag_one[k];
    const double t_prev = static_cast<double>(k - 1) * pass.dt;
    const Matrix& F = smoother.F_smooth[k - 1];
    const Vector w1 =
        smoother.X_smooth[k] - propagate(model, smoother.X_smooth[k - 1], pass.dt, t_prev, k);
    const Matrix W1 = Q_aug - smoother.P_smooth[k] - F * smoother.P_smooth[k - 1] * F.transpose() +
                      L * F.transpose() + F * L.transpose();
    c.J[6] += floored_quadratic(w1.head(n), W1.topLeftCorner(n, n), &c.w1_events);

    const Matrix& Fd = dyn.Fd[k - 1];
    const Vector w2 = (smoother.X_smooth[k] - dyn.Xd[k]) -
                      Fd * (smoother.X_smooth[k - 1] - dyn.Xd[k - 1]);
    const Matrix W2 = Q_aug - smoother.P_smooth[k] - Fd * smoother.P_smooth[k - 1] * Fd.transpose() +
                      L * Fd.transpose() + Fd * L.transpose();
    c.J[7] += floored_quadratic(w2.head(n), W2.topLeftCorner(n, n), &c.w2_events);

    const Vector w3 = pass.X_post[k] - pass.X_prior[k];
    const Matrix W3 = pass.P_prior[k] - pass.P_post[k];
    c.J[8] += floored_quadratic(w3.head(n), W3.topLeftCorner(n, n), &c.w3_events);
  }
  for (std::size_t i = 1; i < c.J.size(); ++i) c.J[i] /= static_cast<double>(N);
  return c;
}

VectorSeq measurement_slots(const VectorSeq& seq) {
  if (seq.empty()) return {};
  return VectorSeq(seq.begin() + 1, seq.end());
}

WhitenessReport whiteness(const VectorSeq& samples, std::size_t max_lag) {
  const std::size_t N = samples.size();
  if (N < 30) throw Error("whiteness: need at least 30 samples, got " + std::to_string(N));
  max_lag = std::min(max_lag, N - 1);
  const auto channels = samples[0].size();
  WhitenessReport rep;
  rep.autocorr = Matrix::Zero(static_cast<Eigen::Index>(max_lag + 1), channels);
  rep.band = 2.0 / std::sqrt(static_cast<double>(N));
  rep.degenerate.assign(static_cast<std::size_t>(channels), false);
  std::size_t outside = 0, total = 0;

  for (Eigen::Index c = 0; c < channels; ++c) {
    double sum = 0.0, energy = 0.0;
    for (const auto& s : samples) {
      sum += s(c);
      energy += s(c) * s(c);
    }
    const double mean = sum / static_cast<double>(N);
    const double ms = energy / static_cast<double>(N);
    const double var = ms - mean * mean;
    if (!(var > 1e-14 * ms)) rep.degenerate[static_cast<std::size_t>(c)] = true;
    for (std::size_t lag = 0; lag <= max_lag; ++lag) {
      double acc = 0.0;
      for (std::size_t k = 0; k + lag < N; ++k) acc += samples[k](c) * samples[k + lag](c);
      const double r =
          ms > 0.0 ? (acc / static_cast<double>(N - lag)) / ms : (lag == 0 ? 1.0 : 0.0);
      rep.autocorr(static_cast<Eigen::Index>(lag), c) = r;
      if (lag > 0) {
        ++total;
        if (std::abs(r) > rep.band) ++outside;
      }
    }
  }
  rep.fraction_outside = total ? static_cast<double>(outside) / static_cast<double>(total) : 0.0;
  return rep;
}

}  // namespace kftune
