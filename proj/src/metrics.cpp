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

#include "kftune/metrics.hpp"

#include <cmath>
#include <limits>

#include "kftune/errors.hpp"

namespace kftune {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Mean over sims of num(s)_i / den(s)_i; components with a zero denominator
// anywhere become NaN and are listed in undefined.
template <typename Num, typename Den>
Vector mean_ratio(std::size_t n_sims, Eigen::Index size, Num num, Den den, const std::string& name,
                  std::vector<std::string>& undefined) {
  Vector out = Vector::Zero(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    double acc = 0.0;
    bool ok = true;
    for (std::size_t s = 0; s < n_sims; ++s) {
      const double d = den(s, i);
      if (d == 0.0 || !std::isfinite(d)) {
        ok = false;
        break;
      }
      acc += num(s, i) / d;
    }
    if (ok) {
      out(i) = acc / static_cast<double>(n_sims);
    } else {
      out(i) = kNaN;
      undefined.push_back(name + "[" + std::to_string(i) + "]");
    }
  }
  return out;
}

}  // namespace

Matrix correlation_matrix(const Matrix& P) {
  Matrix C(P.rows(), P.cols());
  for (Eigen::Index i = 0; i < P.rows(); ++i)
    for (Eigen::Index j = 0; j < P.cols(); ++j)
      C(i, j) = (i == j) ? 1.0 : P(i, j) / std::sqrt(P(i, i) * P(j, j));
  return C;
}

ConsistencyStats consistency_stats(const std::vector<Vector>& estimates,
                                   const std::vector<Vector>& sigmas, const Vector& theta_true) {
  if (estimates.size() < 2 || estimates.size() != sigmas.size())
    throw Error("consistency_stats: need >= 2 matching estimates and sigmas");
  const auto ns = static_cast<double>(estimates.size());
  const auto p = theta_true.size();
  Vector mean = Vector::Zero(p), sigma_avg = Vector::Zero(p), spread = Vector::Zero(p);
  for (std::size_t s = 0; s < estimates.size(); ++s) {
    mean += estimates[s];
    sigma_avg += sigmas[s];
    spread += ((theta_true - estimates[s]).cwiseAbs2() + sigmas[s].cwiseAbs2()).cwiseSqrt();
  }
  mean /= ns;
  sigma_avg /= ns;
  spread /= ns;
  Vector scatter = Vector::Zero(p);
  for (const auto& e : estimates) scatter += (e - mean).cwiseAbs2();
  scatter = (scatter / ns).cwiseSqrt();

  ConsistencyStats out;
  out.consistency_ratio.resize(p);
  out.spread_factor.resize(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    out.consistency_ratio(i) = sigma_avg(i) > 0.0 ? scatter(i) / sigma_avg(i) : kNaN;
    out.spread_factor(i) =
        theta_true(i) != 0.0 ? spread(i) * 100.0 / std::abs(theta_true(i)) : kNaN;
  }
  return out;
}

McMetrics aggregate_mc(const std::vector<SimEstimate>& sims, const McReference& ref) {
  if (sims.size() < 2) throw Error("aggregate_mc: need at least 2 simulations");
  const bool per_sim = !ref.per_sim.empty();
  if (per_sim && ref.per_sim.size() != sims.size())
    throw Error("aggregate_mc: reference count does not match simulation count");
  const std::size_t ns = sims.size();
  const auto p = sims[0].theta.size();
  const auto m = sims[0].R.rows();
  const auto n = sims[0].Q.rows();

  McMetrics out;
  out.n_used = ns;
  auto sigma_of = [&](std::size_t s) { return Vector(sims[s].P_theta.diagonal().cwiseSqrt()); };

  out.theta_ratio = mean_ratio(
      ns, p, [&](std::size_t s, Eigen::Index i) { return sims[s].theta(i); },
      [&](std::size_t s, Eigen::Index i) {
        return per_sim ? ref.per_sim[s].theta(i) : ref.theta_true(i);
      },
      "theta_ratio", out.undefined);

  if (per_sim) {
    out.crb_ratio = mean_ratio(
        ns, p, [&](std::size_t s, Eigen::Index i) { return sigma_of(s)(i); },
        [&](std::size_t s, Eigen::Index i) { return ref.per_sim[s].sigma(i); }, "crb_ratio",
        out.undefined);
  } else {
    out.crb_ratio = Vector::Constant(p, kNaN);
    for (Eigen::Index i = 0; i < p; ++i)
      out.undefined.push_back("crb_ratio[" + std::to_string(i) + "]");
  }

  out.r_ratio = mean_ratio(
      ns, m, [&](std::size_t s, Eigen::Index i) { return sims[s].R(i, i); },
      [&](std::size_t s, Eigen::Index i) {
        return per_sim ? ref.per_sim[s].R(i, i) : ref.R_true(i, i);
      },
      "r_ratio", out.undefined);

  out.q_ratio = mean_ratio(
      ns, n, [&](std::size_t s, Eigen::Index i) { return sims[s].Q(i, i); },
      [&](std::size_t, Eigen::Index i) {
        return ref.Q_true.size() ? ref.Q_true(i, i) : 0.0;
      },
      "q_ratio", out.undefined);

  std::vector<Vector> estimates, sigmas;
  for (std::size_t s = 0; s < ns; ++s) {
    estimates.push_back(sims[s].theta);
    sigmas.push_back(sigma_of(s));
  }
  const ConsistencyStats cs = consistency_stats(estimates, sigmas, ref.theta_true);
  out.consistency_ratio = cs.consistency_ratio;
  out.spread_factor = cs.spread_factor;

  for (std::size_t j = 0; j < out.cost_mean.size(); ++j) {
    double sum = 0.0;
    for (const auto& s : sims) sum += s.costs.J[j];
    const double mean = sum / static_cast<double>(ns);
    double var = 0.0;
    for (const auto& s : sims) var += (s.costs.J[j] - mean) * (s.costs.J[j] - mean);
    out.cost_mean[j] = mean;
    out.cost_std[j] = std::sqrt(var / static_cast<double>(ns));
  }

  out.correlation_matrix = Matrix::Zero(p, p);
  for (const auto& s : sims) out.correlation_matrix += correlation_matrix(s.P_theta);
  out.correlation_matrix /= static_cast<double>(ns);
  out.correlation_matrix.diagonal().setOnes();
  return out;
}

}  // namespace kftune
