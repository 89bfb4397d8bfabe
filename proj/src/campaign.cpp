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

#include "kftune/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "kftune/errors.hpp"
#include "kftune/rng.hpp"

namespace kftune {

TruthConfig smd_truth(bool with_process_noise) {
  TruthConfig t;
  t.x0 = Vector(2);
  t.x0 << 1.0, 0.0;
  t.theta = SmdParams{}.to_vector();
  t.noise.R = Eigen::Vector2d(0.001, 0.004).asDiagonal();
  t.noise.Q = with_process_noise ? Matrix(Eigen::Vector2d(0.001, 0.002).asDiagonal())
                                 : Matrix(Matrix::Zero(2, 2));
  return t;
}

std::size_t campaign_threads(std::size_t requested) {
  std::size_t n = requested;
  if (n == 0) {
    n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("KFTUNE_THREADS")) {
      char* end = nullptr;
      const long cap = std::strtol(env, &end, 10);
      if (end != env && cap > 0) n = std::min(n, static_cast<std::size_t>(cap));
    }
  }
  return std::max<std::size_t>(n, 1);
}

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  threads = std::min(std::max<std::size_t>(threads, 1), std::max<std::size_t>(count, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

NoiseAgreement noise_agreement(const Dataset& data, const Matrix& R_hat, const Matrix& Q_hat,
                               std::size_t n_states) {
  NoiseAgreement out;
  const auto N = static_cast<double>(data.size());
  Vector v_var = Vector::Zero(R_hat.rows());
  for (const auto& v : data.v) v_var += v.cwiseAbs2();
  v_var /= N;
  out.r_ratio = R_hat.diagonal().cwiseQuotient(v_var);
  if (data.Q.trace() > 0.0) {
    Vector w_var = Vector::Zero(static_cast<Eigen::Index>(n_states));
    for (const auto& w : data.w) w_var += w.cwiseAbs2();
    w_var /= N;
    out.q_ratio = Q_hat.diagonal().head(static_cast<Eigen::Index>(n_states)).cwiseQuotient(w_var);
  }
  return out;
}

SimOutcome run_single_sim(const ModelSpec& model, const TruthConfig& truth,
                          const TuningConfig& tuning, const CampaignOptions& options,
                          std::size_t index) {
  SimOutcome out;
  out.index = index;
  out.seed = derive_seed(truth.seed, index);
  const Dataset data = simulate(model, truth.augmented_x0(), truth.noise, truth.N, out.seed);
  out.theta_init = perturb_parameters(truth.theta, tuning.initial.theta_perturb, out.seed);
  out.tuning = run_rrr(model, data, tuning, stack(truth.x0, out.theta_init));
  if (!out.tuning.history.empty())
    out.noise = noise_agreement(data, out.tuning.R_hat, out.tuning.Q_hat, model.n_states);
  if (options.run_nr) {
    try {
      out.nr = nr_estimate(model, data, out.theta_init, options.nr_estimate_x0);
    } catch (const Error& e) {
      out.nr_error = e.what();
    }
  }
  // The pass products are only needed for single runs; drop them to bound memory.
  out.tuning.filter.reset();
  out.tuning.smoother.reset();
  out.tuning.dyn.reset();
  return out;
}

MonteCarloReport run_monte_carlo(const ModelSpec& model, const TruthConfig& truth,
                                 const TuningConfig& tuning, const CampaignOptions& options) {
  if (tuning.n_sims < 2) throw ConfigError("n_sims must be >= 2");
  tuning.validate();
  MonteCarloReport report;
  report.sims.resize(tuning.n_sims);
  parallel_for(tuning.n_sims, campaign_threads(options.threads), [&](std::size_t s) {
    report.sims[s] = run_single_sim(model, truth, tuning, options, s);
  });

  std::vector<SimEstimate> estimates;
  McReference ref;
  ref.theta_true = truth.theta;
  ref.R_true = truth.noise.R;
  ref.Q_true = truth.noise.Q;
  std::vector<Vector> nr_theta, nr_sigma;
  const auto n = static_cast<Eigen::Index>(model.n_states);
  Vector r_sum, q_sum;
  std::size_t used = 0;

  for (const auto& sim : report.sims) {
    if (sim.tuning.diverged) ++report.n_diverged;
    if (sim.tuning.converged) ++report.n_converged;
    const bool nr_ok = !options.run_nr || (sim.nr && sim.nr->converged);
    if (sim.tuning.diverged || sim.tuning.history.empty() || !nr_ok) {
      report.excluded.push_back(sim.index);
      continue;
    }
    SimEstimate e;
    e.theta = sim.tuning.theta_hat;
    e.P_theta = sim.tuning.P_theta;
    e.R = sim.tuning.R_hat;
    e.Q = sim.tuning.Q_hat.topLeftCorner(n, n);
    e.costs = sim.tuning.history.back().costs;
    estimates.push_back(std::move(e));
    if (options.run_nr) {
      ref.per_sim.push_back({sim.nr->theta_hat, sim.nr->crb, sim.nr->R_hat});
      nr_theta.push_back(sim.nr->theta_hat);
      nr_sigma.push_back(sim.nr->crb);
    }
    r_sum = used ? Vector(r_sum + sim.noise.r_ratio) : sim.noise.r_ratio;
    if (sim.noise.q_ratio.size())
      q_sum = used ? Vector(q_sum + sim.noise.q_ratio) : sim.noise.q_ratio;
    ++used;
  }
  if (used < 2)
    throw Error("Monte-Carlo campaign left fewer than 2 usable simulations (" +
                std::to_string(report.n_diverged) + " diverged)");
  report.metrics = aggregate_mc(estimates, ref);
  if (options.run_nr) report.nr_stats = consistency_stats(nr_theta, nr_sigma, truth.theta);
  report.noise_mean.r_ratio = r_sum / static_cast<double>(used);
  if (q_sum.size()) report.noise_mean.q_ratio = q_sum / static_cast<double>(used);
  return report;
}

std::vector<MethodSpec> standard_methods(const TuningConfig& base) {
  std::vector<MethodSpec> out;
  auto with = [&](const std::string& name, auto edit) {
    MethodSpec m{name, base};
    edit(m.tuning.estimator);
    if (m.tuning.q_zero) m.tuning.estimator.q_method = QMethod::kFixedFloor;
    out.push_back(std::move(m));
  };
  with("reference", [](EstimatorChoice&) {});
  with("iim", [](EstimatorChoice& e) { e.p0_method = P0Method::kIim; });
  with("bavdekar", [](EstimatorChoice& e) {
    e.p0_method = P0Method::kSmoothed;
    e.p0_mask = TrimMask::kFull;
    e.q_mask = TrimMask::kFull;
    e.r_mask = TrimMask::kFull;
  });
  with("mt", [](EstimatorChoice& e) {
    e.q_method = QMethod::kMt;
    e.r_method = RMethod::kMt;
  });
  with("ms", [](EstimatorChoice& e) {
    e.q_method = QMethod::kMs;
    e.r_method = RMethod::kMs;
  });
  return out;
}

bool j5_tail_oscillates(const std::vector<IterationRecord>& history, std::size_t tail) {
  if (history.size() < 4) return false;
  const std::size_t start = history.size() > tail ? history.size() - tail : 0;
  std::vector<double> j5;
  for (std::size_t i = start; i < history.size(); ++i) j5.push_back(history[i].costs.J[5]);
  double mean = 0.0;
  for (double v : j5) mean += v;
  mean /= static_cast<double>(j5.size());
  double var = 0.0;
  for (double v : j5) var += (v - mean) * (v - mean);
  const double spread = std::sqrt(var / static_cast<double>(j5.size()));
  if (!(spread > 1e-6 * std::max(std::abs(mean), 1.0))) return false;
  int turns = 0;
  for (std::size_t i = 2; i < j5.size(); ++i)
    if ((j5[i] - j5[i - 1]) * (j5[i - 1] - j5[i - 2]) < 0.0) ++turns;
  return turns >= 2;
}

MethodFlags method_flags(const MonteCarloReport& report) {
  MethodFlags f;
  for (Eigen::Index i = 0; i < report.metrics.r_ratio.size(); ++i) {
    const double r = report.metrics.r_ratio(i);
    if (!std::isfinite(r) || std::abs(r - 1.0) > 0.2) f.r_drift = true;
  }
  for (const auto& s : report.sims)
    if (j5_tail_oscillates(s.tuning.history)) ++f.oscillating;
  f.all_converged = report.n_converged == report.sims.size();
  return f;
}

std::vector<ComparisonRow> run_comparison(const ModelSpec& model, const TruthConfig& truth,
                                          const std::vector<MethodSpec>& methods,
                                          const CampaignOptions& options) {
  std::vector<ComparisonRow> rows;
  for (const auto& m : methods) {
    ComparisonRow row;
    row.name = m.name;
    try {
      row.report = run_monte_carlo(model, truth, m.tuning, options);
      row.flags = method_flags(row.report);
    } catch (const Error& e) {
      row.error = e.what();
    }
    row.report.label = m.name;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace kftune
