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

#ifndef KFTUNE_CAMPAIGN_HPP_
#define KFTUNE_CAMPAIGN_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kftune/dataset.hpp"
#include "kftune/metrics.hpp"
#include "kftune/model.hpp"
#include "kftune/nr.hpp"
#include "kftune/rrr.hpp"

namespace kftune {

struct TruthConfig {
  std::string model_id = "smd";
  double dt = 0.1;
  std::size_t N = 100;
  Vector x0;     // physical initial state
  Vector theta;  // true parameters
  NoiseSpec noise;
  std::uint64_t seed = 1;

  Vector augmented_x0() const { return stack(x0, theta); }
};

// x0 = (1, 0), theta = (4, 0.4, 0.6), R = diag(0.001, 0.004), Q = diag(0.001, 0.002).
TruthConfig smd_truth(bool with_process_noise);

struct CampaignOptions {
  // Run the output-error reference on every simulation (Q = 0 studies).
  bool run_nr = true;
  bool nr_estimate_x0 = false;
  // 0 means KFTUNE_THREADS or the hardware concurrency.
  std::size_t threads = 0;
};

// Estimated statistic divided by the sample variance of the injected noise.
struct NoiseAgreement {
  Vector r_ratio;  // m
  Vector q_ratio;  // n, empty without process noise
};

struct SimOutcome {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  Vector theta_init;
  TuningResult tuning;
  std::optional<NrResult> nr;
  std::string nr_error;
  NoiseAgreement noise;
};

struct MonteCarloReport {
  std::string label;
  std::vector<SimOutcome> sims;
  std::size_t n_diverged = 0;
  std::size_t n_converged = 0;
  std::vector<std::size_t> excluded;  // diverged or without a reference
  McMetrics metrics;
  // Output-error scatter columns (consistency ratio, spread factor).
  std::optional<ConsistencyStats> nr_stats;
  NoiseAgreement noise_mean;
};

std::size_t campaign_threads(std::size_t requested);

// Runs fn(i) for i in [0, count) on a small thread pool; the first exception
// thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

SimOutcome run_single_sim(const ModelSpec& model, const TruthConfig& truth,
                          const TuningConfig& tuning, const CampaignOptions& options,
                          std::size_t index);

MonteCarloReport run_monte_carlo(const ModelSpec& model, const TruthConfig& truth,
                                 const TuningConfig& tuning, const CampaignOptions& options = {});

NoiseAgreement noise_agreement(const Dataset& data, const Matrix& R_hat, const Matrix& Q_hat,
                               std::size_t n_states);

struct MethodSpec {
  std::string name;
  TuningConfig tuning;
};

// The adaptive methods compared side by side: reference, iim, bavdekar, mt, ms.
std::vector<MethodSpec> standard_methods(const TuningConfig& base);

struct MethodFlags {
  bool r_drift = false;            // some |R ratio - 1| > 0.2
  std::size_t oscillating = 0;     // sims whose J5 tail oscillates
  bool all_converged = false;
};

MethodFlags method_flags(const MonteCarloReport& report);

// True when the last values of the J5 history change direction at least
// twice with a non-negligible spread.
bool j5_tail_oscillates(const std::vector<IterationRecord>& history, std::size_t tail = 10);

struct ComparisonRow {
  std::string name;
  MonteCarloReport report;
  MethodFlags flags;
  std::string error;  // set when the campaign could not be aggregated
};

std::vector<ComparisonRow> run_comparison(const ModelSpec& model, const TruthConfig& truth,
                                          const std::vector<MethodSpec>& methods,
                                          const CampaignOptions& options = {});

}  // namespace kftune

#endif  // KFTUNE_CAMPAIGN_HPP_
