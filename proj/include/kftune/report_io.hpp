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

#ifndef KFTUNE_REPORT_IO_HPP_
#define KFTUNE_REPORT_IO_HPP_

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kftune/campaign.hpp"
#include "kftune/nr.hpp"
#include "kftune/rrr.hpp"

namespace kftune {

// Shortest text that round-trips the double; "nan"/"inf" for non-finite values.
std::string format_number(double v);

nlohmann::json costs_to_json(const CostReport& c);
CostReport costs_from_json(const nlohmann::json& j);

nlohmann::json tuning_result_to_json(const TuningResult& r);
// Restores the per-iteration history written by tuning_result_to_json.
std::vector<IterationRecord> history_from_json(const nlohmann::json& result);

nlohmann::json nr_result_to_json(const NrResult& r);

// Aggregate metrics named after the paper's table columns.
nlohmann::json metrics_to_json(const MonteCarloReport& report);

// iter, J0..J8, regularization counters. J0 is blank when not computed.
void write_costs_csv(std::ostream& out, const std::vector<IterationRecord>& history);

// One row per (iteration, k); iteration i covers cumulative time (i-1)*N*dt + k*dt.
void write_theta_trace_csv(std::ostream& out, const std::vector<IterationRecord>& history,
                           std::size_t n_params, std::size_t N, double dt);

// Diagonals of P0, Q and R used by each iteration.
void write_noise_csv(std::ostream& out, const std::vector<IterationRecord>& history,
                     std::size_t n_augmented, std::size_t n_states, std::size_t n_meas);

// N rows: t, then per channel Z, h(Xd), h(X_post), h(X_smooth).
void write_overlay_csv(std::ostream& out, const ModelSpec& model, const TuningResult& result);

void write_sims_csv(std::ostream& out, const MonteCarloReport& report);

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows);

// Creates parent directories; throws Error when the file cannot be written.
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace kftune

#endif  // KFTUNE_REPORT_IO_HPP_
