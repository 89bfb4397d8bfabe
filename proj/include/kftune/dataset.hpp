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

#ifndef KFTUNE_DATASET_HPP_
#define KFTUNE_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kftune/model.hpp"
#include "kftune/types.hpp"

namespace kftune {

struct NoiseSpec {
  Matrix R;  // m x m measurement-noise covariance
  Matrix Q;  // n x n process-noise covariance on the physical states

  // Throws ConfigError on wrong sizes or a non-PSD matrix.
  void validate(const ModelSpec& model) const;
};

/// One simulated (or loaded) measurement record.
///
/// Sequences hold samples k = 1..N at positions 0..N-1; times[i] = (i+1)*dt.
/// truth holds the augmented state after each step, w the process noise added
/// to the physical states and v the measurement noise.
struct Dataset {
  std::string model_id;
  std::uint64_t seed = 0;
  double dt = 0.0;
  Vector x0_true;     // augmented state at t0
  Matrix R;
  Matrix Q;
  std::vector<double> times;
  VectorSeq Z;
  VectorSeq truth;
  VectorSeq w;
  VectorSeq v;

  std::size_t size() const { return Z.size(); }
  // Measurement k in 1-based filter indexing.
  const Vector& z(std::size_t k) const { return Z.at(k - 1); }
  Vector theta_true(const ModelSpec& model) const { return x0_true.tail(model.n_params); }

  // Throws DatasetError when sequence lengths or dimensions disagree.
  void validate(const ModelSpec& model) const;
};

Dataset simulate(const ModelSpec& model, const Vector& x0_true, const NoiseSpec& noise,
                 std::size_t n_samples, std::uint64_t seed);

// Each component scaled by an independent draw from U[1-fraction, 1+fraction].
Vector perturb_parameters(const Vector& theta_true, double fraction, std::uint64_t seed);

nlohmann::json dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(const nlohmann::json& j);

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
// expected_model_id, when given, must match the file's model_id.
Dataset load_dataset(const std::filesystem::path& path,
                     const std::optional<std::string>& expected_model_id = std::nullopt);

// Matrix square root factor L with L L^T = cov for a symmetric PSD cov.
Matrix noise_factor(const Matrix& cov, const std::string& name);

// JSON helpers shared with the config and report writers. Matrices are stored
// column-major: j[col][row].
nlohmann::json vector_to_json(const Vector& v);
nlohmann::json matrix_to_json(const Matrix& m);
Vector vector_from_json(const nlohmann::json& j, const std::string& field);
Matrix matrix_from_json(const nlohmann::json& j, const std::string& field);

}  // namespace kftune

#endif  // KFTUNE_DATASET_HPP_
