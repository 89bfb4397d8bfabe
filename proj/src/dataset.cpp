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

#include "kftune/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "kftune/errors.hpp"
#include "kftune/rng.hpp"

namespace kftune {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "kftune-dataset";
constexpr int kVersion = 1;
constexpr const char* kLayout =
    "sequences are time-major: arr[k][i] is component i at sample k+1 (t = times[k]); "
    "matrices are column-major: arr[col][row]; x0_true and theta_true are plain vectors";

bool is_diagonal(const Matrix& m) {
  return (m - Matrix(m.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
}

}  // namespace

Matrix noise_factor(const Matrix& cov, const std::string& name) {
  if (cov.rows() != cov.cols()) throw ConfigError(name + " must be square");
  if (cov.size() == 0) return cov;
  if (!cov.allFinite()) throw ConfigError(name + " has non-finite entries");
  if (asymmetry(cov) > 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff()))
    throw ConfigError(name + " is not symmetric");
  const double tol = 1e-12 * std::max(1.0, cov.diagonal().cwiseAbs().sum());
  if (is_diagonal(cov)) {
    if (cov.diagonal().minCoeff() < 0.0)
      throw ConfigError(name + " is not positive semi-definite");
    return cov.diagonal().cwiseSqrt().asDiagonal();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(cov));
  if (es.eigenvalues().minCoeff() < -tol)
    throw ConfigError(name + " is not positive semi-definite");
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

void NoiseSpec::validate(const ModelSpec& model) const {
  if (static_cast<std::size_t>(R.rows()) != model.n_meas || R.rows() != R.cols())
    throw ConfigError("R must be " + std::to_string(model.n_meas) + "x" +
                      std::to_string(model.n_meas));
  if (static_cast<std::size_t>(Q.rows()) != model.n_states || Q.rows() != Q.cols())
    throw ConfigError("Q must be " + std::to_string(model.n_states) + "x" +
                      std::to_string(model.n_states));
  noise_factor(R, "R");
  noise_factor(Q, "Q");
}

void Dataset::validate(const ModelSpec& model) const {
  const std::size_t n = Z.size();
  if (n < 2) throw DatasetError("dataset needs at least 2 samples, has " + std::to_string(n));
  if (times.size() != n || truth.size() != n || w.size() != n || v.size() != n)
    throw DatasetError("dataset sequences have different lengths");
  if (model_id != model.id)
    throw DatasetError("dataset model_id '" + model_id + "' does not match model '" + model.id +
                       "'");
  if (static_cast<std::size_t>(x0_true.size()) != model.augmented_size())
    throw DatasetError("x0_true has wrong size");
  for (std::size_t k = 0; k < n; ++k) {
    if (static_cast<std::size_t>(Z[k].size()) != model.n_meas)
      throw DatasetError("Z[" + std::to_string(k) + "] has wrong size");
    if (k > 0 && !(times[k] > times[k - 1]))
      throw DatasetError("times must be strictly increasing (index " + std::to_string(k) + ")");
  }
}

Dataset simulate(const ModelSpec& model, const Vector& x0_true, const NoiseSpec& noise,
                 std::size_t n_samples, std::uint64_t seed) {
  model.validate();
  noise.validate(model);
  if (n_samples < 2) throw ConfigError("N must be >= 2");
  if (static_cast<std::size_t>(x0_true.size()) != model.augmented_size())
    throw DimensionError("x0_true has wrong size");

  const Matrix Lq = noise_factor(noise.Q, "Q");
  const Matrix Lr = noise_factor(noise.R, "R");
  const auto n = static_cast<Eigen::Index>(model.n_states);
  const auto m = static_cast<Eigen::Index>(model.n_meas);

  Dataset ds;
  ds.model_id = model.id;
  ds.seed = seed;
  ds.dt = model.dt;
  ds.x0_true = x0_true;
  ds.R = noise.R;
  ds.Q = noise.Q;
  ds.times.reserve(n_samples);
  ds.Z.reserve(n_samples);
  ds.truth.reserve(n_samples);
  ds.w.reserve(n_samples);
  ds.v.reserve(n_samples);

  // Draw order per step: n process-noise normals, then m measurement normals.
  CounterRng rng = make_stream(seed, StreamPurpose::kNoise);
  Vector X = x0_true;
  for (std::size_t k = 1; k <= n_samples; ++k) {
    const double t_prev = static_cast<double>(k - 1) * model.dt;
    X = propagate(model, X, model.dt, t_prev, k);
    Vector ew(n), ev(m);
    for (Eigen::Index i = 0; i < n; ++i) ew(i) = rng.normal();
    for (Eigen::Index i = 0; i < m; ++i) ev(i) = rng.normal();
    const Vector wk = Lq * ew;
    const Vector vk = Lr * ev;
    X.head(n) += wk;
    ds.times.push_back(static_cast<double>(k) * model.dt);
    ds.truth.push_back(X);
    ds.w.push_back(wk);
    ds.v.push_back(vk);
    ds.Z.push_back(measure(model, X) + vk);
  }
  return ds;
}

Vector perturb_parameters(const Vector& theta_true, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw ConfigError("perturbation fraction must lie in [0, 1)");
  if (fraction == 0.0) return theta_true;
  CounterRng rng = make_stream(seed, StreamPurpose::kPerturbation);
  Vector out = theta_true;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out(i) *= rng.uniform(1.0 - fraction, 1.0 + fraction);
  return out;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json matrix_to_json(const Matrix& m) {
  json cols = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) cols.push_back(vector_to_json(m.col(c)));
  return cols;
}

Vector vector_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw DatasetError("field '" + field + "': expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw DatasetError("field '" + field + "[" + std::to_string(i) + "]': expected a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Matrix matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw DatasetError("field '" + field + "': expected an array of columns");
  if (j.empty()) return Matrix();
  const std::size_t cols = j.size();
  const Vector first = vector_from_json(j[0], field + "[0]");
  Matrix m(first.size(), static_cast<Eigen::Index>(cols));
  m.col(0) = first;
  for (std::size_t c = 1; c < cols; ++c) {
    const std::string f = field + "[" + std::to_string(c) + "]";
    const Vector col = vector_from_json(j[c], f);
    if (col.size() != m.rows()) throw DatasetError("field '" + f + "': ragged matrix column");
    m.col(static_cast<Eigen::Index>(c)) = col;
  }
  return m;
}

namespace {

json seq_to_json(const VectorSeq& seq) {
  json arr = json::array();
  for (const auto& v : seq) arr.push_back(vector_to_json(v));
  return arr;
}

VectorSeq seq_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw DatasetError("field '" + field + "': expected an array");
  VectorSeq out;
  out.reserve(j.size());
  for (std::size_t k = 0; k < j.size(); ++k)
    out.push_back(vector_from_json(j[k], field + "[" + std::to_string(k) + "]"));
  return out;
}

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DatasetError(std::string("missing field '") + key + "'");
  return *it;
}

}  // namespace

json dataset_to_json(const Dataset& ds) {
  json j;
  j["header"] = {{"format", kFormat}, {"version", kVersion}, {"layout", kLayout}};
  j["model_id"] = ds.model_id;
  j["seed"] = ds.seed;
  j["dt"] = ds.dt;
  j["N"] = ds.size();
  j["R"] = matrix_to_json(ds.R);
  j["Q"] = matrix_to_json(ds.Q);
  j["x0_true"] = vector_to_json(ds.x0_true);
  j["times"] = ds.times;
  j["Z"] = seq_to_json(ds.Z);
  j["truth"] = seq_to_json(ds.truth);
  j["w"] = seq_to_json(ds.w);
  j["v"] = seq_to_json(ds.v);
  return j;
}

Dataset dataset_from_json(const json& j) {
  if (!j.is_object()) throw DatasetError("dataset file: top level must be an object");
  const json& header = require(j, "header");
  if (!header.is_object() || header.value("format", "") != kFormat)
    throw DatasetError("field 'header.format': not a kftune dataset");
  Dataset ds;
  try {
    ds.model_id = require(j, "model_id").get<std::string>();
    ds.seed = require(j, "seed").get<std::uint64_t>();
    ds.dt = require(j, "dt").get<double>();
  } catch (const json::type_error& e) {
    throw DatasetError(std::string("dataset header fields: ") + e.what());
  }
  const json& n_field = require(j, "N");
  if (!n_field.is_number_unsigned()) throw DatasetError("field 'N': expected a count");
  const auto n = n_field.get<std::size_t>();
  ds.R = matrix_from_json(require(j, "R"), "R");
  ds.Q = matrix_from_json(require(j, "Q"), "Q");
  ds.x0_true = vector_from_json(require(j, "x0_true"), "x0_true");
  ds.times.clear();
  const Vector times = vector_from_json(require(j, "times"), "times");
  ds.times.assign(times.data(), times.data() + times.size());
  ds.Z = seq_from_json(require(j, "Z"), "Z");
  ds.truth = seq_from_json(require(j, "truth"), "truth");
  ds.w = seq_from_json(require(j, "w"), "w");
  ds.v = seq_from_json(require(j, "v"), "v");
  for (const auto& [name, len] : {std::pair<const char*, std::size_t>{"times", ds.times.size()},
                                  {"Z", ds.Z.size()},
                                  {"truth", ds.truth.size()},
                                  {"w", ds.w.size()},
                                  {"v", ds.v.size()}}) {
    if (len != n)
      throw DatasetError(std::string("field '") + name + "': expected " + std::to_string(n) +
                         " entries, found " + std::to_string(len));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot open '" + path.string() + "' for writing");
  out << dataset_to_json(ds).dump(1) << '\n';
  if (!out) throw DatasetError("failed writing '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path,
                     const std::optional<std::string>& expected_model_id) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t pos = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n');
    throw DatasetError("parse error in '" + path.string() + "' at line " + std::to_string(line) +
                       ": " + e.what());
  }
  Dataset ds = dataset_from_json(j);
  if (expected_model_id && ds.model_id != *expected_model_id)
    throw DatasetError("dataset model_id '" + ds.model_id + "' does not match requested model '" +
                       *expected_model_id + "'");
  return ds;
}

}  // namespace kftune
