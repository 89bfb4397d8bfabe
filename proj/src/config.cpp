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

#include "kftune/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "kftune/errors.hpp"

namespace kftune {

using nlohmann::json;

json default_config_json() {
  return json{
      {"model", "smd"},
      {"mode", "q0"},
      {"dt", 0.1},
      {"N", 100},
      {"seed", 1},
      {"n_sims", 50},
      {"truth",
       {{"x0", {1.0, 0.0}},
        {"theta", {4.0, 0.4, 0.6}},
        {"R", {0.001, 0.004}},
        {"Q", {0.001, 0.002}}}},
      {"estimator",
       {{"p0", "scale_up"},
        {"p0_mask", "ref"},
        {"q", "em"},
        {"q_mask", "ref"},
        {"q_floor", 1e-10},
        {"r", "em"},
        {"r_mask", "diag"}}},
      {"iterations", {{"max", 0}, {"tol", 1e-6}, {"fixed", false}}},
      {"initial", {{"P0", 0.1}, {"Q", 0.1}, {"R", 0.5}, {"theta_perturb", 0.2}}},
      {"x0_policy", "given"},
      {"report_j0", false},
      {"nr", {{"enabled", true}, {"estimate_x0", false}}},
      {"threads", 0},
      {"dataset", ""},
      {"methods", json::array()},
      {"output_dir", "out"},
  };
}

void merge_config(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError("config" + (path.empty() ? "" : " '" + path + "'") +
                                            " must be a JSON object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object() && it.value().is_object())
      merge_config(slot, it.value(), key);
    else
      slot = it.value();
  }
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &config;
  std::string::size_type start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (!node->is_object() || !node->contains(part))
      throw ConfigError("unknown config key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("override '" + key + "' names a section, not a value");
  *node = value;
}

namespace {

template <typename T>
T get(const json& j, const char* key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config '" + path + key + "' has the wrong type");
  }
}

// A covariance given either as its diagonal or as a full matrix (rows).
Matrix covariance(const json& j, const std::string& field, Eigen::Index size) {
  if (!j.is_array()) throw ConfigError("config '" + field + "' must be an array");
  Matrix m;
  if (!j.empty() && j[0].is_array()) {
    m.resize(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
    for (std::size_t r = 0; r < j.size(); ++r) {
      if (!j[r].is_array() || j[r].size() != j[0].size())
        throw ConfigError("config '" + field + "' rows differ in length");
      for (std::size_t c = 0; c < j[r].size(); ++c) m(r, c) = j[r][c].get<double>();
    }
  } else {
    m = vector_from_json(j, field).asDiagonal();
  }
  if (m.rows() != size || m.cols() != size)
    throw ConfigError("config '" + field + "' must be " + std::to_string(size) + "x" +
                      std::to_string(size));
  return m;
}

void read_estimator(const json& j, EstimatorChoice& e, const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const std::string where = path + k;
    auto str = [&] {
      if (!it.value().is_string()) throw ConfigError("config '" + where + "' must be a string");
      return it.value().get<std::string>();
    };
    if (k == "p0") e.p0_method = parse_p0_method(str());
    else if (k == "p0_mask") e.p0_mask = parse_mask(str(), MaskRole::kP0);
    else if (k == "q") e.q_method = parse_q_method(str());
    else if (k == "q_mask") e.q_mask = parse_mask(str(), MaskRole::kQ);
    else if (k == "q_floor") e.q_floor = get<double>(j, "q_floor", path);
    else if (k == "r") e.r_method = parse_r_method(str());
    else if (k == "r_mask") e.r_mask = parse_mask(str(), MaskRole::kR);
    else throw ConfigError("unknown config key '" + where + "'");
  }
}

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.mode = get<std::string>(j, "mode", "");
  if (c.mode != "q0" && c.mode != "qpos")
    throw ConfigError("config 'mode' must be q0 or qpos, got '" + c.mode + "'");
  const bool q0 = c.mode == "q0";
  c.tuning = q0 ? rrr_q0_config() : rrr_qpos_config();

  TruthConfig& t = c.truth;
  t.model_id = get<std::string>(j, "model", "");
  if (!has_model(t.model_id)) throw ConfigError("unknown model '" + t.model_id + "'");
  t.dt = get<double>(j, "dt", "");
  const auto N = get<long long>(j, "N", "");
  if (N < 2) throw ConfigError("config 'N' must be >= 2");
  t.N = static_cast<std::size_t>(N);
  t.seed = get<std::uint64_t>(j, "seed", "");
  const ModelSpec model = make_model(t.model_id, t.dt);
  const json& tj = j.at("truth");
  t.x0 = vector_from_json(tj.at("x0"), "truth.x0");
  t.theta = vector_from_json(tj.at("theta"), "truth.theta");
  if (static_cast<std::size_t>(t.x0.size()) != model.n_states)
    throw ConfigError("config 'truth.x0' must have " + std::to_string(model.n_states) + " entries");
  if (static_cast<std::size_t>(t.theta.size()) != model.n_params)
    throw ConfigError("config 'truth.theta' must have " + std::to_string(model.n_params) +
                      " entries");
  t.noise.R = covariance(tj.at("R"), "truth.R", static_cast<Eigen::Index>(model.n_meas));
  t.noise.Q = covariance(tj.at("Q"), "truth.Q", static_cast<Eigen::Index>(model.n_states));
  // Without process noise the data are generated with Q = 0.
  if (q0) t.noise.Q.setZero();
  t.noise.validate(model);

  TuningConfig& tc = c.tuning;
  read_estimator(j.at("estimator"), tc.estimator, "estimator.");
  if (q0) tc.estimator.q_method = QMethod::kFixedFloor;
  const json& it = j.at("iterations");
  const auto max_iters = get<long long>(it, "max", "iterations.");
  if (max_iters < 0) throw ConfigError("config 'iterations.max' must be >= 0");
  if (max_iters > 0) tc.max_iters = static_cast<std::size_t>(max_iters);
  tc.tol = get<double>(it, "tol", "iterations.");
  tc.fixed_iterations = get<bool>(it, "fixed", "iterations.");
  const json& in = j.at("initial");
  tc.initial.P0_diag = get<double>(in, "P0", "initial.");
  tc.initial.Q_diag = get<double>(in, "Q", "initial.");
  tc.initial.R_diag = get<double>(in, "R", "initial.");
  tc.initial.theta_perturb = get<double>(in, "theta_perturb", "initial.");
  tc.x0_policy = parse_x0_policy(get<std::string>(j, "x0_policy", ""));
  tc.report_j0 = get<bool>(j, "report_j0", "");
  const auto n_sims = get<long long>(j, "n_sims", "");
  if (n_sims < 1) throw ConfigError("config 'n_sims' must be >= 1");
  tc.n_sims = static_cast<std::size_t>(n_sims);
  tc.validate();

  c.campaign.run_nr = q0 && get<bool>(j.at("nr"), "enabled", "nr.");
  c.campaign.nr_estimate_x0 = get<bool>(j.at("nr"), "estimate_x0", "nr.");
  const auto threads = get<long long>(j, "threads", "");
  if (threads < 0) throw ConfigError("config 'threads' must be >= 0");
  c.campaign.threads = static_cast<std::size_t>(threads);
  c.dataset_path = get<std::string>(j, "dataset", "");
  c.output_dir = get<std::string>(j, "output_dir", "");

  const json& methods = j.at("methods");
  if (!methods.is_array()) throw ConfigError("config 'methods' must be an array");
  const std::vector<MethodSpec> standard = standard_methods(tc);
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const json& m = methods[i];
    const std::string path = "methods[" + std::to_string(i) + "]";
    if (m.is_string()) {
      const auto name = m.get<std::string>();
      auto found = std::find_if(standard.begin(), standard.end(),
                                [&](const MethodSpec& s) { return s.name == name; });
      if (found == standard.end()) throw ConfigError("unknown method '" + name + "' in " + path);
      c.methods.push_back(*found);
    } else if (m.is_object()) {
      MethodSpec spec{"", tc};
      for (auto f = m.begin(); f != m.end(); ++f) {
        if (f.key() == "name") spec.name = get<std::string>(m, "name", path + ".");
        else if (f.key() == "estimator") read_estimator(f.value(), spec.tuning.estimator, path + ".estimator.");
        else throw ConfigError("unknown config key '" + path + "." + f.key() + "'");
      }
      if (spec.name.empty()) throw ConfigError("config '" + path + ".name' is required");
      if (q0) spec.tuning.estimator.q_method = QMethod::kFixedFloor;
      spec.tuning.validate();
      c.methods.push_back(std::move(spec));
    } else {
      throw ConfigError("config '" + path + "' must be a method name or an object");
    }
  }
  if (c.methods.empty()) c.methods = standard;
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides,
                      json* resolved) {
  json config = default_config_json();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    json file;
    try {
      file = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config file '" + path.string() + "': " + e.what());
    }
    // A run manifest carries the resolved config it was produced from.
    if (file.is_object() && file.contains("tool") && file.contains("config")) file = file["config"];
    merge_config(config, file);
  }
  for (const auto& o : overrides) apply_override(config, o);
  RunConfig c = config_from_json(config);
  if (resolved) *resolved = std::move(config);
  return c;
}

json make_manifest(const std::string& verb, const json& config, const json& seeds) {
  return json{{"tool", "kftune"},
              {"version", kToolVersion},
              {"verb", verb},
              {"config", config},
              {"seeds", seeds}};
}

}  // namespace kftune
