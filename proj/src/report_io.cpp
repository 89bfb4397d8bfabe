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

#include "kftune/report_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kftune/errors.hpp"

namespace kftune {

using nlohmann::json;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

constexpr std::array<const char*, 6> kEventNames = {"s1", "s2", "s3", "w1", "w2", "w3"};

std::array<std::size_t, 6> events(const CostReport& c) {
  return {c.s1_events, c.s2_events, c.s3_events, c.w1_events, c.w2_events, c.w3_events};
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
  out << '\n';
}

void append(std::vector<std::string>& cells, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) cells.push_back(format_number(v(i)));
}

void append_names(std::vector<std::string>& cells, const std::string& stem, std::size_t count) {
  for (std::size_t i = 1; i <= count; ++i) cells.push_back(stem + std::to_string(i));
}

json optional_vector(const Vector& v) { return v.size() ? vector_to_json(v) : json(nullptr); }

}  // namespace

json costs_to_json(const CostReport& c) {
  json j;
  json J = json::array();
  for (std::size_t i = 0; i < c.J.size(); ++i)
    J.push_back(i == 0 && !c.has_J0 ? json(nullptr) : json(c.J[i]));
  j["J"] = J;
  const auto ev = events(c);
  for (std::size_t i = 0; i < ev.size(); ++i) j["events"][kEventNames[i]] = ev[i];
  return j;
}

CostReport costs_from_json(const json& j) {
  CostReport c;
  const json& J = j.at("J");
  if (!J.is_array() || J.size() != c.J.size()) throw Error("costs: 'J' must have 9 entries");
  c.has_J0 = !J[0].is_null();
  for (std::size_t i = 0; i < c.J.size(); ++i)
    c.J[i] = J[i].is_null() ? 0.0 : J[i].get<double>();
  const json& e = j.at("events");
  c.s1_events = e.at("s1").get<std::size_t>();
  c.s2_events = e.at("s2").get<std::size_t>();
  c.s3_events = e.at("s3").get<std::size_t>();
  c.w1_events = e.at("w1").get<std::size_t>();
  c.w2_events = e.at("w2").get<std::size_t>();
  c.w3_events = e.at("w3").get<std::size_t>();
  return c;
}

json tuning_result_to_json(const TuningResult& r) {
  json j;
  j["theta_hat"] = optional_vector(r.theta_hat);
  j["P_theta"] = r.P_theta.size() ? matrix_to_json(r.P_theta) : json(nullptr);
  j["R_hat"] = r.R_hat.size() ? matrix_to_json(r.R_hat) : json(nullptr);
  j["Q_hat"] = r.Q_hat.size() ? matrix_to_json(r.Q_hat) : json(nullptr);
  j["P0_hat"] = r.P0_hat.size() ? matrix_to_json(r.P0_hat) : json(nullptr);
  j["X0_hat"] = optional_vector(r.X0_hat);
  j["iterations_used"] = r.iterations_used;
  j["converged"] = r.converged;
  j["diverged"] = r.diverged;
  j["message"] = r.message;
  json hist = json::array();
  for (const auto& h : r.history) {
    json e;
    e["iteration"] = h.iteration;
    e["theta0"] = vector_to_json(h.theta0);
    e["P0_diag"] = vector_to_json(h.P0_diag);
    e["Q_diag"] = vector_to_json(h.Q_diag);
    e["R_diag"] = vector_to_json(h.R_diag);
    e["costs"] = costs_to_json(h.costs);
    e["theta_final"] = vector_to_json(h.theta_final);
    e["sigma_final"] = vector_to_json(h.sigma_final);
    e["max_rel_change"] = h.max_rel_change;
    e["clamped_entries"] = h.clamped_entries;
    e["regularized_solves"] = h.regularized_solves;
    if (!h.theta_trace.empty()) {
      json tt = json::array(), st = json::array();
      for (const auto& v : h.theta_trace) tt.push_back(vector_to_json(v));
      for (const auto& v : h.sigma_trace) st.push_back(vector_to_json(v));
      e["theta_trace"] = tt;
      e["sigma_trace"] = st;
    }
    hist.push_back(e);
  }
  j["history"] = hist;
  return j;
}

std::vector<IterationRecord> history_from_json(const json& result) {
  std::vector<IterationRecord> out;
  const json& hist = result.at("history");
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const json& e = hist[i];
    const std::string f = "history[" + std::to_string(i) + "].";
    IterationRecord h;
    h.iteration = e.at("iteration").get<std::size_t>();
    h.theta0 = vector_from_json(e.at("theta0"), f + "theta0");
    h.P0_diag = vector_from_json(e.at("P0_diag"), f + "P0_diag");
    h.Q_diag = vector_from_json(e.at("Q_diag"), f + "Q_diag");
    h.R_diag = vector_from_json(e.at("R_diag"), f + "R_diag");
    h.costs = costs_from_json(e.at("costs"));
    h.theta_final = vector_from_json(e.at("theta_final"), f + "theta_final");
    h.sigma_final = vector_from_json(e.at("sigma_final"), f + "sigma_final");
    h.max_rel_change = e.at("max_rel_change").get<double>();
    h.clamped_entries = e.at("clamped_entries").get<std::size_t>();
    h.regularized_solves = e.at("regularized_solves").get<std::size_t>();
    if (e.contains("theta_trace")) {
      for (const auto& v : e["theta_trace"]) h.theta_trace.push_back(vector_from_json(v, f + "theta_trace"));
      for (const auto& v : e["sigma_trace"]) h.sigma_trace.push_back(vector_from_json(v, f + "sigma_trace"));
    }
    out.push_back(std::move(h));
  }
  return out;
}

json nr_result_to_json(const NrResult& r) {
  return json{{"theta_hat", vector_to_json(r.theta_hat)},
              {"x0_hat", vector_to_json(r.x0_hat)},
              {"crb", vector_to_json(r.crb)},
              {"R_hat", matrix_to_json(r.R_hat)},
              {"cost_final", r.cost_final},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"message", r.message}};
}

json metrics_to_json(const MonteCarloReport& report) {
  const McMetrics& m = report.metrics;
  json j;
  j["label"] = report.label;
  j["n_sims"] = report.sims.size();
  j["n_used"] = m.n_used;
  j["n_converged"] = report.n_converged;
  j["n_diverged"] = report.n_diverged;
  j["excluded"] = report.excluded;
  j["theta_ratio"] = optional_vector(m.theta_ratio);
  j["crb_ratio"] = optional_vector(m.crb_ratio);
  j["consistency_ratio_ekf"] = optional_vector(m.consistency_ratio);
  j["spread_factor_ekf"] = optional_vector(m.spread_factor);
  if (report.nr_stats) {
    j["consistency_ratio_nr"] = vector_to_json(report.nr_stats->consistency_ratio);
    j["spread_factor_nr"] = vector_to_json(report.nr_stats->spread_factor);
  }
  j["r_ratio"] = optional_vector(m.r_ratio);
  j["q_ratio"] = optional_vector(m.q_ratio);
  json mean = json::array(), sd = json::array();
  for (std::size_t i = 0; i < m.cost_mean.size(); ++i) {
    mean.push_back(m.cost_mean[i]);
    sd.push_back(m.cost_std[i]);
  }
  j["J_mean"] = mean;
  j["J_std"] = sd;
  j["correlation_matrix"] = m.correlation_matrix.size() ? matrix_to_json(m.correlation_matrix)
                                                        : json(nullptr);
  j["undefined"] = m.undefined;
  j["noise_agreement"] = {{"r_ratio", optional_vector(report.noise_mean.r_ratio)},
                          {"q_ratio", optional_vector(report.noise_mean.q_ratio)}};
  return j;
}

void write_costs_csv(std::ostream& out, const std::vector<IterationRecord>& history) {
  std::vector<std::string> header{"iter"};
  for (int i = 0; i <= 8; ++i) header.push_back("J" + std::to_string(i));
  for (const char* e : kEventNames) header.push_back(std::string(e) + "_events");
  header.insert(header.end(), {"clamped", "regularized", "max_rel_change"});
  write_row(out, header);
  for (const auto& h : history) {
    std::vector<std::string> cells{std::to_string(h.iteration)};
    for (std::size_t i = 0; i < h.costs.J.size(); ++i)
      cells.push_back(i == 0 && !h.costs.has_J0 ? "" : format_number(h.costs.J[i]));
    for (std::size_t e : events(h.costs)) cells.push_back(std::to_string(e));
    cells.push_back(std::to_string(h.clamped_entries));
    cells.push_back(std::to_string(h.regularized_solves));
    cells.push_back(format_number(h.max_rel_change));
    write_row(out, cells);
  }
}

void write_theta_trace_csv(std::ostream& out, const std::vector<IterationRecord>& history,
                           std::size_t n_params, std::size_t N, double dt) {
  std::vector<std::string> header{"iteration", "k", "t"};
  append_names(header, "theta", n_params);
  append_names(header, "sigma", n_params);
  write_row(out, header);
  for (const auto& h : history) {
    const double offset = static_cast<double>(h.iteration - 1) * static_cast<double>(N) * dt;
    for (std::size_t k = 0; k < h.theta_trace.size(); ++k) {
      std::vector<std::string> cells{std::to_string(h.iteration), std::to_string(k),
                                     format_number(offset + static_cast<double>(k) * dt)};
      append(cells, h.theta_trace[k]);
      append(cells, h.sigma_trace[k]);
      write_row(out, cells);
    }
  }
}

void write_noise_csv(std::ostream& out, const std::vector<IterationRecord>& history,
                     std::size_t n_augmented, std::size_t n_states, std::size_t n_meas) {
  std::vector<std::string> header{"iter"};
  append_names(header, "P0_", n_augmented);
  append_names(header, "Q", n_states);
  append_names(header, "R", n_meas);
  write_row(out, header);
  for (const auto& h : history) {
    std::vector<std::string> cells{std::to_string(h.iteration)};
    append(cells, h.P0_diag);
    append(cells, h.Q_diag);
    append(cells, h.R_diag);
    write_row(out, cells);
  }
}

void write_overlay_csv(std::ostream& out, const ModelSpec& model, const TuningResult& result) {
  std::vector<std::string> header{"t"};
  for (std::size_t c = 1; c <= model.n_meas; ++c) {
    const std::string s = std::to_string(c);
    header.insert(header.end(), {"Z" + s, "h_dyn" + s, "h_post" + s, "h_smooth" + s});
  }
  write_row(out, header);
  if (!result.filter || !result.smoother || !result.dyn) return;
  const FilterPass& f = *result.filter;
  for (std::size_t k = 1; k <= f.size(); ++k) {
    const Vector hd = measure(model, result.dyn->Xd[k]);
    const Vector hp = measure(model, f.X_post[k]);
    const Vector hs = measure(model, result.smoother->X_smooth[k]);
    std::vector<std::string> cells{format_number(static_cast<double>(k) * f.dt)};
    for (std::size_t c = 0; c < model.n_meas; ++c) {
      const auto i = static_cast<Eigen::Index>(c);
      cells.insert(cells.end(), {format_number(f.Z[k](i)), format_number(hd(i)),
                                 format_number(hp(i)), format_number(hs(i))});
    }
    write_row(out, cells);
  }
}

void write_sims_csv(std::ostream& out, const MonteCarloReport& report) {
  std::size_t p = 0, m = 0, n = 0;
  bool nr = false;
  for (const auto& s : report.sims) {
    if (s.tuning.history.empty()) continue;
    p = static_cast<std::size_t>(s.tuning.theta_hat.size());
    m = static_cast<std::size_t>(s.tuning.R_hat.rows());
    n = static_cast<std::size_t>(s.tuning.history.back().Q_diag.size());
    nr = nr || s.nr.has_value();
  }
  std::vector<std::string> header{"sim", "seed", "converged", "diverged", "iterations"};
  append_names(header, "theta", p);
  append_names(header, "sigma", p);
  append_names(header, "R", m);
  append_names(header, "Q", n);
  if (nr) {
    append_names(header, "nr_theta", p);
    append_names(header, "nr_crb", p);
    append_names(header, "nr_R", m);
  }
  write_row(out, header);
  for (const auto& s : report.sims) {
    const TuningResult& t = s.tuning;
    std::vector<std::string> cells{std::to_string(s.index), std::to_string(s.seed),
                                   t.converged ? "1" : "0", t.diverged ? "1" : "0",
                                   std::to_string(t.iterations_used)};
    if (t.history.empty()) {
      cells.resize(header.size(), "");
    } else {
      append(cells, t.theta_hat);
      append(cells, t.P_theta.diagonal().cwiseMax(0.0).cwiseSqrt());
      append(cells, t.R_hat.diagonal());
      append(cells, t.Q_hat.diagonal().head(static_cast<Eigen::Index>(n)));
      if (nr) {
        if (s.nr) {
          append(cells, s.nr->theta_hat);
          append(cells, s.nr->crb);
          append(cells, s.nr->R_hat.diagonal());
        } else {
          cells.resize(header.size(), "");
        }
      }
    }
    write_row(out, cells);
  }
}

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  std::size_t p = 0, m = 0, n = 0;
  for (const auto& r : rows) {
    p = std::max<std::size_t>(p, r.report.metrics.theta_ratio.size());
    m = std::max<std::size_t>(m, r.report.metrics.r_ratio.size());
    n = std::max<std::size_t>(n, r.report.metrics.q_ratio.size());
  }
  std::vector<std::string> header{"method", "n_used", "n_converged", "n_diverged"};
  append_names(header, "theta_ratio", p);
  append_names(header, "crb_ratio", p);
  append_names(header, "consistency_ratio", p);
  append_names(header, "spread_factor", p);
  append_names(header, "r_ratio", m);
  append_names(header, "q_ratio", n);
  for (int i = 1; i <= 8; ++i) header.push_back("J" + std::to_string(i) + "_mean");
  header.insert(header.end(), {"r_drift", "oscillating_sims", "all_converged", "error"});
  write_row(out, header);
  auto padded = [](std::vector<std::string>& cells, const Vector& v, std::size_t size) {
    for (std::size_t i = 0; i < size; ++i)
      cells.push_back(static_cast<Eigen::Index>(i) < v.size()
                          ? format_number(v(static_cast<Eigen::Index>(i)))
                          : "");
  };
  for (const auto& r : rows) {
    const McMetrics& mm = r.report.metrics;
    std::vector<std::string> cells{r.name, std::to_string(mm.n_used),
                                   std::to_string(r.report.n_converged),
                                   std::to_string(r.report.n_diverged)};
    padded(cells, mm.theta_ratio, p);
    padded(cells, mm.crb_ratio, p);
    padded(cells, mm.consistency_ratio, p);
    padded(cells, mm.spread_factor, p);
    padded(cells, mm.r_ratio, m);
    padded(cells, mm.q_ratio, n);
    for (std::size_t i = 1; i <= 8; ++i)
      cells.push_back(r.error.empty() ? format_number(mm.cost_mean[i]) : "");
    cells.push_back(r.flags.r_drift ? "1" : "0");
    cells.push_back(std::to_string(r.flags.oscillating));
    cells.push_back(r.flags.all_converged ? "1" : "0");
    std::string err = r.error;
    for (char& c : err)
      if (c == ',' || c == '\n') c = ';';
    cells.push_back(err);
    write_row(out, cells);
  }
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace kftune
