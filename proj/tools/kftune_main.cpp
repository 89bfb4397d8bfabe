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

// kftune command-line front end.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kftune/campaign.hpp"
#include "kftune/config.hpp"
#include "kftune/costs.hpp"
#include "kftune/dataset.hpp"
#include "kftune/errors.hpp"
#include "kftune/nr.hpp"
#include "kftune/report_io.hpp"
#include "kftune/rng.hpp"
#include "kftune/rrr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

struct Options {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string input;
};

struct Context {
  kftune::RunConfig config;
  json resolved;
  fs::path out;
};

Context load(const Options& o) {
  std::vector<std::string> overrides = o.overrides;
  if (o.seed) overrides.push_back("seed=" + std::to_string(*o.seed));
  if (!o.out.empty()) overrides.push_back("output_dir=" + json(o.out).dump());
  Context ctx;
  ctx.config = kftune::load_config(o.config, overrides, &ctx.resolved);
  ctx.out = ctx.config.output_dir;
  std::error_code ec;
  fs::create_directories(ctx.out, ec);
  if (ec || !fs::is_directory(ctx.out))
    throw kftune::Error("output directory '" + ctx.out.string() + "' is not writable");
  return ctx;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

template <typename Writer>
std::string render(Writer&& w) {
  std::ostringstream s;
  w(s);
  return s.str();
}

// The dataset named in the config, or a fresh simulation from the seed.
kftune::Dataset obtain_dataset(const Context& ctx, const kftune::ModelSpec& model) {
  const auto& t = ctx.config.truth;
  if (!ctx.config.dataset_path.empty())
    return kftune::load_dataset(ctx.config.dataset_path, t.model_id);
  return kftune::simulate(model, t.augmented_x0(), t.noise, t.N, t.seed);
}

void write_manifest(const Context& ctx, const std::string& verb, const json& seeds) {
  kftune::write_file(ctx.out / "manifest.json",
                     dump(kftune::make_manifest(verb, ctx.resolved, seeds)));
}

int cmd_simulate(const Options& o) {
  const Context ctx = load(o);
  const auto& t = ctx.config.truth;
  const auto model = kftune::make_model(t.model_id, t.dt);
  const auto ds = kftune::simulate(model, t.augmented_x0(), t.noise, t.N, t.seed);
  kftune::save_dataset(ds, ctx.out / "dataset.json");
  write_manifest(ctx, "simulate", json{{"dataset", t.seed}});
  std::cout << "wrote " << (ctx.out / "dataset.json").string() << "\n";
  return kExitOk;
}

int cmd_tune(const Options& o) {
  const Context ctx = load(o);
  const auto& cfg = ctx.config;
  const auto model = kftune::make_model(cfg.truth.model_id, cfg.truth.dt);
  const auto ds = obtain_dataset(ctx, model);
  const kftune::Vector theta0 =
      kftune::perturb_parameters(cfg.truth.theta, cfg.tuning.initial.theta_perturb, ds.seed);
  const auto result =
      kftune::run_rrr(model, ds, cfg.tuning, kftune::stack(ds.x0_true.head(model.n_states), theta0));

  json out = kftune::tuning_result_to_json(result);
  out["theta_init"] = kftune::vector_to_json(theta0);
  out["layout"] = {{"N", ds.size()},
                   {"dt", ds.dt},
                   {"n_states", model.n_states},
                   {"n_params", model.n_params},
                   {"n_meas", model.n_meas}};
  if (result.filter) {
    const auto w = kftune::whiteness(kftune::measurement_slots(result.filter->innovation));
    out["innovation_whiteness"] = {{"band", w.band}, {"fraction_outside", w.fraction_outside}};
  }
  kftune::write_file(ctx.out / "result.json", dump(out));
  kftune::write_file(ctx.out / "costs.csv",
                     render([&](std::ostream& s) { kftune::write_costs_csv(s, result.history); }));
  kftune::write_file(ctx.out / "theta_trace.csv", render([&](std::ostream& s) {
                       kftune::write_theta_trace_csv(s, result.history, model.n_params, ds.size(), ds.dt);
                     }));
  kftune::write_file(ctx.out / "noise.csv", render([&](std::ostream& s) {
                       kftune::write_noise_csv(s, result.history, model.augmented_size(),
                                               model.n_states, model.n_meas);
                     }));
  kftune::write_file(ctx.out / "overlay.csv", render([&](std::ostream& s) {
                       kftune::write_overlay_csv(s, model, result);
                     }));
  if (result.filter && result.smoother)
    kftune::write_file(ctx.out / "trace.csv", render([&](std::ostream& s) {
                         kftune::write_trace_csv(s, *result.filter, *result.smoother);
                       }));
  write_manifest(ctx, "tune", json{{"dataset", ds.seed}, {"perturbation", ds.seed}});

  if (result.diverged) {
    std::cerr << "tune: filter diverged: " << result.message << "\n";
    return kExitNumerical;
  }
  std::cout << "iterations " << result.iterations_used << (result.converged ? " (converged)" : "")
            << "\ntheta_hat " << result.theta_hat.transpose() << "\n";
  return kExitOk;
}

int cmd_nr(const Options& o) {
  const Context ctx = load(o);
  const auto& cfg = ctx.config;
  const auto model = kftune::make_model(cfg.truth.model_id, cfg.truth.dt);
  const auto ds = obtain_dataset(ctx, model);
  const kftune::Vector theta0 =
      kftune::perturb_parameters(cfg.truth.theta, cfg.tuning.initial.theta_perturb, ds.seed);
  const auto r = kftune::nr_estimate(model, ds, theta0, cfg.campaign.nr_estimate_x0);
  json out = kftune::nr_result_to_json(r);
  out["theta_init"] = kftune::vector_to_json(theta0);
  kftune::write_file(ctx.out / "nr.json", dump(out));
  write_manifest(ctx, "nr", json{{"dataset", ds.seed}, {"perturbation", ds.seed}});
  if (!r.converged) {
    std::cerr << "nr: " << r.message << "\n";
    return kExitNumerical;
  }
  std::cout << "theta_hat " << r.theta_hat.transpose() << "\ncrb " << r.crb.transpose() << "\n";
  return kExitOk;
}

json campaign_seeds(const kftune::RunConfig& cfg) {
  json sims = json::array();
  for (std::size_t s = 0; s < cfg.tuning.n_sims; ++s)
    sims.push_back(kftune::derive_seed(cfg.truth.seed, s));
  return json{{"campaign", cfg.truth.seed}, {"simulations", sims}};
}

void write_campaign(const fs::path& dir, const kftune::MonteCarloReport& report) {
  kftune::write_file(dir / "metrics.json", dump(kftune::metrics_to_json(report)));
  kftune::write_file(dir / "sims.csv",
                     render([&](std::ostream& s) { kftune::write_sims_csv(s, report); }));
  for (const auto& sim : report.sims) {
    char name[32];
    std::snprintf(name, sizeof(name), "sim_%04zu.csv", sim.index);
    kftune::write_file(dir / "costs" / name, render([&](std::ostream& s) {
                         kftune::write_costs_csv(s, sim.tuning.history);
                       }));
  }
}

int cmd_montecarlo(const Options& o) {
  const Context ctx = load(o);
  const auto& cfg = ctx.config;
  const auto model = kftune::make_model(cfg.truth.model_id, cfg.truth.dt);
  auto tuning = cfg.tuning;
  tuning.record_traces = false;
  auto report = kftune::run_monte_carlo(model, cfg.truth, tuning, cfg.campaign);
  report.label = cfg.mode;
  write_campaign(ctx.out, report);
  write_manifest(ctx, "montecarlo", campaign_seeds(cfg));
  std::cout << "simulations " << report.sims.size() << ", converged " << report.n_converged
            << ", diverged " << report.n_diverged << "\ntheta_ratio "
            << report.metrics.theta_ratio.transpose() << "\n";
  return report.metrics.n_used == 0 ? kExitNumerical : kExitOk;
}

int cmd_compare(const Options& o) {
  const Context ctx = load(o);
  const auto& cfg = ctx.config;
  const auto model = kftune::make_model(cfg.truth.model_id, cfg.truth.dt);
  auto methods = cfg.methods;
  for (auto& m : methods) m.tuning.record_traces = false;
  const auto rows = kftune::run_comparison(model, cfg.truth, methods, cfg.campaign);
  kftune::write_file(ctx.out / "comparison.csv",
                     render([&](std::ostream& s) { kftune::write_comparison_csv(s, rows); }));
  for (const auto& r : rows) {
    if (r.error.empty()) write_campaign(ctx.out / r.name, r.report);
    std::cout << r.name << ": "
              << (r.error.empty() ? "converged " + std::to_string(r.report.n_converged) + "/" +
                                        std::to_string(r.report.sims.size())
                                  : "failed: " + r.error)
              << "\n";
  }
  write_manifest(ctx, "compare", campaign_seeds(cfg));
  return kExitOk;
}

int cmd_report(const Options& o) {
  const Context ctx = load(o);
  std::ifstream in(o.input);
  if (!in) throw kftune::ConfigError("cannot open result file '" + o.input + "'");
  json result;
  try {
    result = json::parse(in);
  } catch (const json::parse_error& e) {
    throw kftune::ConfigError("result file '" + o.input + "': " + e.what());
  }
  const auto history = kftune::history_from_json(result);
  const json& layout = result.at("layout");
  const auto N = layout.at("N").get<std::size_t>();
  const auto dt = layout.at("dt").get<double>();
  const auto n = layout.at("n_states").get<std::size_t>();
  const auto p = layout.at("n_params").get<std::size_t>();
  const auto m = layout.at("n_meas").get<std::size_t>();
  kftune::write_file(ctx.out / "costs.csv",
                     render([&](std::ostream& s) { kftune::write_costs_csv(s, history); }));
  kftune::write_file(ctx.out / "theta_trace.csv", render([&](std::ostream& s) {
                       kftune::write_theta_trace_csv(s, history, p, N, dt);
                     }));
  kftune::write_file(ctx.out / "noise.csv", render([&](std::ostream& s) {
                       kftune::write_noise_csv(s, history, n + p, n, m);
                     }));
  write_manifest(ctx, "report", json::object());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive tuning of extended Kalman filter statistics"};
  app.set_version_flag("--version", kftune::kToolVersion);
  app.require_subcommand(1);

  Options opts;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opts.config, "JSON configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--out", opts.out, "Output directory (overrides output_dir)");
    sub->add_option("-s,--set", opts.overrides, "Config override key=value (repeatable)");
    sub->add_option("overrides", opts.overrides, "Config overrides key=value");
  };

  auto* simulate = app.add_subcommand("simulate", "Simulate a dataset");
  add_common(simulate);
  simulate->add_option("--seed", opts.seed, "Noise seed");
  auto* tune = app.add_subcommand("tune", "Run the recursive recipe on one dataset");
  add_common(tune);
  tune->add_option("--seed", opts.seed, "Dataset seed");
  auto* nr = app.add_subcommand("nr", "Output-error reference fit (no process noise)");
  add_common(nr);
  nr->add_option("--seed", opts.seed, "Dataset seed");
  auto* mc = app.add_subcommand("montecarlo", "Monte-Carlo campaign");
  add_common(mc);
  mc->add_option("--seed", opts.seed, "Campaign seed");
  auto* compare = app.add_subcommand("compare", "Compare adaptive methods");
  add_common(compare);
  compare->add_option("--seed", opts.seed, "Campaign seed");
  auto* report = app.add_subcommand("report", "Plot data from a saved tuning result");
  add_common(report);
  report->add_option("-i,--input", opts.input, "result.json written by tune")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(opts);
    if (*tune) return cmd_tune(opts);
    if (*nr) return cmd_nr(opts);
    if (*mc) return cmd_montecarlo(opts);
    if (*compare) return cmd_compare(opts);
    if (*report) return cmd_report(opts);
  } catch (const kftune::DivergenceError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const kftune::SingularMatrixError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const kftune::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
