// Copyright 2026 The mfpg Authors
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


// Command-line front end: riccati, collect, run, plot, constants.
// Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O.

#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mfpg/mfpg.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

int exit_code_for(const mfpg::Error& e) {
  if (dynamic_cast<const mfpg::IoError*>(&e) || dynamic_cast<const mfpg::ParseError*>(&e) ||
      dynamic_cast<const mfpg::SchemaError*>(&e)) {
    return kExitIo;
  }
  if (dynamic_cast<const mfpg::ConvergenceError*>(&e) || dynamic_cast<const mfpg::StabilityError*>(&e) ||
      dynamic_cast<const mfpg::AccuracyError*>(&e) || dynamic_cast<const mfpg::InformativityError*>(&e)) {
    return kExitNumerical;
  }
  return kExitConfig;
}

struct CommonOptions {
  std::string config;
  std::string preset;
  std::string seeds;
  std::string out = "out";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "experiment file (JSON)");
  cmd->add_option("--preset", o.preset, "built-in configuration")->check(CLI::IsMember({"paper"}));
  cmd->add_option("--seed-list", o.seeds, "seeds, e.g. 1,2,5-9 (overrides the config)");
  cmd->add_option("--out", o.out, "output directory");
}

mfpg::ExperimentConfig resolve(const CommonOptions& o) {
  if (o.config.empty() && o.preset.empty()) throw mfpg::ConfigError("need --config or --preset");
  nlohmann::json j;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw mfpg::IoError("cannot open config " + o.config);
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw mfpg::ConfigError(o.config + ": " + e.what());
    }
  }
  if (!o.preset.empty()) j["preset"] = o.preset;
  if (!o.seeds.empty()) j["data"]["seeds"] = mfpg::parse_seed_list(o.seeds);
  return mfpg::parse_config(std::move(j));
}

int cmd_riccati(const CommonOptions& o) {
  std::cout << mfpg::riccati_report(resolve(o));
  return 0;
}

int cmd_collect(const CommonOptions& o) {
  const auto cfg = resolve(o);
  std::error_code ec;
  std::filesystem::create_directories(o.out, ec);
  if (ec) throw mfpg::IoError("cannot create " + o.out + ": " + ec.message());
  for (auto seed : cfg.seeds) {
    const auto ds = mfpg::collect_dataset(cfg.system, cfg.samples, cfg.sigma_x, cfg.sigma_u, seed);
    const auto path = std::filesystem::path(o.out) / ("dataset_" + std::to_string(seed) + ".csv");
    mfpg::save_dataset(ds, path);
    std::cout << path.string() << "\n";
  }
  return 0;
}

int cmd_run(const CommonOptions& o) {
  const auto cfg = resolve(o);
  const auto res = mfpg::run_experiment(cfg);
  mfpg::write_results(res, cfg, o.out);
  int halted = 0;
  for (const auto& t : res.trials) {
    if (t.trace.status != mfpg::RunStatus::Completed) {
      ++halted;
      std::cerr << "seed " << t.seed << " " << mfpg::to_string(t.estimator) << ": "
                << mfpg::to_string(t.trace.status) << " (" << t.trace.message << ")\n";
    }
  }
  for (const auto& r : mfpg::aggregate(res, cfg)) {
    if (r.iteration == cfg.pgm.max_iters) {
      std::cout << r.estimator << ": median final gap " << mfpg::format_sig(r.median_gap, 6) << ", normalized std "
                << mfpg::format_sig(r.normalized_std, 6) << "\n";
    }
  }
  std::cout << "results in " << o.out << "\n";
  return halted ? kExitNumerical : 0;
}

int cmd_plot(const std::string& input, const std::string& output) {
  std::filesystem::path in(input);
  if (std::filesystem::is_directory(in)) in /= "aggregate.csv";
  const std::string svg = mfpg::plot_aggregate(mfpg::read_aggregate_csv(in));
  std::filesystem::path out = output.empty() ? in.parent_path() / "figure.svg" : std::filesystem::path(output);
  if (std::filesystem::is_directory(out)) out /= "figure.svg";
  mfpg::write_text(out, svg);
  std::cout << out.string() << "\n";
  return 0;
}

int cmd_constants(const CommonOptions& o) {
  std::cout << mfpg::constants_report(resolve(o));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-free policy gradient experiments for stochastic LQR"};
  app.require_subcommand(1);

  CommonOptions riccati, collect, run, constants;
  auto* c_riccati = app.add_subcommand("riccati", "print K*, P*, C(K*) and the initial gain");
  add_common(c_riccati, riccati);
  auto* c_collect = app.add_subcommand("collect", "write one dataset per seed (CSV + JSON sidecar)");
  add_common(c_collect, collect);
  auto* c_run = app.add_subcommand("run", "Monte Carlo policy-gradient runs; writes trials/aggregate CSV");
  add_common(c_run, run);
  auto* c_constants = app.add_subcommand("constants", "print bound constants, schedules and iteration bounds");
  add_common(c_constants, constants);

  std::string plot_in, plot_out;
  auto* c_plot = app.add_subcommand("plot", "render aggregate.csv as an SVG figure");
  c_plot->add_option("input", plot_in, "result directory or aggregate.csv")->required();
  c_plot->add_option("--out", plot_out, "output file or directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*c_riccati) return cmd_riccati(riccati);
    if (*c_collect) return cmd_collect(collect);
    if (*c_run) return cmd_run(run);
    if (*c_plot) return cmd_plot(plot_in, plot_out);
    if (*c_constants) return cmd_constants(constants);
  } catch (const mfpg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
