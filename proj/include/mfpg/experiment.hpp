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

#pragma once

// Configuration-driven Monte Carlo runner: parses a JSON experiment file (or
// the built-in "paper" preset), fans trials out over seeds, and writes
// per-trial rows, per-iteration aggregates and the resolved configuration.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "mfpg/datagen.hpp"
#include "mfpg/error.hpp"
#include "mfpg/estimator.hpp"
#include "mfpg/lqr.hpp"
#include "mfpg/pgm.hpp"
#include "mfpg/plot.hpp"

namespace mfpg {

/// The benchmark plant x+ = A x + u + w with a slightly unstable, weakly coupled A.
inline LinearSystem benchmark_system(double noise_variance = 0.1) {
  Matrix a(3, 3);
  a << 1.01, 0.01, 0.0,  //
      0.01, 1.01, 0.01,  //
      0.0, 0.01, 1.01;
  return {a, Matrix::Identity(3, 3), noise_variance * Matrix::Identity(3, 3)};
}

inline nlohmann::json benchmark_preset() {
  nlohmann::json seeds = nlohmann::json::array();
  for (int s = 1; s <= 30; ++s) seeds.push_back(s);
  return {
      {"name", "paper"},
      {"system",
       {{"A", {{1.01, 0.01, 0.0}, {0.01, 1.01, 0.01}, {0.0, 0.01, 1.01}}},
        {"B", {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}},
        {"sigma_w", 0.1}}},
      {"weights", {{"Q", 0.001}, {"R", 1.0}}},
      {"initial_gain", "dare:100Q"},
      {"data", {{"N", 100}, {"sigma_x", 1.0}, {"sigma_u", 1.0}, {"seeds", seeds}}},
      {"estimator",
       {{"kinds", {"CSPD", "LS"}},
        {"ball_radius", 1.0},
        {"schedule_scale", 0.001},
        {"warm_start", true},
        {"epochs", {{"S", 4}, {"Ns", {8, 16, 24, 52}}, {"D0", 1.0}, {"radius", "squared"}}}}},
      {"pgm", {{"method", "NPG"}, {"step", 0.05}, {"iterations", 50}, {"stability_guard", true}}},
      {"constants", {{"delta", 0.05}, {"c1", 1.0}, {"c2", 1.0}, {"sigma", 0.5}, {"epsilon", 0.01}}},
      {"threads", 0},
  };
}

struct ExperimentConfig {
  std::string name = "experiment";
  LinearSystem system;
  CostWeights weights;
  std::string initial_gain_label;  // "dare:<s>Q", "zero" or "explicit"
  Matrix initial_gain;            // resolved K0
  std::size_t samples = 0;
  Matrix sigma_x;
  Matrix sigma_u;
  std::vector<std::uint64_t> seeds;
  std::vector<EstimatorKind> estimators;
  double ball_radius = 1.0;
  double schedule_scale = 0.001;
  bool warm_start = true;
  EpochPlan plan;
  PgmConfig pgm;
  double delta = 0.05;
  double c1 = 1.0;
  double c2 = 1.0;
  double sigma = 0.5;
  double epsilon = 0.01;
  unsigned threads = 0;
  nlohmann::json resolved;  // echo written next to the results

  EstimatorOptions estimator_options() const {
    EstimatorOptions o;
    o.ball = BallSet::origin(parameter_dimension(system.nx(), system.nu()), ball_radius);
    o.schedule = sqrt_schedule_builder(schedule_scale);
    o.plan = plan;
    o.warm_start = warm_start;
    return o;
  }
};

/// "1,2,7-9" -> {1, 2, 7, 8, 9}.
inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream in(text);
  std::string item;
  auto number = [&](const std::string& s) {
    const std::string t = detail::trim(s);
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("seed list: '" + t + "' is not a nonnegative integer");
    }
    return static_cast<std::uint64_t>(std::stoull(t));
  };
  while (std::getline(in, item, ',')) {
    if (detail::trim(item).empty()) continue;
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(number(item));
    } else {
      const auto lo = number(item.substr(0, dash)), hi = number(item.substr(dash + 1));
      if (hi < lo) throw ConfigError("seed list: empty range '" + detail::trim(item) + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    }
  }
  if (out.empty()) throw ConfigError("seed list is empty");
  return out;
}

inline EstimatorKind parse_estimator_kind(const std::string& s) {
  if (s == "CSPD") return EstimatorKind::CSPD;
  if (s == "MULTI_EPOCH") return EstimatorKind::MULTI_EPOCH;
  if (s == "LS") return EstimatorKind::LS;
  if (s == "EXACT") return EstimatorKind::EXACT;
  if (s == "SYSID") return EstimatorKind::SYSID;
  throw ConfigError("unknown estimator '" + s + "' (CSPD, MULTI_EPOCH, LS, EXACT, SYSID)");
}

inline Method parse_method(const std::string& s) {
  if (s == "NPG") return Method::NPG;
  if (s == "GNM") return Method::GNM;
  throw ConfigError("unknown method '" + s + "' (NPG, GNM)");
}

namespace detail {

// A number is shorthand for that multiple of the identity (1 x 1 when the
// dimension is not yet known).
inline Matrix config_matrix(const nlohmann::json& j, Index dim, const std::string& what) {
  if (j.is_number()) {
    const Index n = dim > 0 ? dim : 1;
    return j.get<double>() * Matrix::Identity(n, n);
  }
  try {
    return matrix_from_json(j, what);
  } catch (const SchemaError& e) {
    throw ConfigError(e.what());
  }
}

inline const nlohmann::json& section(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing config section '") + key + "'");
  return j.at(key);
}

// Resolves "dare:<s>Q" (optimal gain for the weights (sQ, R)), "dare" (s = 1),
// "zero", or an explicit nested array.
inline Matrix resolve_initial_gain(const nlohmann::json& value, const LinearSystem& sys, const CostWeights& w,
                                   std::string& label) {
  if (value.is_array()) {
    label = "explicit";
    return config_matrix(value, 0, "initial_gain");
  }
  if (!value.is_string()) throw ConfigError("initial_gain must be a string or a matrix");
  label = value.get<std::string>();
  if (label == "zero") return Matrix::Zero(sys.nu(), sys.nx());
  if (label.rfind("dare", 0) != 0) throw ConfigError("initial_gain '" + label + "' not understood");
  double scale = 1.0;
  if (label != "dare") {
    if (label.size() < 7 || label[4] != ':' || label.back() != 'Q') {
      throw ConfigError("initial_gain '" + label + "' should read dare:<scale>Q");
    }
    const std::string num = label.substr(5, label.size() - 6);
    char* end = nullptr;
    scale = num.empty() ? 1.0 : std::strtod(num.c_str(), &end);
    if (!num.empty() && end != num.c_str() + num.size()) throw ConfigError("initial_gain scale '" + num + "'");
    if (!(scale > 0.0)) throw ConfigError("initial_gain scale must be positive");
  }
  return solve_dare(sys, CostWeights(scale * w.Q, w.R)).K.K;
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace detail

// Builds a config from JSON. A top-level "preset": "paper" seeds every
// value, and the remaining keys are merged over it.
inline ExperimentConfig parse_config(nlohmann::json j) {
  if (j.contains("preset")) {
    const auto preset = j.at("preset").get<std::string>();
    if (preset != "paper") throw ConfigError("unknown preset '" + preset + "'");
    auto base = benchmark_preset();
    j.erase("preset");
    base.merge_patch(j);
    j = std::move(base);
  }

  ExperimentConfig c;
  try {
    c.name = detail::get_or<std::string>(j, "name", "experiment");
    const auto& s = detail::section(j, "system");
    const Matrix a = detail::config_matrix(detail::section(s, "A"), 0, "A");
    if (a.rows() != a.cols()) throw ConfigError("A must be square");
    const Matrix b = detail::config_matrix(detail::section(s, "B"), a.rows(), "B");
    c.system = LinearSystem(a, b, detail::config_matrix(detail::section(s, "sigma_w"), a.rows(), "sigma_w"));

    const auto& w = detail::section(j, "weights");
    c.weights = CostWeights(detail::config_matrix(detail::section(w, "Q"), c.system.nx(), "Q"),
                            detail::config_matrix(detail::section(w, "R"), c.system.nu(), "R"));
    check_dims(c.system, c.weights);

    c.initial_gain = detail::resolve_initial_gain(detail::section(j, "initial_gain"), c.system, c.weights,
                                                  c.initial_gain_label);
    check_dims(c.system, Policy(c.initial_gain));

    const auto& d = detail::section(j, "data");
    const auto n = detail::section(d, "N").get<long long>();
    if (n < 1) throw ConfigError("data.N must be at least 1");
    c.samples = static_cast<std::size_t>(n);
    c.sigma_x = detail::config_matrix(detail::section(d, "sigma_x"), c.system.nx(), "sigma_x");
    c.sigma_u = detail::config_matrix(detail::section(d, "sigma_u"), c.system.nu(), "sigma_u");
    if (c.sigma_x.rows() != c.system.nx() || c.sigma_u.rows() != c.system.nu()) {
      throw ConfigError("sigma_x / sigma_u dimensions do not match the system");
    }
    const auto& seeds = detail::section(d, "seeds");
    if (seeds.is_string()) {
      c.seeds = parse_seed_list(seeds.get<std::string>());
    } else {
      for (const auto& v : seeds) c.seeds.push_back(v.get<std::uint64_t>());
    }
    if (c.seeds.empty()) throw ConfigError("data.seeds is empty");

    const auto& e = detail::section(j, "estimator");
    for (const auto& k : detail::section(e, "kinds")) c.estimators.push_back(parse_estimator_kind(k.get<std::string>()));
    if (c.estimators.empty()) throw ConfigError("estimator.kinds is empty");
    c.ball_radius = detail::get_or(e, "ball_radius", 1.0);
    c.schedule_scale = detail::get_or(e, "schedule_scale", 0.001);
    c.warm_start = detail::get_or(e, "warm_start", true);
    if (!(c.ball_radius > 0.0) || !(c.schedule_scale > 0.0)) {
      throw ConfigError("estimator.ball_radius and schedule_scale must be positive");
    }
    if (e.contains("epochs")) {
      const auto& p = e.at("epochs");
      c.plan.S = detail::get_or(p, "S", 1);
      c.plan.D0 = detail::get_or(p, "D0", 1.0);
      c.plan.Ns = detail::section(p, "Ns").get<std::vector<std::size_t>>();
      const auto mode = detail::get_or<std::string>(p, "radius", "squared");
      if (mode != "squared" && mode != "linear") throw ConfigError("epochs.radius must be 'squared' or 'linear'");
      c.plan.radius_mode = mode == "squared" ? RadiusMode::Squared : RadiusMode::Linear;
      if (c.plan.S < 1 || c.plan.Ns.size() != static_cast<std::size_t>(c.plan.S)) {
        throw ConfigError("epochs: need S >= 1 and one entry of Ns per epoch");
      }
    }
    if (std::find(c.estimators.begin(), c.estimators.end(), EstimatorKind::MULTI_EPOCH) != c.estimators.end()) {
      if (!e.contains("epochs")) throw ConfigError("MULTI_EPOCH needs an estimator.epochs section");
      if (c.plan.total() > c.samples) throw ConfigError("epochs.Ns sums to more than data.N");
    }

    const auto& g = detail::section(j, "pgm");
    c.pgm.method = parse_method(detail::get_or<std::string>(g, "method", "NPG"));
    c.pgm.step = detail::section(g, "step").get<double>();
    c.pgm.max_iters = detail::get_or(g, "iterations", 50);
    c.pgm.stability_guard = detail::get_or(g, "stability_guard", true);
    if (!(c.pgm.step > 0.0)) throw ConfigError("pgm.step must be positive");
    if (c.pgm.method == Method::GNM && c.pgm.step > 0.5) throw ConfigError("pgm.step must be <= 1/2 for GNM");
    if (c.pgm.max_iters < 0) throw ConfigError("pgm.iterations must be nonnegative");

    if (j.contains("constants")) {
      const auto& k = j.at("constants");
      c.delta = detail::get_or(k, "delta", c.delta);
      c.c1 = detail::get_or(k, "c1", c.c1);
      c.c2 = detail::get_or(k, "c2", c.c2);
      c.sigma = detail::get_or(k, "sigma", c.sigma);
      c.epsilon = detail::get_or(k, "epsilon", c.epsilon);
    }
    c.threads = detail::get_or(j, "threads", 0u);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const ConvergenceError&) {
    throw;
  } catch (const Error& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  c.resolved = j;
  c.resolved["data"]["seeds"] = c.seeds;
  c.resolved["initial_gain_resolved"] = detail::matrix_to_json(c.initial_gain);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(std::move(j));
}

struct TrialResult {
  std::uint64_t seed = 0;
  EstimatorKind estimator = EstimatorKind::CSPD;
  RunTrace trace;
};

struct ExperimentResult {
  std::vector<TrialResult> trials;  // ordered by estimator (config order), then seed
  double optimal_cost = 0.0;
  double initial_cost = 0.0;

  bool all_completed() const {
    return std::all_of(trials.begin(), trials.end(),
                       [](const TrialResult& t) { return t.trace.status == RunStatus::Completed; });
  }
};

// Trials for one seed share one dataset; each seed is handled by a single
// worker and written into its own slot, so output order never depends on
// scheduling.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const Policy k0(cfg.initial_gain);
  require_stabilizing(cfg.system, k0);
  const auto opts = cfg.estimator_options();
  const std::size_t n_seeds = cfg.seeds.size();

  std::vector<std::vector<TrialResult>> slots(n_seeds);
  std::vector<std::exception_ptr> errors(n_seeds);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n_seeds; i = next++) {
      try {
        const auto ds = collect_dataset(cfg.system, cfg.samples, cfg.sigma_x, cfg.sigma_u, cfg.seeds[i]);
        for (auto kind : cfg.estimators) {
          PgmConfig pc = cfg.pgm;
          pc.estimator = kind;
          slots[i].push_back({cfg.seeds[i], kind, run_modelfree(cfg.system, cfg.weights, k0, ds, pc, opts)});
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned n_threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, n_seeds));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentResult out;
  out.optimal_cost = average_cost(cfg.system, cfg.weights, solve_dare(cfg.system, cfg.weights).K);
  out.initial_cost = average_cost(cfg.system, cfg.weights, k0);
  for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
    for (std::size_t i = 0; i < n_seeds; ++i) out.trials.push_back(std::move(slots[i][e]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation

struct AggregateRow {
  std::string estimator;
  int iteration = 0;
  std::size_t trials = 0;       // trials with a finite gap at this iteration
  double median_gap = 0.0;      // halted trials count as +inf after the halt
  double median_normalized_gap = 0.0;
  double std_gap = 0.0;         // sample standard deviation over finite gaps
  double normalized_std = 0.0;  // std_gap / median_gap
};

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double sample_std(const std::vector<double>& v) {
  std::vector<double> f;
  for (double x : v) {
    if (std::isfinite(x)) f.push_back(x);
  }
  if (f.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : f) mean += x;
  mean /= static_cast<double>(f.size());
  double ss = 0.0;
  for (double x : f) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(f.size() - 1));
}

}  // namespace detail

// Rows for one estimator, iterations 0..max_iters. gaps[t][i] is trial t's
// gap at iteration i, +inf when the trial never reached it.
inline std::vector<AggregateRow> aggregate_gaps(const std::string& estimator,
                                                const std::vector<std::vector<double>>& gaps, double initial_gap) {
  std::size_t len = 0;
  for (const auto& g : gaps) len = std::max(len, g.size());
  std::vector<AggregateRow> rows;
  for (std::size_t i = 0; i < len; ++i) {
    std::vector<double> col;
    for (const auto& g : gaps) col.push_back(i < g.size() ? g[i] : std::numeric_limits<double>::infinity());
    AggregateRow r;
    r.estimator = estimator;
    r.iteration = static_cast<int>(i);
    r.trials = static_cast<std::size_t>(std::count_if(col.begin(), col.end(), [](double x) { return std::isfinite(x); }));
    r.median_gap = detail::median_of(col);
    r.median_normalized_gap = r.median_gap / initial_gap;
    r.std_gap = detail::sample_std(col);
    r.normalized_std = r.std_gap / r.median_gap;
    rows.push_back(r);
  }
  return rows;
}

/// Per-trial gap sequences, padded with +inf past a halt.
inline std::vector<std::vector<double>> gap_matrix(const ExperimentResult& res, EstimatorKind kind, int max_iters) {
  std::vector<std::vector<double>> out;
  for (const auto& t : res.trials) {
    if (t.estimator != kind) continue;
    std::vector<double> g(static_cast<std::size_t>(max_iters) + 1, std::numeric_limits<double>::infinity());
    for (const auto& r : t.trace.records) {
      if (r.iteration <= max_iters) g[static_cast<std::size_t>(r.iteration)] = r.gap;
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline std::vector<AggregateRow> aggregate(const ExperimentResult& res, const ExperimentConfig& cfg) {
  std::vector<AggregateRow> rows;
  const double gap0 = res.initial_cost - res.optimal_cost;
  for (auto kind : cfg.estimators) {
    auto part = aggregate_gaps(to_string(kind), gap_matrix(res, kind, cfg.pgm.max_iters), gap0);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Output

inline std::string trials_csv(const ExperimentResult& res, const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "seed,estimator,method,iteration,gap,normalized_gap,estimation_error,spectral_radius,status\n";
  const double gap0 = res.initial_cost - res.optimal_cost;
  for (const auto& t : res.trials) {
    for (const auto& r : t.trace.records) {
      if (!std::isfinite(r.gap)) continue;
      os << t.seed << ',' << to_string(t.estimator) << ',' << to_string(cfg.pgm.method) << ',' << r.iteration << ','
         << format_double(r.gap) << ',' << format_double(r.gap / gap0) << ','
         << (std::isnan(r.estimation_error) ? std::string() : format_double(r.estimation_error)) << ','
         << format_double(r.spectral_radius) << ',' << to_string(t.trace.status) << '\n';
    }
  }
  return os.str();
}

inline std::string timing_csv(const ExperimentResult& res) {
  std::ostringstream os;
  os << "seed,estimator,iteration,wall_seconds\n";
  for (const auto& t : res.trials) {
    for (const auto& r : t.trace.records) {
      os << t.seed << ',' << to_string(t.estimator) << ',' << r.iteration << ',' << format_double(r.seconds) << '\n';
    }
  }
  return os.str();
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream os;
  os << "# median over trials (halted trials count as +inf); normalized_std = sample std of gap / median gap\n";
  os << "estimator,iteration,trials,median_gap,median_normalized_gap,std_gap,normalized_std\n";
  for (const auto& r : rows) {
    os << r.estimator << ',' << r.iteration << ',' << r.trials << ',' << format_double(r.median_gap) << ','
       << format_double(r.median_normalized_gap) << ',' << format_double(r.std_gap) << ','
       << format_double(r.normalized_std) << '\n';
  }
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_results(const ExperimentResult& res, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "trials.csv", trials_csv(res, cfg));
  write_text(dir / "aggregate.csv", aggregate_csv(aggregate(res, cfg)));
  write_text(dir / "timing.csv", timing_csv(res));
  write_text(dir / "config.resolved.json", cfg.resolved.dump(2) + "\n");
}

inline std::vector<AggregateRow> read_aggregate_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<AggregateRow> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    const auto cells = detail::split_csv(line);
    if (cells.size() != 7) throw SchemaError("aggregate row at line " + std::to_string(lineno) + " needs 7 columns");
    try {
      AggregateRow r;
      r.estimator = cells[0];
      r.iteration = std::stoi(cells[1]);
      r.trials = std::stoul(cells[2]);
      r.median_gap = std::stod(cells[3]);
      r.median_normalized_gap = std::stod(cells[4]);
      r.std_gap = std::stod(cells[5]);
      r.normalized_std = std::stod(cells[6]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw ParseError("malformed aggregate row", lineno);
    }
  }
  return rows;
}

// Gap panel (log scale), plus a normalized-std panel when any iteration
// aggregates two or more trials.
inline std::string plot_aggregate(const std::vector<AggregateRow>& rows) {
  if (rows.empty()) throw ArgumentError("plot: result table is empty");
  Panel gap{"iteration", "C(K)−C(K*)", true, {}};
  Panel spread{"iteration", "normalized std", false, {}};
  std::map<std::string, std::size_t> index;
  std::size_t max_trials = 0;
  for (const auto& r : rows) {
    if (!index.count(r.estimator)) {
      index[r.estimator] = gap.series.size();
      gap.series.push_back({r.estimator, {}, {}});
      spread.series.push_back({r.estimator, {}, {}});
    }
    const auto i = index[r.estimator];
    gap.series[i].x.push_back(r.iteration);
    gap.series[i].y.push_back(r.median_gap);
    spread.series[i].x.push_back(r.iteration);
    spread.series[i].y.push_back(r.normalized_std);
    max_trials = std::max(max_trials, r.trials);
  }
  std::vector<Panel> panels{gap};
  if (max_trials >= 2) panels.push_back(spread);
  return render_svg(panels);
}

// ---------------------------------------------------------------------------
// Reports

inline std::string format_sig(double v, int digits = 12) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::string format_matrix(const Matrix& m, int digits = 12) {
  std::ostringstream os;
  for (Index i = 0; i < m.rows(); ++i) {
    os << "  [";
    for (Index j = 0; j < m.cols(); ++j) os << (j ? ", " : "") << format_sig(m(i, j), digits);
    os << "]\n";
  }
  return os.str();
}

inline std::string riccati_report(const ExperimentConfig& cfg) {
  const auto opt = solve_dare(cfg.system, cfg.weights);
  const Policy k0(cfg.initial_gain);
  std::ostringstream os;
  os << "K* =\n" << format_matrix(opt.K.K) << "P* =\n" << format_matrix(opt.P);
  os << "C(K*) = " << format_sig(average_cost(cfg.system, cfg.weights, opt.K)) << "\n";
  os << "riccati residual = " << format_sig(riccati_residual(cfg.system, cfg.weights, opt.P), 3) << "\n";
  os << "K0 (" << cfg.initial_gain_label << ") =\n" << format_matrix(k0.K);
  os << "spectral radius A = " << format_sig(spectral_radius(cfg.system.A)) << "\n";
  os << "spectral radius A+BK0 = " << format_sig(spectral_radius(closed_loop(cfg.system, k0))) << "\n";
  if (is_stabilizing(cfg.system, k0)) {
    os << "C(K0) = " << format_sig(average_cost(cfg.system, cfg.weights, k0)) << "\n";
  }
  return os.str();
}

// Theoretical constants at K0: the X ball of the config has diameter
// 2 * radius, Y = [-1, 1] has diameter 2, and alpha is measured on the exact
// regressors of the first seed's dataset.
inline std::string constants_report(const ExperimentConfig& cfg) {
  const Policy k0(cfg.initial_gain);
  const auto& sys = cfg.system;
  const double d_x = 2.0 * cfg.ball_radius, d_y = 2.0;
  const auto ds = collect_dataset(sys, cfg.samples, cfg.sigma_x, cfg.sigma_u, cfg.seeds.front());
  std::vector<Vector> gammas;
  for (const auto& t : ds.triples) gammas.push_back(exact_gamma(sys, k0, t.x, t.u));
  const double alpha = empirical_alpha(gammas);

  std::ostringstream os;
  os << "initial gain: " << cfg.initial_gain_label << "\n";
  os << "||xi_K0|| = " << format_sig(exact_xi(sys, cfg.weights, k0).coords().norm()) << "\n";
  os << "empirical alpha (seed " << cfg.seeds.front() << ", N=" << cfg.samples << ") = " << format_sig(alpha) << "\n";
  if (!(alpha > 0.0)) {
    os << "alpha is zero: informativity fails, sample-size bounds undefined\n";
    return os.str();
  }
  const auto bc = bound_constants(sys, cfg.weights, k0, cfg.sigma_x, cfg.sigma_u, cfg.delta, cfg.c1, cfg.c2, d_x,
                                  alpha);
  os << "delta = " << format_sig(bc.delta) << ", c1 = " << format_sig(bc.c1) << ", c2 = " << format_sig(bc.c2)
     << ", D_X = " << format_sig(d_x) << ", D_Y = " << format_sig(d_y) << "\n";
  os << "L_Gamma = " << format_sig(bc.L_Gamma) << "\nM_Gamma = " << format_sig(bc.M_Gamma)
     << "\nM_c = " << format_sig(bc.M_c) << "\nOmega_X = " << format_sig(bc.Omega_X)
     << "\nOmega_Y = " << format_sig(bc.Omega_Y) << "\nM_X = " << format_sig(bc.M_X)
     << "\nM_Y = " << format_sig(bc.M_Y) << "\n";
  const auto sched = bound_schedule(bc, d_x, d_y, 1);
  os << "step weights at k=1: eta = " << format_sig(sched.eta[0]) << ", lambda = " << format_sig(sched.lambda[0])
     << "\n";
  const double d0 = cfg.plan.D0;
  const double eps_xi = std::min(cfg.epsilon, d0 * d0);
  const auto sizing = epoch_sample_sizes(bc, d_y, d0, eps_xi);
  os << "epoch sizing for estimation accuracy " << format_sig(eps_xi) << ": S = " << sizing.S << ", Ns = [";
  for (std::size_t i = 0; i < sizing.Ns.size(); ++i) os << (i ? ", " : "") << format_sig(sizing.Ns[i]);
  os << "], total <= " << format_sig(sizing.total) << "\n";

  const double c0 = average_cost(sys, cfg.weights, k0);
  const double c_star = average_cost(sys, cfg.weights, solve_dare(sys, cfg.weights).K);
  for (Method m : {Method::NPG, Method::GNM}) {
    const double eta = m == Method::NPG ? std::min(cfg.pgm.step, npg_step_cap(sys, cfg.weights, k0))
                                        : std::min(cfg.pgm.step, 0.5);
    const auto cf = contraction_factors(sys, cfg.weights, eta, m, cfg.sigma, k0);
    os << to_string(m) << " (step " << format_sig(eta) << "): gamma = " << format_sig(cf.gamma)
       << ", gamma_hat = " << format_sig(cf.gamma_hat) << ", iterations to gap " << format_sig(cfg.epsilon)
       << " <= " << cf.iteration_bound(c0 - c_star, cfg.epsilon) << ", required accuracy = "
       << format_sig(required_accuracy(sys, cfg.weights, c0, cfg.epsilon, cfg.sigma, m)) << "\n";
  }
  return os.str();
}

}  // namespace mfpg
