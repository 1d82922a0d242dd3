// Command-line front end: optimize (one run), regret (multi-seed experiment),
// report (plot-ready series from exported artifacts).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kernelband/log.hpp"
#include "kernelband/orchestrator.hpp"

namespace fs = std::filesystem;
using namespace kb;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string spec_path;
  int iterations = -1;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  bool flat_ucb = false;
  std::optional<double> alpha;
  int pretrain = 0;
};

Config resolve_config(const CommonOptions& opts) {
  Config cfg = opts.config_path.empty() ? Config{} : load_config_file(opts.config_path);
  if (opts.iterations >= 0) cfg.horizon = opts.iterations;
  if (opts.seed.has_value()) cfg.rng_seed = *opts.seed;
  if (opts.alpha.has_value()) {
    if (*opts.alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
    cfg.alpha = *opts.alpha;
  }
  return cfg;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
}

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_flat) {
  cmd->add_option("--config", opts.config_path, "key=value config file");
  cmd->add_option("--spec", opts.spec_path, "simulator spec (json)")->required();
  cmd->add_option("--iterations", opts.iterations, "optimization rounds T");
  cmd->add_option("--seed", opts.seed, "rng seed (overrides config)");
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--alpha", opts.alpha, "profiling bias weight (overrides config)");
  cmd->add_option("--pretrain", opts.pretrain,
                  "synthetic warm-start pairs per strategy (0 = cold start)");
  if (with_flat) {
    cmd->add_flag("--flat-ucb", opts.flat_ucb, "disable clustering (every kernel its own arm)");
  }
}

int run_optimize(const CommonOptions& opts) {
  const Config cfg = resolve_config(opts);
  const SimulatorSpec spec = load_simulator_spec(opts.spec_path);
  SimulatorEnvironment env(spec);

  RunOptions run_opts;
  run_opts.flat_ucb = opts.flat_ucb;
  run_opts.pretrain_pairs_per_strategy = opts.pretrain;
  const RunResult result = run_optimization(cfg, env, cfg.rng_seed, run_opts);

  fs::create_directories(opts.out_dir);
  export_trajectory(result.trajectory_data(), (fs::path(opts.out_dir) / "trajectory.tsv").string(),
                    "tsv");

  std::ostringstream state;
  result.bandit.dump(state);
  write_file(fs::path(opts.out_dir) / "bandit_state.tsv", state.str());

  std::ostringstream models;
  result.compatibility.save_parameters(models);
  write_file(fs::path(opts.out_dir) / "compat_models.tsv", models.str());

  if (result.regret.has_value()) {
    const auto bound = regret_bound_series(cfg.horizon, static_cast<int>(spec.strategies.size()),
                                           spec.cluster_epsilon, 1.0, cfg.alpha);
    std::ostringstream series;
    export_run_series(result, bound, series);
    write_file(fs::path(opts.out_dir) / "series.tsv", series.str());
  }

  std::printf("best kernel %lld, latency %.6g ms, speedup %.4g, pool %zu, artifacts in %s\n",
              static_cast<long long>(result.best_kernel_id), result.best_latency_ms,
              result.initial_best_latency_ms / result.best_latency_ms, result.pool.size(),
              opts.out_dir.c_str());
  return 0;
}

int run_regret(const CommonOptions& opts, int num_seeds) {
  Config cfg = resolve_config(opts);
  const SimulatorSpec spec = load_simulator_spec(opts.spec_path);
  const int horizon = opts.iterations >= 0 ? opts.iterations : cfg.horizon;

  ExperimentOptions exp_opts;
  exp_opts.flat_baseline = true;
  exp_opts.pretrain_pairs_per_strategy = opts.pretrain;
  const ExperimentSummary summary = run_regret_experiment(spec, cfg, num_seeds, horizon, exp_opts);

  fs::create_directories(opts.out_dir);
  std::ostringstream out;
  export_experiment_summary(summary, out);
  write_file(fs::path(opts.out_dir) / "regret_summary.tsv", out.str());

  std::printf(
      "%d seeds x %d rounds: mean cumulative regret %.2f (flat %.2f), bound %.1f; "
      "wrote %s/regret_summary.tsv\n",
      summary.num_seeds, summary.horizon, summary.mean_cumulative.back(),
      summary.flat_mean_cumulative.empty() ? 0.0 : summary.flat_mean_cumulative.back(),
      summary.bound.back(), opts.out_dir.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct RegretColumns {
  std::vector<double> mean_cumulative;
  std::vector<double> bound;
};

RegretColumns load_regret_summary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  RegretColumns cols;
  std::string line;
  int mean_idx = -1, bound_idx = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::istringstream row(line);
    std::string field;
    while (std::getline(row, field, '\t')) fields.push_back(field);
    if (mean_idx < 0) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i] == "mean_cumulative_regret") mean_idx = static_cast<int>(i);
        if (fields[i] == "bound") bound_idx = static_cast<int>(i);
      }
      if (mean_idx < 0 || bound_idx < 0) {
        throw std::runtime_error(path + ": not a regret summary");
      }
      continue;
    }
    cols.mean_cumulative.push_back(std::stod(fields[mean_idx]));
    cols.bound.push_back(std::stod(fields[bound_idx]));
  }
  return cols;
}

std::string detect_kind(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string first;
  std::getline(in, first);
  if (first == "# kernelband-trajectory v1") return "trajectory";
  if (first == "# kernelband-regret-summary v1") return "regret";
  throw std::runtime_error(path + ": unrecognized artifact");
}

int run_report(const std::vector<std::string>& inputs, const std::string& out_path) {
  std::vector<TrajectoryData> runs;
  std::optional<RegretColumns> regret;
  for (const auto& path : inputs) {
    const std::string kind = detect_kind(path);
    if (kind == "trajectory") {
      runs.push_back(load_trajectory(path));
    } else if (!regret.has_value()) {
      regret = load_regret_summary(path);
    }
  }
  if (runs.empty() && !regret.has_value()) {
    throw std::runtime_error("report: no usable inputs");
  }

  std::size_t horizon = regret.has_value() ? regret->mean_cumulative.size() : 0;
  for (const auto& run : runs) horizon = std::max(horizon, run.trajectory.size());

  // best-so-far latency per run and round
  std::vector<std::vector<double>> speedups(runs.size());
  for (std::size_t r = 0; r < runs.size(); ++r) {
    double best = runs[r].initial_best_latency_ms;
    speedups[r].reserve(horizon);
    for (std::size_t t = 0; t < horizon; ++t) {
      if (t < runs[r].trajectory.size()) {
        const PullRecord& pull = runs[r].trajectory[t];
        if (pull.child_valid && pull.child_latency_ms.has_value()) {
          best = std::min(best, *pull.child_latency_ms);
        }
      }
      speedups[r].push_back(runs[r].initial_best_latency_ms / best);
    }
  }

  std::ostringstream out;
  out << "# kernelband-report v1\n";
  out << "# runs " << runs.size() << '\n';
  if (!runs.empty()) {
    std::vector<double> base, final_best;
    for (const auto& run : runs) {
      base.push_back(run.initial_best_latency_ms);
      final_best.push_back(run.best_latency_ms);
    }
    std::vector<double> final_speedups;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      final_speedups.push_back(base[r] / final_best[r]);
    }
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "# final weighted_speedup %.6g geometric_mean %.6g fast_at_1 %.4g "
                  "best_speedup %.6g\n",
                  weighted_speedup(base, final_best), geometric_mean_speedup(final_speedups),
                  fast_at_1(final_speedups), best_speedup(final_speedups));
    out << buf;
  }

  out << "t";
  if (!runs.empty()) out << "\tgeomean_speedup\tfast_at_1\tbest_speedup";
  if (regret.has_value()) out << "\tmean_cumulative_regret\tbound";
  out << '\n';
  for (std::size_t t = 0; t < horizon; ++t) {
    out << (t + 1);
    if (!runs.empty()) {
      std::vector<double> at_round;
      for (const auto& run : speedups) at_round.push_back(run[t]);
      char buf[96];
      std::snprintf(buf, sizeof buf, "\t%.10g\t%.10g\t%.10g", geometric_mean_speedup(at_round),
                    fast_at_1(at_round), best_speedup(at_round));
      out << buf;
    }
    if (regret.has_value()) {
      if (t < regret->mean_cumulative.size()) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "\t%.10g\t%.10g", regret->mean_cumulative[t],
                      regret->bound[t]);
        out << buf;
      } else {
        out << "\t-\t-";
      }
    }
    out << '\n';
  }

  if (out_path.empty() || out_path == "-") {
    std::cout << out.str();
  } else {
    if (fs::path(out_path).has_parent_path()) {
      fs::create_directories(fs::path(out_path).parent_path());
    }
    write_file(out_path, out.str());
    std::printf("wrote %s\n", out_path.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical-bandit kernel optimization harness"};
  app.require_subcommand(1);

  CommonOptions optimize_opts;
  CLI::App* optimize = app.add_subcommand("optimize", "run one seeded optimization");
  add_common(optimize, optimize_opts, /*with_flat=*/true);

  CommonOptions regret_opts;
  int num_seeds = 30;
  CLI::App* regret = app.add_subcommand("regret", "multi-seed regret experiment");
  add_common(regret, regret_opts, /*with_flat=*/false);
  regret->add_option("--seeds", num_seeds, "number of independent seeds");

  std::vector<std::string> report_inputs;
  std::string report_out;
  CLI::App* report = app.add_subcommand("report", "plot-ready series from exported artifacts");
  report->add_option("--in", report_inputs, "trajectory and/or regret-summary files")
      ->required()
      ->expected(-1);
  report->add_option("--out", report_out, "output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (optimize->parsed()) return run_optimize(optimize_opts);
    if (regret->parsed()) return run_regret(regret_opts, num_seeds);
    return run_report(report_inputs, report_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
