#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "bipinn/config.hpp"
#include "bipinn/dot.hpp"
#include "bipinn/modular.hpp"
#include "bipinn/serialize.hpp"
#include "bipinn/trainer.hpp"

// Experiment presets: the architecture-evolution run with its dense baseline
// (fig2), the bare-minimum architecture sweep (fig4), and the modular-vs-
// dense comparison (fig5). Presets expand to a list of independent runs that
// a small worker pool executes; aggregation order is fixed by the list.

namespace bipinn {

struct PresetRun {
  std::string name;
  RunConfig config;
  bool modular = false;
  ModuleTemplate tmpl;  // used when modular
  int module_count = 0;
  // fig4 table fields
  std::string problem_label;
  int hidden_layers = 1;
};

struct RunResult {
  PresetRun run;
  RunRecord record;
  long active_hidden_units = 0;
  std::size_t nonzero_weights = 0;
  std::size_t total_weights = 0;
  GeometricNetwork final_net;  // empty for modular runs
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline RunResult execute_run(const PresetRun& run) {
  RunResult res;
  res.run = run;
  const ProblemSpec spec = run.config.problem_spec();
  const TrainConfig tc = run.config.train_config();
  if (run.modular) {
    ModularNetwork net = build_modular(run.tmpl, run.module_count, tc.seed, run.config.A);
    res.record = train_modular(net, spec, tc);
    res.active_hidden_units = hidden_active_units(net);
    res.nonzero_weights = nonzero_weight_count(net);
    res.total_weights = total_weight_count(net);
  } else {
    GeometricNetwork net = init_xavier(run.config.architecture(), tc.seed);
    res.record = train(net, spec, tc);
    res.active_hidden_units = hidden_active_units(net);
    res.nonzero_weights = nonzero_weight_count(net);
    res.total_weights = total_weight_count(net);
    res.final_net = std::move(net);
  }
  return res;
}

// Executes all runs, `workers` at a time (each run internally honors its own
// thread setting). Results come back in list order.
inline std::vector<RunResult> execute_runs(const std::vector<PresetRun>& runs, int workers) {
  std::vector<RunResult> results(runs.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < runs.size(); ++i) results[i] = execute_run(runs[i]);
    return results;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      results[i] = execute_run(runs[i]);
    }
  };
  std::vector<std::thread> pool;
  for (int k = 0; k < workers; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return results;
}

inline json final_report_json(const RunResult& res) {
  json j;
  j["test_mse"] = res.record.final_error.mse;
  j["test_euclidean"] = res.record.final_error.euclidean;
  j["diverged"] = res.record.diverged;
  j["zeroed_weights"] = res.record.prune_stats.zeroed_weights;
  j["zeroed_biases"] = res.record.prune_stats.zeroed_biases;
  j["active_units_per_layer"] = res.record.prune_stats.active_units_per_layer;
  j["active_hidden_units"] = res.active_hidden_units;
  j["nonzero_weights"] = res.nonzero_weights;
  j["total_weights"] = res.total_weights;
  return j;
}

// Writes metrics.csv, snapshot_<epoch>.json files, final_report.json, and
// the effective config.json into `dir`.
inline void write_run_artifacts(const std::filesystem::path& dir, const RunResult& res) {
  std::filesystem::create_directories(dir);
  write_text_file((dir / "metrics.csv").string(), metrics_csv(res.record.metrics));
  write_text_file((dir / "config.json").string(), config_to_json(res.run.config).dump(2) + "\n");
  for (const auto& snap : res.record.snapshots)
    write_text_file((dir / ("snapshot_" + std::to_string(snap.epoch) + ".json")).string(),
                    snapshot_to_json(snap.net, snap.epoch).dump() + "\n");
  write_text_file((dir / "final_report.json").string(), final_report_json(res).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Preset run lists
// ---------------------------------------------------------------------------

// Architecture evolution on the four-harmonic problem: one brain-inspired
// run and one fully connected baseline, two hidden layers of 21.
inline std::vector<PresetRun> fig2_runs(long epochs = 400000, std::uint64_t seed = 1) {
  RunConfig base;
  base.coefficients = {1.0, 4.0, 9.0, 16.0};
  base.layer_sizes = {1, 21, 21, 1};
  base.epochs = epochs;
  base.seed = seed;
  base.metrics_every = std::max(1L, epochs / 400);
  base.snapshot_every = std::max(1L, epochs / 8);

  PresetRun bimt{"bimt", base};
  PresetRun dense{"dense", base};
  dense.config.bimt_enabled = false;
  return {bimt, dense};
}

// Bare-minimum architecture sweep: logistic plus single-harmonic sources of
// increasing frequency, with one and two hidden layers, several seeds each.
inline std::vector<PresetRun> fig4_runs(long epochs = 100000, int seeds = 3) {
  struct ProblemDef {
    std::string label;
    std::string problem;
    std::vector<double> coeffs;
  };
  const std::vector<ProblemDef> problems = {
      {"logistic", "logistic", {}},
      {"poisson_k1", "poisson_harmonic", {1.0}},
      {"poisson_k2", "poisson_harmonic", {0.0, 4.0}},
      {"poisson_k3", "poisson_harmonic", {0.0, 0.0, 9.0}},
      {"poisson_k4", "poisson_harmonic", {0.0, 0.0, 0.0, 16.0}},
  };
  std::vector<PresetRun> runs;
  for (const auto& p : problems)
    for (int depth = 1; depth <= 2; ++depth)
      for (int s = 1; s <= seeds; ++s) {
        RunConfig cfg;
        cfg.problem = p.problem;
        if (!p.coeffs.empty()) cfg.coefficients = p.coeffs;
        cfg.layer_sizes = depth == 1 ? std::vector<int>{1, 21, 1} : std::vector<int>{1, 21, 21, 1};
        cfg.epochs = epochs;
        cfg.seed = static_cast<std::uint64_t>(s);
        cfg.metrics_every = std::max(1L, epochs / 100);
        PresetRun run;
        run.name = p.label + "_h" + std::to_string(depth) + "_seed" + std::to_string(s);
        run.config = cfg;
        run.problem_label = p.label;
        run.hidden_layers = depth;
        runs.push_back(std::move(run));
      }
  return runs;
}

// Modular PINN (three summed single-sine modules) against a fully connected
// MLP with one hidden layer of nine units, on the four-harmonic problem.
inline std::vector<PresetRun> fig5_runs(long epochs = 50000, int seeds = 3) {
  std::vector<PresetRun> runs;
  const ModuleTemplate tmpl = dense_template({1, 3, 1}, Activation::SinLU);
  for (int s = 1; s <= seeds; ++s) {
    RunConfig base;
    base.coefficients = {1.0, 4.0, 9.0, 16.0};
    base.epochs = epochs;
    base.seed = static_cast<std::uint64_t>(s);
    base.bimt_enabled = false;
    base.metrics_every = std::max(1L, epochs / 100);

    PresetRun modular;
    modular.name = "modular_seed" + std::to_string(s);
    modular.config = base;
    modular.config.layer_sizes = {1, 3, 1};  // per module
    modular.modular = true;
    modular.tmpl = tmpl;
    modular.module_count = 3;
    runs.push_back(std::move(modular));

    PresetRun dense;
    dense.name = "dense_seed" + std::to_string(s);
    dense.config = base;
    dense.config.layer_sizes = {1, 9, 1};
    runs.push_back(std::move(dense));
  }
  return runs;
}

// fig4 summary: one CSV row per run plus per-(problem, depth) medians.
inline std::string fig4_table(const std::vector<RunResult>& results) {
  std::string out = "problem,hidden_layers,seed,active_hidden_units,test_euclidean\n";
  for (const auto& r : results) {
    out += r.run.problem_label + "," + std::to_string(r.run.hidden_layers) + "," +
           std::to_string(r.run.config.seed) + "," + std::to_string(r.active_hidden_units) +
           "," + detail::fmt("%.6g", r.record.final_error.euclidean) + "\n";
  }
  return out;
}

inline json fig4_medians(const std::vector<RunResult>& results) {
  json out = json::array();
  std::vector<std::pair<std::string, int>> groups;
  for (const auto& r : results) {
    const std::pair<std::string, int> g{r.run.problem_label, r.run.hidden_layers};
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
  }
  for (const auto& [label, depth] : groups) {
    std::vector<double> units, errs;
    for (const auto& r : results)
      if (r.run.problem_label == label && r.run.hidden_layers == depth) {
        units.push_back(static_cast<double>(r.active_hidden_units));
        errs.push_back(r.record.final_error.euclidean);
      }
    out.push_back(json{{"problem", label},
                       {"hidden_layers", depth},
                       {"median_active_hidden_units", median(units)},
                       {"median_test_euclidean", median(errs)}});
  }
  return out;
}

}  // namespace bipinn
