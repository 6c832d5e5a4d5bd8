// Command-line front end: single runs from a JSON config, experiment
// presets, and Graphviz export of network snapshots.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bipinn/presets.hpp"

namespace fs = std::filesystem;
using namespace bipinn;

namespace {

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_dir) {
  if (!fs::exists(config_path)) {
    std::cerr << "error: config file not found: " << config_path << "\n";
    return 1;
  }
  json j = json::parse(read_text_file(config_path));
  for (const auto& kv : overrides) apply_override(j, kv);
  const RunConfig config = config_from_json(j);

  PresetRun run;
  run.name = "train";
  run.config = config;
  const RunResult res = execute_run(run);
  write_run_artifacts(out_dir, res);
  if (res.record.diverged) {
    std::cerr << "error: training diverged at epoch " << res.record.diverged_epoch
              << " (partial metrics written to " << out_dir << ")\n";
    return 1;
  }
  std::printf("final test error: euclidean %.6g, mse %.6g\n", res.record.final_error.euclidean,
              res.record.final_error.mse);
  std::printf("active hidden units: %ld, nonzero weights: %zu/%zu\n", res.active_hidden_units,
              res.nonzero_weights, res.total_weights);
  std::printf("artifacts written to %s\n", out_dir.c_str());
  return 0;
}

int cmd_preset(const std::string& name, const std::string& out_dir, long epochs, int seeds,
               int workers) {
  std::vector<PresetRun> runs;
  if (name == "fig2") {
    runs = fig2_runs(epochs > 0 ? epochs : 400000);
  } else if (name == "fig4") {
    runs = fig4_runs(epochs > 0 ? epochs : 100000, seeds);
  } else if (name == "fig5") {
    runs = fig5_runs(epochs > 0 ? epochs : 50000, seeds);
  } else {
    std::cerr << "error: unknown preset: " << name << "\n";
    return 1;
  }

  const std::vector<RunResult> results = execute_runs(runs, workers);
  fs::create_directories(out_dir);
  json summary = json::array();
  for (const auto& res : results) {
    write_run_artifacts(fs::path(out_dir) / res.run.name, res);
    json entry = final_report_json(res);
    entry["name"] = res.run.name;
    summary.push_back(std::move(entry));
    std::printf("%-24s euclidean %.6g mse %.6g active %ld\n", res.run.name.c_str(),
                res.record.final_error.euclidean, res.record.final_error.mse,
                res.active_hidden_units);
  }
  write_text_file((fs::path(out_dir) / "summary.json").string(), summary.dump(2) + "\n");
  if (name == "fig4") {
    write_text_file((fs::path(out_dir) / "architectures.csv").string(), fig4_table(results));
    write_text_file((fs::path(out_dir) / "medians.json").string(),
                    fig4_medians(results).dump(2) + "\n");
  }
  if (name == "fig5") {
    std::vector<double> mod_mse, dense_mse;
    int module_count = 0;
    for (const auto& res : results) {
      (res.run.modular ? mod_mse : dense_mse).push_back(res.record.final_error.mse);
      if (res.run.modular) module_count = res.run.module_count;
    }
    json cmp{{"median_modular_mse", median(mod_mse)},
             {"median_dense_mse", median(dense_mse)},
             {"modules", module_count},
             {"template", "template.json"}};
    write_text_file((fs::path(out_dir) / "comparison.json").string(), cmp.dump(2) + "\n");
    for (const auto& res : results)
      if (res.run.modular) {
        write_text_file((fs::path(out_dir) / "template.json").string(),
                        template_to_json(res.run.tmpl).dump(2) + "\n");
        break;
      }
  }
  bool any_diverged = false;
  for (const auto& res : results) any_diverged |= res.record.diverged;
  return any_diverged ? 1 : 0;
}

int cmd_export_dot(const std::string& snapshot_path, const std::string& out_path) {
  const Snapshot snap = snapshot_from_json(json::parse(read_text_file(snapshot_path)));
  const std::string dot = export_dot(snap.net);
  if (out_path.empty())
    std::fputs(dot.c_str(), stdout);
  else
    write_text_file(out_path, dot);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Brain-inspired PINN trainer"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::vector<std::string> overrides;
  auto* train_cmd = app.add_subcommand("train", "train one network from a JSON config");
  train_cmd->add_option("--config", config_path, "config JSON path")->required();
  train_cmd->add_option("--set", overrides, "override config keys (key=value)");
  train_cmd->add_option("--out", out_dir, "output directory");

  std::string preset_name, preset_out = "out";
  long preset_epochs = 0;
  int preset_seeds = 3, preset_workers = 2;
  auto* preset_cmd = app.add_subcommand("preset", "run an experiment preset");
  preset_cmd->add_option("name", preset_name, "fig2 | fig4 | fig5")->required();
  preset_cmd->add_option("--out", preset_out, "output directory");
  preset_cmd->add_option("--epochs", preset_epochs, "override epochs per run");
  preset_cmd->add_option("--seeds", preset_seeds, "seeds per configuration");
  preset_cmd->add_option("--workers", preset_workers, "concurrent runs");

  std::string snapshot_path, dot_out;
  auto* dot_cmd = app.add_subcommand("export-dot", "render a snapshot as Graphviz DOT");
  dot_cmd->add_option("snapshot", snapshot_path, "snapshot JSON path")->required();
  dot_cmd->add_option("-o,--output", dot_out, "output file (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(config_path, overrides, out_dir);
    if (preset_cmd->parsed()) return cmd_preset(preset_name, preset_out, preset_epochs,
                                                preset_seeds, preset_workers);
    if (dot_cmd->parsed()) return cmd_export_dot(snapshot_path, dot_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
