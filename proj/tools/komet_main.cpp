// komet: stage-wise command line for the drift / Koopman pipeline.
//
//   komet all --dataset D --seed 0 --out runs/D
//   komet fit --dataset F --strategy fourier --out runs/F
//
// Exit codes: 0 success, 2 config error, 3 numerical failure,
// 4 missing or stale upstream artifact.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "komet/config.hpp"
#include "komet/error.hpp"
#include "komet/io.hpp"
#include "komet/pipeline.hpp"

namespace {

struct Flags {
  std::string config_file;
  std::string dataset, strategy, rollout_mode, out;
  long long seed = -1;
  int harmonics = -1, te_bins = -1, jobs = -1;
  double pca_threshold = -1.0;
  bool force = false;
  std::vector<std::string> overrides;
};

komet::RunConfig resolve(const Flags& f) {
  komet::KeyValues kv;
  if (!f.config_file.empty()) kv = komet::read_key_values(f.config_file);
  for (const auto& o : f.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw komet::ConfigError("--set expects key=value, got '" + o + "'");
    kv[o.substr(0, eq)] = o.substr(eq + 1);
  }
  if (!f.dataset.empty()) kv["dataset.kind"] = f.dataset;
  if (f.seed >= 0) kv["run.seed"] = std::to_string(f.seed);
  if (!f.strategy.empty()) kv["koopman.strategy"] = f.strategy;
  if (f.harmonics >= 0) kv["koopman.harmonics"] = std::to_string(f.harmonics);
  if (f.pca_threshold >= 0.0) kv["koopman.pca_threshold"] = komet::format_double(f.pca_threshold);
  if (f.te_bins >= 0) kv["coupling.te_bins"] = std::to_string(f.te_bins);
  if (!f.rollout_mode.empty()) kv["koopman.rollout_mode"] = f.rollout_mode;
  if (!f.out.empty()) kv["run.out"] = f.out;
  if (f.jobs >= 0) kv["run.jobs"] = std::to_string(f.jobs);
  if (f.force) kv["coupling.force"] = "true";
  auto cfg = komet::RunConfig::from_key_values(kv);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"komet: drifting-stream training, Koopman weight forecasting and coupling diagnostics"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  Flags f;
  app.add_option("--config", f.config_file, "key = value config file");
  app.add_option("--dataset", f.dataset, "dataset kind A-F");
  app.add_option("--seed", f.seed, "run seed")->check(CLI::NonNegativeNumber);
  app.add_option("--strategy", f.strategy, "auto | fourier | detrend_fourier");
  app.add_option("--harmonics", f.harmonics, "Fourier harmonics K")->check(CLI::NonNegativeNumber);
  app.add_option("--pca-threshold", f.pca_threshold, "explained-variance threshold");
  app.add_option("--te-bins", f.te_bins, "quantile bins per series for TE");
  app.add_option("--out", f.out, "output directory (default runs/<kind>_s<seed>)");
  app.add_flag("--force", f.force, "compute coupling on dataset F");
  app.add_option("--rollout-mode", f.rollout_mode, "autonomous | reproject_time");
  app.add_option("--jobs", f.jobs, "OpenMP threads (0 = default)")->check(CLI::NonNegativeNumber);
  app.add_option("--set", f.overrides, "extra key=value override (repeatable)");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"generate", "sample the train and test streams"},
      {"train", "warm-start training over the training window"},
      {"fit", "fit the Koopman model to the weight trajectory"},
      {"rollout", "autonomous rollout and baseline evaluation"},
      {"couple", "dCor / TE coupling matrices and heatmaps"},
      {"report", "assemble report.json and table1.csv"},
      {"all", "every stage in order"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const komet::RunConfig cfg = resolve(f);
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "generate") komet::cmd_generate(cfg, std::cerr);
    else if (cmd == "train") komet::cmd_train(cfg, std::cerr);
    else if (cmd == "fit") komet::cmd_fit(cfg, std::cerr);
    else if (cmd == "rollout") komet::cmd_rollout(cfg, std::cerr);
    else if (cmd == "couple") komet::cmd_couple(cfg, std::cerr);
    else if (cmd == "report") komet::cmd_report(cfg, std::cerr);
    else komet::cmd_all(cfg, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return komet::exit_code_for(e);
  }
  return 0;
}
