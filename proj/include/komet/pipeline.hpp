#pragma once

// Stage commands. Each stage reads the previous stage's files from
// cfg.out_dir, checks their config hash and writes its own outputs
// atomically. cmd_all runs the stages in order through the same files.
//
//   generate  data_train.csv data_test.csv manifest.json
//   train     trajectory.csv trajectory.json
//   fit       koopman.json eigenvalues.csv
//   rollout   predicted_weights.csv retrained_weights.csv accuracy_traces.csv rollout.json
//   couple    dcor.csv te.csv te_norm.csv dcor.svg te_norm.svg coupling.json
//   report    report.json table1.csv

#include <filesystem>
#include <ostream>
#include <string>

#include "komet/config.hpp"
#include "komet/eval.hpp"

namespace komet {

void cmd_generate(const RunConfig& cfg, std::ostream& log);
void cmd_train(const RunConfig& cfg, std::ostream& log);
void cmd_fit(const RunConfig& cfg, std::ostream& log);
void cmd_rollout(const RunConfig& cfg, std::ostream& log);
/// Refuses kind F (non-stationary training window) unless cfg.force.
void cmd_couple(const RunConfig& cfg, std::ostream& log);
RunReport cmd_report(const RunConfig& cfg, std::ostream& log);
RunReport cmd_all(const RunConfig& cfg, std::ostream& log);

/// Output directory for cfg (cfg.out_dir or the default per dataset/seed).
std::filesystem::path output_dir(const RunConfig& cfg);

/// Header and one summary row per run (table1.csv).
std::string table1_csv(const RunReport& r, const std::string& hash);

/// Maps ConfigError/NumericalError/MissingArtifactError to 2/3/4, anything else to 1.
int exit_code_for(const std::exception& e);

}  // namespace komet
