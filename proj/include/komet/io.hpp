#pragma once

// Artifact persistence. Every file is written to a temporary sibling and
// renamed into place, so a reader never sees a partial artifact.

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "komet/coupling.hpp"
#include "komet/datasets.hpp"
#include "komet/eval.hpp"
#include "komet/koopman.hpp"
#include "komet/trainer.hpp"

namespace komet {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

void atomic_write(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

// --- CSV ---------------------------------------------------------------------

/// `# config_hash=<hash>` comment line, then the header row, then data.
struct CsvTable {
  std::string config_hash;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string to_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

/// Rows = named parameters, columns = timesteps t_begin ... (header "param,t<k>...").
CsvTable weights_table(const Eigen::MatrixXd& w, const std::vector<std::string>& names, int t_begin,
                       const std::string& hash);
Eigen::MatrixXd weights_from_table(const CsvTable& table, const std::vector<std::string>& names, int* t_begin);

/// Square matrix with parameter names on both axes.
CsvTable named_matrix_table(const Eigen::MatrixXd& m, const std::vector<std::string>& names, const std::string& hash);

/// Packed batches with header x1,x2,label,t (rows grouped by t, ascending).
std::string batches_csv(const std::vector<LabeledBatch>& batches, const std::string& hash);
/// Inverse of batches_csv. Labels must lie in [0, n_classes).
std::vector<LabeledBatch> parse_batches_csv(const std::string& text, int n_classes, std::string* hash);

CsvTable eigenvalue_table(const Eigen::VectorXcd& eigenvalues, const std::string& hash);

// --- JSON --------------------------------------------------------------------

Json vector_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j);
Json matrix_json(const Eigen::MatrixXd& m);  // row-major list of rows
Eigen::MatrixXd matrix_from_json(const Json& j);

Json to_json(const TrainerState& s);
TrainerState trainer_state_from_json(const Json& j);

Json to_json(const KoopmanModel& m);
KoopmanModel koopman_from_json(const Json& j);

Json to_json(const AccuracySeries& s);
AccuracySeries accuracy_series_from_json(const Json& j);

Json to_json(const RunReport& r);
RunReport run_report_from_json(const Json& j);

/// Pretty JSON text with a trailing newline.
std::string dump(const Json& j);

}  // namespace komet
