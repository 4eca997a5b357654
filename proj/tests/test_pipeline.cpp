#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "komet/error.hpp"
#include "komet/io.hpp"
#include "komet/pipeline.hpp"

using namespace komet;
namespace fs = std::filesystem;

namespace {

RunConfig small_config(DriftKind kind, const std::string& name) {
  RunConfig c = RunConfig::for_kind(kind);
  c.apply("dataset.period", "25");
  c.apply("train.t_train", "75");
  c.apply("train.patience", "10");
  c.apply("train.max_epochs", "200");
  c.apply("train.batch_size", "200");
  c.apply("eval.test_samples", "100");
  c.apply("train.cold_ablation", "false");
  c.out_dir = (fs::temp_directory_path() / ("komet_pipeline_" + name)).string();
  fs::remove_all(c.out_dir);
  return c;
}

std::string slurp(const fs::path& p) { return read_file(p); }

const char* kFiles[] = {"data_train.csv",        "data_test.csv",         "manifest.json",       "trajectory.csv",
                        "trajectory.json",       "koopman.json",          "eigenvalues.csv",     "predicted_weights.csv",
                        "retrained_weights.csv", "accuracy_traces.csv",   "rollout.json",        "dcor.csv",
                        "te.csv",                "te_norm.csv",           "dcor.svg",            "te_norm.svg",
                        "coupling.json",         "report.json",           "table1.csv"};

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("staged commands and cmd_all produce identical artifacts") {
  std::ostringstream log;
  auto a = small_config(DriftKind::D_orbit_mog, "all");
  auto b = small_config(DriftKind::D_orbit_mog, "staged");
  const auto ra = cmd_all(a, log);
  cmd_generate(b, log);
  cmd_train(b, log);
  cmd_fit(b, log);
  cmd_rollout(b, log);
  cmd_couple(b, log);
  const auto rb = cmd_report(b, log);
  for (const char* f : kFiles) {
    INFO(f);
    REQUIRE(fs::exists(fs::path(a.out_dir) / f));
    CHECK(slurp(fs::path(a.out_dir) / f) == slurp(fs::path(b.out_dir) / f));
  }
  CHECK(ra.koopman_auto.mean == rb.koopman_auto.mean);
  CHECK(ra.koopman_auto.accuracies.size() == 25);

  // Rerunning in place is byte-identical.
  const std::string before = slurp(fs::path(a.out_dir) / "report.json");
  cmd_all(a, log);
  CHECK(slurp(fs::path(a.out_dir) / "report.json") == before);
  fs::remove_all(a.out_dir);
  fs::remove_all(b.out_dir);
}

TEST_CASE("generated data layout") {
  std::ostringstream log;
  auto c = small_config(DriftKind::A_sign_flip, "generate");
  cmd_generate(c, log);
  const auto train = parse_csv(slurp(fs::path(c.out_dir) / "data_train.csv"));
  const auto test = parse_csv(slurp(fs::path(c.out_dir) / "data_test.csv"));
  CHECK(train.header == std::vector<std::string>{"x1", "x2", "label", "t"});
  CHECK(train.rows.size() == 100u * 200u);
  CHECK(test.rows.size() == 25u * 100u);
  CHECK(train.rows.front()[3] == "0");
  CHECK(train.rows.back()[3] == "99");
  CHECK(test.rows.front()[3] == "75");
  CHECK(train.config_hash == config_hash(c, Stage::data));
  const auto manifest = Json::parse(slurp(fs::path(c.out_dir) / "manifest.json"));
  CHECK(manifest["schema_version"] == kSchemaVersion);
  fs::remove_all(c.out_dir);
}

TEST_CASE("missing and stale upstream artifacts") {
  std::ostringstream log;
  auto c = small_config(DriftKind::B_osc_sep, "stale");
  CHECK_THROWS_AS(cmd_train(c, log), MissingArtifactError);
  cmd_generate(c, log);
  CHECK_THROWS_AS(cmd_fit(c, log), MissingArtifactError);
  cmd_train(c, log);
  cmd_fit(c, log);

  // A new strategy leaves training valid but invalidates the fit.
  auto other = c;
  other.apply("koopman.harmonics", "2");
  CHECK_THROWS_AS(cmd_rollout(other, log), MissingArtifactError);
  cmd_fit(other, log);
  cmd_rollout(other, log);
  CHECK_THROWS_AS(cmd_report(other, log), MissingArtifactError);  // no coupling yet

  // Changing a data key invalidates everything downstream.
  auto moved = c;
  moved.apply("dataset.sep_mean", "1.2");
  CHECK_THROWS_AS(cmd_train(moved, log), MissingArtifactError);

  // Corrupt JSON is reported as an unusable artifact.
  atomic_write(fs::path(c.out_dir) / "koopman.json", "{ not json");
  CHECK_THROWS_AS(cmd_rollout(c, log), MissingArtifactError);
  fs::remove_all(c.out_dir);
}

TEST_CASE("kind F: coupling refused unless forced, report marks it") {
  std::ostringstream log;
  auto c = small_config(DriftKind::F_expanding, "f");
  const auto r = cmd_all(c, log);
  CHECK_FALSE(r.coupling.has_value());
  CHECK(r.coupling_note.find("not reported") != std::string::npos);
  CHECK_FALSE(fs::exists(fs::path(c.out_dir) / "coupling.json"));
  CHECK(r.koopman.strategy == Strategy::detrend_fourier);
  CHECK_THROWS_AS(cmd_couple(c, log), ConfigError);
  const auto j = Json::parse(slurp(fs::path(c.out_dir) / "report.json"));
  CHECK(j["coupling"]["reported"] == false);

  c.force = true;
  cmd_couple(c, log);
  CHECK(cmd_report(c, log).coupling.has_value());
  fs::remove_all(c.out_dir);
}

TEST_CASE("exit codes by error category") {
  CHECK(exit_code_for(ConfigError("x")) == 2);
  CHECK(exit_code_for(NumericalError("x")) == 3);
  CHECK(exit_code_for(MissingArtifactError("x")) == 4);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
}

TEST_CASE("invalid configuration is rejected before any file is written") {
  std::ostringstream log;
  auto c = small_config(DriftKind::C_lissajous, "invalid");
  c.t_train = 10;
  CHECK_THROWS_AS(cmd_generate(c, log), ConfigError);
  CHECK_FALSE(fs::exists(c.out_dir));
}

}  // TEST_SUITE
