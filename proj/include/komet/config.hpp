#pragma once

// Run configuration: a flat `key = value` text format with dotted section
// keys, e.g.
//
//   dataset.kind = D
//   dataset.radius = 1.8
//   train.lambda_wd = 0.001
//   koopman.strategy = auto
//
// Lines starting with '#' are comments. Unknown keys are rejected.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "komet/datasets.hpp"
#include "komet/koopman.hpp"
#include "komet/model.hpp"
#include "komet/trainer.hpp"

namespace komet {

using KeyValues = std::map<std::string, std::string>;

/// Parses the text format. Throws ConfigError with the offending line number.
KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values(const std::string& path);

enum class StrategyChoice { automatic, fourier, detrend_fourier };

struct RunConfig {
  DriftSpec dataset = DriftSpec::defaults(DriftKind::A_sign_flip);
  TrainConfig train = TrainConfig::defaults_for(NetConfig::for_classes(2));
  bool cold_ablation = true;  // also train with reset moments to count epochs
  int t_train = 300;          // training window is [0, t_train), rollout [t_train, total_steps)

  StrategyChoice strategy = StrategyChoice::automatic;
  int harmonics = 4;
  double pca_threshold = 0.995;
  double eps = 1e-6;
  double rcond = 1e-10;
  RolloutMode rollout_mode = RolloutMode::autonomous;

  int te_bins = 8;
  int test_samples = 400;
  std::uint64_t seed = 0;

  // Execution settings; not part of any hash.
  std::string out_dir;
  bool force = false;
  int jobs = 0;  // 0 = OpenMP default

  /// Kind defaults for dataset and train sections.
  static RunConfig for_kind(DriftKind kind);

  /// Defaults for dataset.kind (if present), then every key applied.
  static RunConfig from_key_values(const KeyValues& kv);
  void apply(const std::string& key, const std::string& value);

  NetConfig net() const { return NetConfig::for_classes(dataset.n_classes); }
  Strategy resolved_strategy() const;
  KoopmanOptions koopman_options() const;
  int horizon() const { return dataset.total_steps - t_train; }

  /// Throws ConfigError on any invalid field.
  void validate() const;

  /// Canonical text (sorted keys, round-trip number formatting). Execution
  /// settings are omitted.
  std::string to_text() const;
};

/// Which pipeline stage a hash covers. Each stage hashes only the keys that
/// can change its outputs, so e.g. a new strategy does not invalidate training.
enum class Stage { data, train, fit, rollout, couple, report };

/// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// fnv1a_hex over the canonical key/value lines of the stage.
std::string config_hash(const RunConfig& cfg, Stage stage);

std::string default_out_dir(const RunConfig& cfg);

}  // namespace komet
