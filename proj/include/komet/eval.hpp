#pragma once

// Held-out evaluation of predicted weights and the per-run summary report.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "komet/coupling.hpp"
#include "komet/datasets.hpp"
#include "komet/koopman.hpp"
#include "komet/model.hpp"
#include "komet/trainer.hpp"

namespace komet {

enum class EvalMode { koopman_auto, frozen, retrained };
std::string_view to_string(EvalMode m);

inline constexpr int kTestSamples = 400;

struct AccuracySeries {
  EvalMode mode = EvalMode::koopman_auto;
  int t_begin = 0;
  std::vector<double> accuracies;
  double mean = 0.0;
  double min = 0.0;
  int steps_below_90 = 0;  // strict acc < 0.9

  /// Recomputes mean/min/steps_below_90 from the series.
  void summarize();
};

/// Accuracy of thetas[k] on a fresh test batch drawn at t_begin + k.
AccuracySeries evaluate_weights(const DriftSpec& spec, const NetConfig& cfg, const std::vector<ParamVector>& thetas,
                                int t_begin, std::uint64_t seed, EvalMode mode, int n_test = kTestSamples);

/// Same, on caller-supplied test batches (batches[k] belongs to t_begin + k).
AccuracySeries evaluate_weights(const NetConfig& cfg, const std::vector<ParamVector>& thetas,
                                const std::vector<LabeledBatch>& batches, int t_begin, EvalMode mode);

/// The last training column repeated horizon times.
std::vector<ParamVector> frozen_baseline(const Eigen::MatrixXd& trajectory, int horizon);

/// Continues warm-start training with labelled data over [t_begin, t_end).
SequenceResult retrained_baseline(const DriftSpec& spec, const NetConfig& cfg, const TrainConfig& tcfg,
                                  const TrainerState& state, int t_begin, int t_end, std::uint64_t seed);
SequenceResult retrained_baseline(const NetConfig& cfg, const TrainConfig& tcfg, const TrainerState& state,
                                  int t_begin, int t_end, const BatchSource& batches);

struct TrainingSummary {
  double mean_train_acc = 0.0;  // over every trained timestep, held-out retraining included
  double min_train_acc = 0.0;
  double mean_epochs_warm = 0.0;           // training window only, comparable with the ablation
  std::optional<double> mean_epochs_cold;  // moment-reset ablation over the training window, when run
  double layer2_trend_fraction = 0.0;
};

struct KoopmanSummary {
  Strategy strategy = Strategy::fourier;
  int latent_dim = 0;
  int n_params = 0;
  double explained_ratio = 0.0;
  double rho_pre = 0.0;
  double rho_post = 0.0;
  double rho_latent = 0.0;
  double fit_residual = 0.0;
};

struct CouplingSummary {
  double dcor_mean_offdiag = 0.0;
  double dcor_frac_above_half = 0.0;
  double te_ratio_l1_l2 = 0.0;
  int bins = 8;
};

struct RunReport {
  std::string dataset;
  TrainingSummary training;
  KoopmanSummary koopman;
  AccuracySeries koopman_auto;
  AccuracySeries frozen;
  AccuracySeries retrained;
  std::optional<CouplingSummary> coupling;  // empty = not reported
  std::string coupling_note;
  std::uint64_t seed = 0;
  std::string config_hash;

  double gap_to_retrained() const { return retrained.mean - koopman_auto.mean; }
};

struct ReportInputs {
  std::string dataset;
  const WeightTrajectory* training = nullptr;   // t = 0 .. t_train
  const WeightTrajectory* retraining = nullptr;  // held-out window
  std::optional<double> mean_epochs_cold;
  const KoopmanModel* model = nullptr;
  const NetConfig* net = nullptr;
  const AccuracySeries* koopman_auto = nullptr;
  const AccuracySeries* frozen = nullptr;
  const AccuracySeries* retrained = nullptr;
  const CouplingReport* coupling = nullptr;  // null = explicitly skipped
  std::string coupling_note;
  std::uint64_t seed = 0;
  std::string config_hash;
};

/// Throws std::invalid_argument naming the first missing mandatory stage.
RunReport build_report(const ReportInputs& in);

}  // namespace komet
