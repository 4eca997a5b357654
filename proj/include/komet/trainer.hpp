#pragma once

// Warm-start sequential training: each timestep starts from the previous
// converged parameters and, when carry_moments is set, the previous Adam
// moments and step counter.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "komet/datasets.hpp"
#include "komet/model.hpp"

namespace komet {

struct AdamConstants {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainerState {
  ParamVector theta;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step_count = 0;
  int timestep = 0;

  static TrainerState zeros(int n_params);
  void reset_moments();
  /// Throws NumericalError on non-finite entries or negative second moments.
  void check() const;
};

struct TrainConfig {
  double learning_rate = 0.1;
  double lambda_s = 1e-4;
  double lambda_wd = 0.0;
  int patience = 50;
  double tolerance = 1e-6;
  int max_epochs = 2000;
  int batch_size = 1600;
  bool carry_moments = true;
  AdamConstants adam;

  /// Defaults per head: lambda_wd = 1e-4 for binary, 1e-3 for 3-class.
  static TrainConfig defaults_for(const NetConfig& cfg);
  void validate() const;
};

struct WeightTrajectory {
  Eigen::MatrixXd matrix;  // n_params x steps, column k = converged theta at t_begin + k
  std::vector<int> epochs;
  std::vector<double> accuracies;
  int t_begin = 0;

  int steps() const { return static_cast<int>(matrix.cols()); }
  double mean_epochs() const;
  double mean_accuracy() const;
  double min_accuracy() const;
};

struct TimestepResult {
  TrainerState state;
  int epochs = 0;
  double train_accuracy = 0.0;
};

TrainerState adam_step(const TrainerState& state, const Eigen::VectorXd& grad, double lr, const AdamConstants& c = {});

/// Full-batch Adam epochs until the task loss stops improving by `tolerance`
/// for `patience` consecutive epochs (or max_epochs). Regularizers are part of
/// the gradient but not of the stopping signal.
TimestepResult train_timestep(const TrainerState& state, const NetConfig& cfg, const TrainConfig& tcfg,
                              const LabeledBatch& batch, const std::optional<ParamVector>& theta_prev);

/// Uniform [-0.5, 0.5] initialization from the run seed.
ParamVector initial_params(const NetConfig& cfg, DriftKind kind, std::uint64_t seed);

struct SequenceResult {
  WeightTrajectory trajectory;
  TrainerState final_state;
};

/// Training batch for timestep t.
using BatchSource = std::function<LabeledBatch(int t)>;

/// Trains timesteps [t_begin, t_end) from `state`. `anchor` is theta_prev for
/// the first timestep (empty: no smoothness term).
SequenceResult run_sequence(const NetConfig& cfg, const TrainConfig& tcfg, int t_begin, int t_end,
                            const BatchSource& batches, TrainerState state, std::optional<ParamVector> anchor);

/// Trains timesteps [t_begin, t_end) on freshly sampled batches. With no start state, theta_0 comes
/// from initial_params and t_begin must be 0. Training failures are rethrown
/// with the offending timestep.
SequenceResult run_sequence(const DriftSpec& spec, const NetConfig& cfg, const TrainConfig& tcfg, int t_begin,
                            int t_end, std::uint64_t seed, const std::optional<TrainerState>& start = std::nullopt);

/// Per-row OLS slope over the column index (units per step).
Eigen::VectorXd trajectory_slopes(const Eigen::MatrixXd& trajectory);

/// Fraction of Layer-2 parameters whose |OLS slope| >= threshold.
double layer2_trend_fraction(const Eigen::MatrixXd& trajectory, const NetConfig& cfg, double threshold = 0.01);

}  // namespace komet
