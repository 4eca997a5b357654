#include "komet/eval.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace komet {

std::string_view to_string(EvalMode m) {
  switch (m) {
    case EvalMode::koopman_auto: return "koopman_auto";
    case EvalMode::frozen: return "frozen";
    case EvalMode::retrained: return "retrained";
  }
  return "?";
}

void AccuracySeries::summarize() {
  if (accuracies.empty()) {
    mean = min = 0.0;
    steps_below_90 = 0;
    return;
  }
  mean = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / static_cast<double>(accuracies.size());
  min = *std::min_element(accuracies.begin(), accuracies.end());
  steps_below_90 = static_cast<int>(std::count_if(accuracies.begin(), accuracies.end(), [](double a) { return a < 0.9; }));
}

AccuracySeries evaluate_weights(const DriftSpec& spec, const NetConfig& cfg, const std::vector<ParamVector>& thetas,
                                int t_begin, std::uint64_t seed, EvalMode mode, int n_test) {
  if (n_test < 1) throw std::invalid_argument("evaluate_weights: n_test must be >= 1");
  AccuracySeries s;
  s.mode = mode;
  s.t_begin = t_begin;
  s.accuracies.assign(thetas.size(), 0.0);
  const auto n = static_cast<std::ptrdiff_t>(thetas.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const int t = t_begin + static_cast<int>(k);
    const LabeledBatch batch = sample_timestep(spec, t, n_test, seed, Stream::test);
    s.accuracies[static_cast<std::size_t>(k)] = accuracy(cfg, thetas[static_cast<std::size_t>(k)], batch);
  }
  s.summarize();
  return s;
}

AccuracySeries evaluate_weights(const NetConfig& cfg, const std::vector<ParamVector>& thetas,
                                const std::vector<LabeledBatch>& batches, int t_begin, EvalMode mode) {
  if (batches.size() != thetas.size()) throw std::invalid_argument("evaluate_weights: one batch per parameter vector");
  AccuracySeries s;
  s.mode = mode;
  s.t_begin = t_begin;
  s.accuracies.assign(thetas.size(), 0.0);
  const auto n = static_cast<std::ptrdiff_t>(thetas.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(k);
    s.accuracies[i] = accuracy(cfg, thetas[i], batches[i]);
  }
  s.summarize();
  return s;
}

std::vector<ParamVector> frozen_baseline(const Eigen::MatrixXd& trajectory, int horizon) {
  if (trajectory.cols() == 0) throw std::invalid_argument("frozen_baseline: empty trajectory");
  return std::vector<ParamVector>(static_cast<std::size_t>(horizon), trajectory.col(trajectory.cols() - 1));
}

SequenceResult retrained_baseline(const DriftSpec& spec, const NetConfig& cfg, const TrainConfig& tcfg,
                                  const TrainerState& state, int t_begin, int t_end, std::uint64_t seed) {
  return run_sequence(spec, cfg, tcfg, t_begin, t_end, seed, state);
}

SequenceResult retrained_baseline(const NetConfig& cfg, const TrainConfig& tcfg, const TrainerState& state,
                                  int t_begin, int t_end, const BatchSource& batches) {
  state.check();
  return run_sequence(cfg, tcfg, t_begin, t_end, batches, state, state.theta);
}

RunReport build_report(const ReportInputs& in) {
  if (!in.training) throw std::invalid_argument("report: training stage missing");
  if (!in.retraining) throw std::invalid_argument("report: retrained baseline missing");
  if (!in.model) throw std::invalid_argument("report: Koopman fit missing");
  if (!in.net) throw std::invalid_argument("report: network config missing");
  if (!in.koopman_auto || !in.frozen || !in.retrained) throw std::invalid_argument("report: rollout evaluation missing");

  RunReport r;
  r.dataset = in.dataset;
  r.seed = in.seed;
  r.config_hash = in.config_hash;

  std::vector<double> acc = in.training->accuracies;
  acc.insert(acc.end(), in.retraining->accuracies.begin(), in.retraining->accuracies.end());
  r.training.mean_train_acc = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
  r.training.min_train_acc = *std::min_element(acc.begin(), acc.end());
  r.training.mean_epochs_warm = in.training->mean_epochs();
  r.training.mean_epochs_cold = in.mean_epochs_cold;
  Eigen::MatrixXd full(in.training->matrix.rows(), in.training->matrix.cols() + in.retraining->matrix.cols());
  full << in.training->matrix, in.retraining->matrix;
  r.training.layer2_trend_fraction = layer2_trend_fraction(full, *in.net);

  const auto& m = *in.model;
  r.koopman = {m.strategy, m.basis.dim(), static_cast<int>(m.scaler.mean.size()), m.basis.explained_ratio(),
               m.rho_pre, m.rho_post, m.rho_latent, m.fit_residual};

  r.koopman_auto = *in.koopman_auto;
  r.frozen = *in.frozen;
  r.retrained = *in.retrained;
  if (in.coupling) {
    r.coupling = CouplingSummary{in.coupling->dcor_mean_offdiag, in.coupling->dcor_frac_above_half,
                                 in.coupling->te_ratio_l1_l2, in.coupling->bins};
  }
  r.coupling_note = in.coupling_note;
  return r;
}

}  // namespace komet
