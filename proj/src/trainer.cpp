#include "komet/trainer.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "komet/error.hpp"

namespace komet {

TrainerState TrainerState::zeros(int n_params) {
  TrainerState s;
  s.theta = Eigen::VectorXd::Zero(n_params);
  s.m = Eigen::VectorXd::Zero(n_params);
  s.v = Eigen::VectorXd::Zero(n_params);
  return s;
}

void TrainerState::reset_moments() {
  m.setZero(theta.size());
  v.setZero(theta.size());
  step_count = 0;
}

void TrainerState::check() const {
  if (m.size() != theta.size() || v.size() != theta.size()) throw std::invalid_argument("trainer state dimension mismatch");
  if (!theta.allFinite() || !m.allFinite() || !v.allFinite()) throw NumericalError("trainer state is not finite");
  if ((v.array() < 0.0).any()) throw NumericalError("negative second moment");
}

TrainConfig TrainConfig::defaults_for(const NetConfig& cfg) {
  TrainConfig t;
  t.lambda_wd = cfg.head == Head::sigmoid_bce ? 1e-4 : 1e-3;
  return t;
}

void TrainConfig::validate() const {
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
  if (!(tolerance > 0.0)) throw ConfigError("train.tolerance must be > 0");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (lambda_s < 0.0 || lambda_wd < 0.0) throw ConfigError("regularization weights must be >= 0");
}

double WeightTrajectory::mean_epochs() const {
  if (epochs.empty()) return 0.0;
  return std::accumulate(epochs.begin(), epochs.end(), 0.0) / static_cast<double>(epochs.size());
}

double WeightTrajectory::mean_accuracy() const {
  if (accuracies.empty()) return 0.0;
  return std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / static_cast<double>(accuracies.size());
}

double WeightTrajectory::min_accuracy() const {
  double m = std::numeric_limits<double>::infinity();
  for (double a : accuracies) m = std::min(m, a);
  return accuracies.empty() ? 0.0 : m;
}

TrainerState adam_step(const TrainerState& state, const Eigen::VectorXd& grad, double lr, const AdamConstants& c) {
  if (grad.size() != state.theta.size()) throw std::invalid_argument("adam_step: gradient dimension mismatch");
  if (!grad.allFinite()) throw NumericalError("adam_step: non-finite gradient");
  TrainerState next = state;
  next.step_count += 1;
  next.m = c.beta1 * state.m + (1.0 - c.beta1) * grad;
  next.v = c.beta2 * state.v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(next.step_count));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(next.step_count));
  next.theta.array() -= lr * (next.m.array() / bc1) / ((next.v.array() / bc2).sqrt() + c.eps);
  return next;
}

TimestepResult train_timestep(const TrainerState& state, const NetConfig& cfg, const TrainConfig& tcfg,
                              const LabeledBatch& batch, const std::optional<ParamVector>& theta_prev) {
  if (state.timestep != batch.timestep) throw std::invalid_argument("train_timestep: state/batch timestep mismatch");
  TrainerState s = state;
  if (!tcfg.carry_moments) s.reset_moments();

  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  int epoch = 0;
  while (epoch < tcfg.max_epochs) {
    const LossGrad lg = loss_and_grad(cfg, s.theta, batch, theta_prev, tcfg.lambda_s, tcfg.lambda_wd);
    s = adam_step(s, lg.grad, tcfg.learning_rate, tcfg.adam);
    ++epoch;
    if (lg.task < best - tcfg.tolerance) {
      best = lg.task;
      stale = 0;
    } else if (++stale >= tcfg.patience) {
      break;
    }
  }
  if (!s.theta.allFinite()) throw NumericalError("parameters became non-finite");
  return {s, epoch, accuracy(cfg, s.theta, batch)};
}

ParamVector initial_params(const NetConfig& cfg, DriftKind kind, std::uint64_t seed) {
  std::mt19937_64 rng(stream_seed(seed, kind, Stream::init, 0));
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  ParamVector theta(cfg.n_params());
  for (auto& x : theta) x = u(rng);
  return theta;
}

SequenceResult run_sequence(const NetConfig& cfg, const TrainConfig& tcfg, int t_begin, int t_end,
                            const BatchSource& batches, TrainerState state, std::optional<ParamVector> anchor) {
  tcfg.validate();
  if (t_end <= t_begin || t_begin < 0) throw std::invalid_argument("run_sequence: bad range");
  check_dims(cfg, state.theta);

  SequenceResult out;
  auto& traj = out.trajectory;
  traj.t_begin = t_begin;
  traj.matrix.resize(cfg.n_params(), t_end - t_begin);
  for (int t = t_begin; t < t_end; ++t) {
    state.timestep = t;
    const LabeledBatch batch = batches(t);
    TimestepResult r;
    try {
      r = train_timestep(state, cfg, tcfg, batch, anchor);
    } catch (const NumericalError& e) {
      throw NumericalError("training failed at t=" + std::to_string(t) + ": " + e.what());
    }
    state = r.state;
    anchor = state.theta;
    traj.matrix.col(t - t_begin) = state.theta;
    traj.epochs.push_back(r.epochs);
    traj.accuracies.push_back(r.train_accuracy);
  }
  out.final_state = state;
  return out;
}

SequenceResult run_sequence(const DriftSpec& spec, const NetConfig& cfg, const TrainConfig& tcfg, int t_begin,
                            int t_end, std::uint64_t seed, const std::optional<TrainerState>& start) {
  if (t_end > spec.total_steps) throw std::invalid_argument("run_sequence: range exceeds the stream");
  if (!start && t_begin != 0) throw std::invalid_argument("run_sequence: a cold sequence must start at t = 0");
  const BatchSource batches = [&](int t) { return sample_timestep(spec, t, tcfg.batch_size, seed, Stream::train); };
  if (start) {
    start->check();
    return run_sequence(cfg, tcfg, t_begin, t_end, batches, *start, start->theta);
  }
  TrainerState state = TrainerState::zeros(cfg.n_params());
  state.theta = initial_params(cfg, spec.kind, seed);
  return run_sequence(cfg, tcfg, t_begin, t_end, batches, state, std::nullopt);
}

Eigen::VectorXd trajectory_slopes(const Eigen::MatrixXd& w) {
  const auto n = w.cols();
  const Eigen::ArrayXd t = Eigen::ArrayXd::LinSpaced(n, 0.0, static_cast<double>(n - 1));
  const Eigen::ArrayXd tc = t - t.mean();
  const double sxx = (tc * tc).sum();
  Eigen::VectorXd slopes(w.rows());
  for (Eigen::Index i = 0; i < w.rows(); ++i) slopes[i] = (w.row(i).transpose().array() * tc).sum() / sxx;
  return slopes;
}

double layer2_trend_fraction(const Eigen::MatrixXd& w, const NetConfig& cfg, double threshold) {
  const Eigen::VectorXd slopes = trajectory_slopes(w);
  int count = 0, total = 0;
  for (Eigen::Index i = cfg.layer1_size(); i < slopes.size(); ++i) {
    ++total;
    if (std::abs(slopes[i]) >= threshold) ++count;
  }
  return total ? static_cast<double>(count) / total : 0.0;
}

}  // namespace komet
