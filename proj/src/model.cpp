#include "komet/model.hpp"

#include <cmath>

#include "komet/error.hpp"
#include "komet/kernels.hpp"
#include "net_kernel.hpp"

namespace komet {

NetConfig NetConfig::for_classes(int n_classes) {
  NetConfig cfg;
  cfg.n_classes = n_classes;
  cfg.head = n_classes == 2 ? Head::sigmoid_bce : Head::softmax_ce;
  return cfg;
}

void check_dims(const NetConfig& cfg, const ParamVector& theta) {
  if (theta.size() != cfg.n_params()) {
    throw std::invalid_argument("parameter vector has " + std::to_string(theta.size()) + " entries, network expects " +
                                std::to_string(cfg.n_params()));
  }
  if (cfg.hidden > detail::kMaxHidden || cfg.n_outputs() > detail::kMaxOutputs) {
    throw std::invalid_argument("network too large for the fixed-size kernel buffers");
  }
}

NetParams unflatten(const NetConfig& cfg, const ParamVector& theta) {
  check_dims(cfg, theta);
  const detail::Layout L(cfg);
  NetParams p;
  p.w1.resize(L.hidden, L.in);
  p.w2.resize(L.out, L.hidden);
  for (int j = 0; j < L.hidden; ++j)
    for (int i = 0; i < L.in; ++i) p.w1(j, i) = theta[j * L.in + i];
  p.b1 = theta.segment(L.b1, L.hidden);
  for (int o = 0; o < L.out; ++o)
    for (int j = 0; j < L.hidden; ++j) p.w2(o, j) = theta[L.w2 + o * L.hidden + j];
  p.b2 = theta.segment(L.b2, L.out);
  return p;
}

ParamVector flatten(const NetConfig& cfg, const NetParams& p) {
  const detail::Layout L(cfg);
  ParamVector theta(cfg.n_params());
  for (int j = 0; j < L.hidden; ++j)
    for (int i = 0; i < L.in; ++i) theta[j * L.in + i] = p.w1(j, i);
  theta.segment(L.b1, L.hidden) = p.b1;
  for (int o = 0; o < L.out; ++o)
    for (int j = 0; j < L.hidden; ++j) theta[L.w2 + o * L.hidden + j] = p.w2(o, j);
  theta.segment(L.b2, L.out) = p.b2;
  return theta;
}

std::vector<std::string> param_names(const NetConfig& cfg) {
  const detail::Layout L(cfg);
  std::vector<std::string> names;
  for (int k = 0; k < L.hidden * L.in; ++k) names.push_back("l1w" + std::to_string(k));
  for (int k = 0; k < L.hidden; ++k) names.push_back("l1b" + std::to_string(k));
  for (int k = 0; k < L.out * L.hidden; ++k) names.push_back("l2w" + std::to_string(k));
  for (int k = 0; k < L.out; ++k) names.push_back("l2b" + std::to_string(k));
  return names;
}

Eigen::VectorXd forward(const NetConfig& cfg, const ParamVector& theta, const Eigen::Vector2d& x) {
  check_dims(cfg, theta);
  const detail::Layout L(cfg);
  double h[detail::kMaxHidden];
  double z[detail::kMaxOutputs];
  detail::logits(L, theta.data(), x.data(), h, z);
  if (L.out == 1) return Eigen::VectorXd::Constant(1, detail::sigmoid(z[0]));
  Eigen::Map<Eigen::VectorXd> zv(z, L.out);
  Eigen::VectorXd p = (zv.array() - zv.maxCoeff()).exp();
  return p / p.sum();
}

int predict(const NetConfig& cfg, const ParamVector& theta, const Eigen::Vector2d& x) {
  check_dims(cfg, theta);
  const detail::Layout L(cfg);
  double h[detail::kMaxHidden];
  double z[detail::kMaxOutputs];
  detail::logits(L, theta.data(), x.data(), h, z);
  return detail::predict_from_logits(L, z);
}

LossGrad loss_and_grad(const NetConfig& cfg, const ParamVector& theta, const LabeledBatch& batch,
                       const std::optional<ParamVector>& theta_prev, double lambda_s, double lambda_wd) {
  check_dims(cfg, theta);
  if (batch.size() == 0) throw std::invalid_argument("empty batch");
  auto task = kernels::omp::task_loss_grad(cfg, theta, batch);

  LossGrad out;
  out.task = task.loss;
  out.total = task.loss + 0.5 * lambda_wd * theta.squaredNorm();
  out.grad = std::move(task.grad);
  out.grad += lambda_wd * theta;
  if (theta_prev) {
    check_dims(cfg, *theta_prev);
    const Eigen::VectorXd d = theta - *theta_prev;
    out.total += lambda_s * d.squaredNorm();
    out.grad += 2.0 * lambda_s * d;
  }
  if (!std::isfinite(out.total) || !out.grad.allFinite()) {
    throw NumericalError("non-finite loss or gradient");
  }
  return out;
}

double accuracy(const NetConfig& cfg, const ParamVector& theta, const LabeledBatch& batch) {
  check_dims(cfg, theta);
  if (batch.size() == 0) throw std::invalid_argument("accuracy of an empty batch");
  return static_cast<double>(kernels::omp::count_correct(cfg, theta, batch)) / static_cast<double>(batch.size());
}

}  // namespace komet
