#include "komet/kernels.hpp"

#include <cmath>
#include <span>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "komet/coupling.hpp"
#include "net_kernel.hpp"

namespace komet::kernels {

namespace {

std::span<const double> row_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// ---------------------------------------------------------------- serial

namespace serial {

TaskLossGrad task_loss_grad(const NetConfig& cfg, const ParamVector& theta, const LabeledBatch& batch) {
  const detail::Layout L(cfg);
  TaskLossGrad out;
  out.grad = Eigen::VectorXd::Zero(theta.size());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    const double x[2] = {batch.inputs(i, 0), batch.inputs(i, 1)};
    loss += detail::accumulate_sample(L, theta.data(), x, batch.labels(i), out.grad.data());
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss = loss * inv;
  out.grad *= inv;
  return out;
}

int count_correct(const NetConfig& cfg, const ParamVector& theta, const LabeledBatch& batch) {
  const detail::Layout L(cfg);
  double h[detail::kMaxHidden];
  double z[detail::kMaxOutputs];
  int correct = 0;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    const double x[2] = {batch.inputs(i, 0), batch.inputs(i, 1)};
    detail::logits(L, theta.data(), x, h, z);
    if (detail::predict_from_logits(L, z) == batch.labels(i)) ++correct;
  }
  return correct;
}

Eigen::MatrixXd dcor_matrix(const SeriesMatrix& series) {
  const auto n = series.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd xi = series.row(i).transpose();
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Eigen::VectorXd xj = series.row(j).transpose();
      out(i, j) = out(j, i) = distance_correlation(row_span(xi), row_span(xj));
    }
  }
  return out;
}

Eigen::MatrixXd te_matrix(const SeriesMatrix& series, int bins) {
  const auto n = series.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd src = series.row(i).transpose();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const Eigen::VectorXd dst = series.row(j).transpose();
      out(i, j) = transfer_entropy(row_span(src), row_span(dst), bins);
    }
  }
  return out;
}

}  // namespace serial

// ---------------------------------------------------------------- OpenMP

namespace omp {

TaskLossGrad task_loss_grad(const NetConfig& cfg, const ParamVector& theta, const LabeledBatch& batch) {
  const detail::Layout L(cfg);
  const Eigen::Index n = batch.size();
  const Eigen::Index chunks = (n + kChunk - 1) / kChunk;
  const auto np = theta.size();
  Eigen::MatrixXd grads = Eigen::MatrixXd::Zero(np, chunks);
  Eigen::VectorXd losses = Eigen::VectorXd::Zero(chunks);

#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index end = std::min(n, (c + 1) * kChunk);
    double* g = grads.col(c).data();
    double loss = 0.0;
    for (Eigen::Index i = c * kChunk; i < end; ++i) {
      const double x[2] = {batch.inputs(i, 0), batch.inputs(i, 1)};
      loss += detail::accumulate_sample(L, theta.data(), x, batch.labels(i), g);
    }
    losses[c] = loss;
  }

  // Ordered combine keeps the result independent of the thread count.
  TaskLossGrad out;
  out.grad = Eigen::VectorXd::Zero(np);
  double loss = 0.0;
  for (Eigen::Index c = 0; c < chunks; ++c) {
    out.grad += grads.col(c);
    loss += losses[c];
  }
  const double inv = 1.0 / static_cast<double>(n);
  out.loss = loss * inv;
  out.grad *= inv;
  return out;
}

int count_correct(const NetConfig& cfg, const ParamVector& theta, const LabeledBatch& batch) {
  const detail::Layout L(cfg);
  const Eigen::Index n = batch.size();
  int correct = 0;
#pragma omp parallel for schedule(static) reduction(+ : correct)
  for (Eigen::Index i = 0; i < n; ++i) {
    double h[detail::kMaxHidden];
    double z[detail::kMaxOutputs];
    const double x[2] = {batch.inputs(i, 0), batch.inputs(i, 1)};
    detail::logits(L, theta.data(), x, h, z);
    if (detail::predict_from_logits(L, z) == batch.labels(i)) ++correct;
  }
  return correct;
}

Eigen::MatrixXd dcor_matrix(const SeriesMatrix& series) {
  const auto n = series.rows();
  const auto len = series.cols();

  // Doubly-centred distance matrix of every series, computed once.
  std::vector<Eigen::MatrixXd> centred(n);
  std::vector<double> dvar(n);
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::MatrixXd d(len, len);
    for (Eigen::Index i = 0; i < len; ++i)
      for (Eigen::Index j = 0; j < len; ++j) d(i, j) = std::abs(series(k, i) - series(k, j));
    const Eigen::VectorXd row = d.rowwise().mean();
    const double grand = row.mean();
    d.colwise() -= row;
    d.rowwise() -= row.transpose();
    d.array() += grand;
    dvar[k] = (d.array() * d.array()).mean();
    centred[k] = std::move(d);
  }

  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(n, n);
  const auto np = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t p = 0; p < np; ++p) {
    const auto [i, j] = pairs[p];
    double r = 0.0;
    if (dvar[i] > 0.0 && dvar[j] > 0.0) {
      const double vxy = (centred[i].array() * centred[j].array()).mean();
      r = std::sqrt(std::clamp(vxy / std::sqrt(dvar[i] * dvar[j]), 0.0, 1.0));
    }
    out(i, j) = out(j, i) = r;
  }
  return out;
}

Eigen::MatrixXd te_matrix(const SeriesMatrix& series, int bins) {
  const auto n = series.rows();
  std::vector<std::vector<int>> binned(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::VectorXd row = series.row(k).transpose();
    binned[k] = quantile_bins(row_span(row), bins);
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) out(i, j) = transfer_entropy_binned(binned[i], binned[j], bins);
    }
  }
  return out;
}

}  // namespace omp

}  // namespace komet::kernels
