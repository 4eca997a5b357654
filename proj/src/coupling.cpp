#include "komet/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "komet/kernels.hpp"

namespace komet {

namespace {

double plugin_entropy(const std::unordered_map<long, int>& counts, double n) {
  double h = 0.0;
  for (const auto& [key, c] : counts) {
    const double p = c / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

double distance_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("distance_correlation: length mismatch");
  const auto n = static_cast<Eigen::Index>(x.size());
  if (n < 4) throw std::invalid_argument("distance_correlation: need at least 4 samples");

  auto centred = [n](std::span<const double> s) {
    Eigen::MatrixXd d(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) d(i, j) = std::abs(s[i] - s[j]);
    const Eigen::VectorXd row = d.rowwise().mean();
    const double grand = row.mean();
    d.colwise() -= row;
    d.rowwise() -= row.transpose();
    d.array() += grand;
    return d;
  };
  const Eigen::MatrixXd a = centred(x);
  const Eigen::MatrixXd b = centred(y);
  const double vxx = (a.array() * a.array()).mean();
  const double vyy = (b.array() * b.array()).mean();
  if (vxx <= 0.0 || vyy <= 0.0) return 0.0;
  const double vxy = (a.array() * b.array()).mean();
  const double r2 = vxy / std::sqrt(vxx * vyy);
  return std::sqrt(std::clamp(r2, 0.0, 1.0));
}

std::vector<int> quantile_bins(std::span<const double> x, int bins) {
  if (bins < 2) throw std::invalid_argument("quantile_bins: bins must be >= 2");
  const auto n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<int> out(n);
  std::size_t i = 0;
  while (i < n) {
    // Values tied with order[i] take the bin of the first rank in the run.
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    const int b = static_cast<int>((i * static_cast<std::size_t>(bins)) / n);
    for (std::size_t k = i; k < j; ++k) out[order[k]] = b;
    i = j;
  }
  return out;
}

double conditional_entropy_lag1(std::span<const int> y, int bins) {
  if (y.size() < 2) return 0.0;
  std::unordered_map<long, int> joint, past;
  for (std::size_t t = 1; t < y.size(); ++t) {
    ++joint[static_cast<long>(y[t]) * bins + y[t - 1]];
    ++past[y[t - 1]];
  }
  const double n = static_cast<double>(y.size() - 1);
  return plugin_entropy(joint, n) - plugin_entropy(past, n);
}

double transfer_entropy_binned(std::span<const int> x, std::span<const int> y, int bins) {
  if (x.size() != y.size()) throw std::invalid_argument("transfer_entropy: length mismatch");
  std::unordered_map<long, int> yy, yp, yyx, ypx;
  for (std::size_t t = 1; t < y.size(); ++t) {
    const long now = y[t], prev = y[t - 1], src = x[t - 1];
    ++yy[now * bins + prev];
    ++yp[prev];
    ++yyx[(now * bins + prev) * bins + src];
    ++ypx[prev * bins + src];
  }
  const double n = static_cast<double>(y.size() - 1);
  const double h_cond = plugin_entropy(yy, n) - plugin_entropy(yp, n);
  const double h_cond_x = plugin_entropy(yyx, n) - plugin_entropy(ypx, n);
  return std::max(0.0, h_cond - h_cond_x);
}

double transfer_entropy(std::span<const double> x, std::span<const double> y, int bins) {
  if (x.size() != y.size()) throw std::invalid_argument("transfer_entropy: length mismatch");
  if (x.size() < 20) throw std::invalid_argument("transfer_entropy: need at least 20 samples");
  const auto xb = quantile_bins(x, bins);
  const auto yb = quantile_bins(y, bins);
  return transfer_entropy_binned(xb, yb, bins);
}

void summarize(CouplingReport& r, const NetConfig& cfg) {
  const auto n = r.dcor.rows();
  double sum = 0.0;
  long above = 0, pairs = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      sum += r.dcor(i, j);
      if (i < j) {
        ++pairs;
        if (r.dcor(i, j) > 0.5) ++above;
      }
    }
  }
  r.dcor_mean_offdiag = pairs ? sum / static_cast<double>(n * (n - 1)) : 0.0;
  r.dcor_frac_above_half = pairs ? static_cast<double>(above) / static_cast<double>(pairs) : 0.0;

  double fwd = 0.0, back = 0.0;
  long nf = 0, nb = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const int li = layer_of(cfg, static_cast<int>(i));
      const int lj = layer_of(cfg, static_cast<int>(j));
      if (li == 1 && lj == 2) {
        fwd += r.te_norm(i, j);
        ++nf;
      } else if (li == 2 && lj == 1) {
        back += r.te_norm(i, j);
        ++nb;
      }
    }
  }
  const double mf = nf ? fwd / nf : 0.0;
  const double mb = nb ? back / nb : 0.0;
  r.te_ratio_l1_l2 = mb > 0.0 ? mf / mb : 0.0;
}

CouplingReport coupling_report(const Eigen::MatrixXd& trajectory, const NetConfig& cfg, int bins, int t_begin) {
  if (trajectory.rows() != cfg.n_params()) throw std::invalid_argument("coupling_report: trajectory/network mismatch");
  if (trajectory.cols() < 50) throw std::invalid_argument("coupling_report: window must span >= 50 timesteps");
  CouplingReport r;
  r.t_begin = t_begin;
  r.t_end = t_begin + static_cast<int>(trajectory.cols());
  r.bins = bins;
  r.dcor = kernels::omp::dcor_matrix(trajectory);
  r.te = kernels::omp::te_matrix(trajectory, bins);

  const auto n = trajectory.rows();
  r.te_norm = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::VectorXd row = trajectory.row(j).transpose();
    const auto yb = quantile_bins(std::span<const double>(row.data(), row.size()), bins);
    const double h = conditional_entropy_lag1(yb, bins);
    if (h > 0.0) r.te_norm.col(j) = r.te.col(j) / h;
  }
  summarize(r, cfg);
  return r;
}

}  // namespace komet
