#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "komet/coupling.hpp"
#include "komet/model.hpp"

using namespace komet;

namespace {

using Vec = std::vector<double>;

Vec normal_series(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Vec v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// dCov^2 = S1 + S2 - 2 S3 (V-statistic form without double centring).
double dcov2(const Vec& x, const Vec& y) {
  const std::size_t n = x.size();
  double s1 = 0, ax = 0, ay = 0, s3 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double rx = 0, ry = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = std::abs(x[i] - x[j]), dy = std::abs(y[i] - y[j]);
      s1 += dx * dy;
      rx += dx;
      ry += dy;
    }
    ax += rx;
    ay += ry;
    s3 += (rx / n) * (ry / n);
  }
  const double nn = static_cast<double>(n) * n;
  return s1 / nn + (ax / nn) * (ay / nn) - 2.0 * s3 / n;
}

double naive_dcor(const Vec& x, const Vec& y) {
  const double vxy = dcov2(x, y), vx = dcov2(x, x), vy = dcov2(y, y);
  return std::sqrt(std::max(0.0, vxy / std::sqrt(vx * vy)));
}

// TE from dense joint histograms: sum p(y', y, x) log(p(y' | y, x) / p(y' | y)).
double brute_te(const std::vector<int>& x, const std::vector<int>& y, int b) {
  std::vector<double> pyyx(b * b * b, 0.0), pyx(b * b, 0.0), pyy(b * b, 0.0), py(b, 0.0);
  const double n = static_cast<double>(y.size() - 1);
  for (std::size_t t = 1; t < y.size(); ++t) {
    pyyx[(y[t] * b + y[t - 1]) * b + x[t - 1]] += 1 / n;
    pyx[y[t - 1] * b + x[t - 1]] += 1 / n;
    pyy[y[t] * b + y[t - 1]] += 1 / n;
    py[y[t - 1]] += 1 / n;
  }
  double te = 0.0;
  for (int yn = 0; yn < b; ++yn)
    for (int yp = 0; yp < b; ++yp)
      for (int xp = 0; xp < b; ++xp) {
        const double p = pyyx[(yn * b + yp) * b + xp];
        if (p > 0) te += p * std::log((p / pyx[yp * b + xp]) / (pyy[yn * b + yp] / py[yp]));
      }
  return te;
}

}  // namespace

TEST_SUITE("coupling") {

TEST_CASE("distance correlation matches the S1 + S2 - 2 S3 oracle") {
  for (int seed = 0; seed < 5; ++seed) {
    Vec x = normal_series(60, seed), y = normal_series(60, 100 + seed);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += 0.4 * seed * x[i] * x[i];
    CHECK(distance_correlation(x, y) == doctest::Approx(naive_dcor(x, y)).epsilon(1e-10));
  }
}

TEST_CASE("distance correlation: symmetry, range, self and affine invariance") {
  const Vec x = normal_series(80, 1), y = normal_series(80, 2);
  const double r = distance_correlation(x, y);
  CHECK(r == doctest::Approx(distance_correlation(y, x)));
  CHECK(r >= 0.0);
  CHECK(r <= 1.0);
  CHECK(distance_correlation(x, x) == doctest::Approx(1.0));
  Vec ax(x.size());
  std::transform(x.begin(), x.end(), ax.begin(), [](double v) { return -3.0 * v + 7.0; });
  CHECK(distance_correlation(x, ax) == doctest::Approx(1.0));
  const Vec c(80, 2.0);
  CHECK(distance_correlation(x, c) == 0.0);
}

TEST_CASE("distance correlation sees non-linear dependence and not a permutation") {
  Vec x(401);
  for (int i = 0; i < 401; ++i) x[i] = -1.0 + i / 200.0;
  Vec sq(x.size());
  std::transform(x.begin(), x.end(), sq.begin(), [](double v) { return v * v; });
  // Pearson correlation of x and x^2 on a symmetric grid is zero.
  CHECK(distance_correlation(x, sq) > 0.4);

  Vec shuffled = x;
  std::mt19937_64 rng(3);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(distance_correlation(x, shuffled) < 0.15);
}

TEST_CASE("quantile bins are balanced and keep ties together") {
  const Vec x = normal_series(800, 4);
  const auto b = quantile_bins(x, 8);
  std::vector<int> count(8, 0);
  for (int v : b) ++count[v];
  for (int c : count) CHECK(c == 100);
  // Monotone: larger value never gets a smaller bin.
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); j += 37)
      if (x[i] < x[j]) CHECK(b[i] <= b[j]);

  const auto ties = quantile_bins(Vec{1, 1, 1, 2, 2, 3, 3, 3}, 4);
  CHECK(ties == std::vector<int>{0, 0, 0, 1, 1, 2, 2, 2});
  const auto flat = quantile_bins(Vec(30, 5.0), 8);
  CHECK(std::all_of(flat.begin(), flat.end(), [](int v) { return v == 0; }));
}

TEST_CASE("transfer entropy matches the dense histogram oracle") {
  for (int seed = 0; seed < 4; ++seed) {
    const Vec x = normal_series(300, seed);
    Vec y = normal_series(300, 50 + seed);
    for (std::size_t t = 1; t < y.size(); ++t) y[t] += 0.8 * x[t - 1] + 0.3 * y[t - 1];
    const auto xb = quantile_bins(x, 6), yb = quantile_bins(y, 6);
    CHECK(transfer_entropy(x, y, 6) == doctest::Approx(std::max(0.0, brute_te(xb, yb, 6))).epsilon(1e-10));
    CHECK(transfer_entropy(y, x, 6) == doctest::Approx(std::max(0.0, brute_te(yb, xb, 6))).epsilon(1e-10));
  }
}

TEST_CASE("transfer entropy: independence null, lag-one copy and asymmetry") {
  const int n = 8000, bins = 4;
  const Vec x = normal_series(n, 5), z = normal_series(n, 6);
  // Plug-in bias is about bins^2 (bins - 1) / (2 n).
  CHECK(transfer_entropy(x, z, bins) < 0.01);

  Vec y(n);
  y[0] = 0.0;
  for (int t = 1; t < n; ++t) y[t] = x[t - 1];
  const double fwd = transfer_entropy(x, y, bins);
  const double back = transfer_entropy(y, x, bins);
  CHECK(fwd == doctest::Approx(std::log(bins)).epsilon(0.01));
  CHECK(back < 0.01);

  // Normalised by H(Y_t | Y_{t-1}) the copy carries all of it.
  const auto yb = quantile_bins(y, bins);
  CHECK(fwd / conditional_entropy_lag1(yb, bins) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("conditional entropy of a deterministic cycle is zero") {
  std::vector<int> cyc(200);
  for (int t = 0; t < 200; ++t) cyc[t] = t % 5;
  CHECK(conditional_entropy_lag1(cyc, 5) == doctest::Approx(0.0));
}

TEST_CASE("coupling report matrices and summaries") {
  const auto cfg = NetConfig::for_classes(2);
  const int n = cfg.n_params(), len = 120;
  Eigen::MatrixXd traj(n, len);
  for (int i = 0; i < n; ++i) {
    const Vec s = normal_series(len, 200 + i);
    double walk = 0;
    for (int t = 0; t < len; ++t) traj(i, t) = (walk += s[t]);
  }
  const auto r = coupling_report(traj, cfg, 8, 10);
  CHECK(r.t_begin == 10);
  CHECK(r.t_end == 130);
  CHECK((r.dcor - r.dcor.transpose()).norm() < 1e-14);
  CHECK(r.dcor.diagonal().isOnes());
  CHECK(r.te.minCoeff() >= 0.0);
  CHECK(r.te_norm.minCoeff() >= 0.0);
  CHECK(r.te_norm.maxCoeff() <= 1.0 + 1e-12);

  double sum = 0, above = 0, fwd = 0, back = 0;
  int nf = 0, nb = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      sum += r.dcor(i, j);
      if (i < j && r.dcor(i, j) > 0.5) ++above;
      if (i < 12 && j >= 12) fwd += r.te_norm(i, j), ++nf;
      if (i >= 12 && j < 12) back += r.te_norm(i, j), ++nb;
    }
  CHECK(r.dcor_mean_offdiag == doctest::Approx(sum / (n * (n - 1))));
  CHECK(r.dcor_frac_above_half == doctest::Approx(above / (n * (n - 1) / 2.0)));
  CHECK(r.te_ratio_l1_l2 == doctest::Approx((fwd / nf) / (back / nb)));
  CHECK_THROWS(coupling_report(traj.leftCols(49), cfg, 8));
}

}  // TEST_SUITE
