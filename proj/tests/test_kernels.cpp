#include <doctest.h>

#include <random>

#include "komet/datasets.hpp"
#include "komet/kernels.hpp"
#include "komet/model.hpp"

using namespace komet;

namespace {

Eigen::MatrixXd random_series(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    double walk = 0.0;
    for (int t = 0; t < cols; ++t) m(i, t) = (walk += n(rng));
  }
  return m;
}

struct ThreadGuard {
  ~ThreadGuard() { kernels::set_threads(0); }
};

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("loss/gradient: OpenMP matches the serial reference") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto kind : {DriftKind::A_sign_flip, DriftKind::E_subcluster_mog}) {
    const auto spec = DriftSpec::defaults(kind);
    const auto cfg = NetConfig::for_classes(spec.n_classes);
    // Sizes below, at and across chunk boundaries.
    for (int n : {1, 199, 200, 201, 1600, 1777}) {
      const auto batch = sample_timestep(spec, 3, n, 11);
      ParamVector t(cfg.n_params());
      for (auto& v : t) v = u(rng);
      const auto a = kernels::serial::task_loss_grad(cfg, t, batch);
      const auto b = kernels::omp::task_loss_grad(cfg, t, batch);
      CHECK(b.loss == doctest::Approx(a.loss).epsilon(1e-13));
      CHECK((a.grad - b.grad).norm() <= 1e-13 * std::max(1.0, a.grad.norm()));
      CHECK(kernels::serial::count_correct(cfg, t, batch) == kernels::omp::count_correct(cfg, t, batch));
    }
  }
}

TEST_CASE("dependence matrices: OpenMP matches the serial reference") {
  const auto s = random_series(9, 120, 3);
  const auto d0 = kernels::serial::dcor_matrix(s);
  const auto d1 = kernels::omp::dcor_matrix(s);
  CHECK((d0 - d1).cwiseAbs().maxCoeff() < 1e-14);
  const auto t0 = kernels::serial::te_matrix(s, 8);
  const auto t1 = kernels::omp::te_matrix(s, 8);
  CHECK((t0 - t1).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(t0.diagonal().isZero());
}

TEST_CASE("results do not depend on the thread count") {
  ThreadGuard guard;
  const auto spec = DriftSpec::defaults(DriftKind::D_orbit_mog);
  const auto cfg = NetConfig::for_classes(3);
  const auto batch = sample_timestep(spec, 40, 1600, 2);
  const ParamVector t = ParamVector::LinSpaced(cfg.n_params(), -1.0, 1.0);
  const auto s = random_series(12, 200, 5);

  kernels::set_threads(1);
  const auto g1 = kernels::omp::task_loss_grad(cfg, t, batch);
  const auto d1 = kernels::omp::dcor_matrix(s);
  const auto e1 = kernels::omp::te_matrix(s, 8);
  for (int threads : {2, 3, 8}) {
    kernels::set_threads(threads);
    const auto g = kernels::omp::task_loss_grad(cfg, t, batch);
    CHECK(g.loss == g1.loss);
    CHECK(g.grad == g1.grad);
    CHECK(kernels::omp::dcor_matrix(s) == d1);
    CHECK(kernels::omp::te_matrix(s, 8) == e1);
  }
}

}  // TEST_SUITE
