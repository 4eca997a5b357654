// Serial reference vs OpenMP kernels on pipeline-sized inputs:
// a 1600-sample batch for the loss gradient and a 27 x 300 trajectory for
// the dependence matrices.

#include <random>

#include <benchmark/benchmark.h>

#include "komet/datasets.hpp"
#include "komet/kernels.hpp"
#include "komet/model.hpp"

namespace {

using namespace komet;

struct LossInputs {
  NetConfig cfg = NetConfig::for_classes(3);
  ParamVector theta = ParamVector::LinSpaced(27, -0.5, 0.5);
  LabeledBatch batch = sample_timestep(DriftSpec::defaults(DriftKind::D_orbit_mog), 10, 1600, 0);
};

Eigen::MatrixXd trajectory() {
  std::mt19937_64 rng(0);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(27, 300);
  for (int i = 0; i < 27; ++i) {
    double walk = 0.0;
    for (int t = 0; t < 300; ++t) m(i, t) = (walk += n(rng));
  }
  return m;
}

void BM_loss_grad_serial(benchmark::State& state) {
  const LossInputs in;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::task_loss_grad(in.cfg, in.theta, in.batch));
}

void BM_loss_grad_omp(benchmark::State& state) {
  const LossInputs in;
  kernels::set_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::omp::task_loss_grad(in.cfg, in.theta, in.batch));
  kernels::set_threads(0);
}

void BM_dcor_serial(benchmark::State& state) {
  const auto s = trajectory();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::dcor_matrix(s));
}

void BM_dcor_omp(benchmark::State& state) {
  const auto s = trajectory();
  kernels::set_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::omp::dcor_matrix(s));
  kernels::set_threads(0);
}

void BM_te_serial(benchmark::State& state) {
  const auto s = trajectory();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::te_matrix(s, 8));
}

void BM_te_omp(benchmark::State& state) {
  const auto s = trajectory();
  kernels::set_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::omp::te_matrix(s, 8));
  kernels::set_threads(0);
}

}  // namespace

BENCHMARK(BM_loss_grad_serial);
BENCHMARK(BM_loss_grad_omp)->Arg(1)->Arg(2)->Arg(4)->Arg(8);
BENCHMARK(BM_dcor_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_dcor_omp)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_te_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_te_omp)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
