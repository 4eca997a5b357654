#include <doctest.h>

#include <cmath>
#include <random>

#include "komet/datasets.hpp"
#include "komet/error.hpp"
#include "komet/model.hpp"

using namespace komet;

namespace {

// Matrix-form reference, written independently of the flat kernel.
Eigen::VectorXd reference_forward(const NetConfig& cfg, const ParamVector& theta, const Eigen::Vector2d& x) {
  const NetParams p = unflatten(cfg, theta);
  const Eigen::VectorXd h = (1.0 + (-(p.w1 * x + p.b1).array()).exp()).inverse().matrix();
  const Eigen::VectorXd z = p.w2 * h + p.b2;
  if (cfg.head == Head::sigmoid_bce) return Eigen::VectorXd::Constant(1, 1.0 / (1.0 + std::exp(-z[0])));
  Eigen::VectorXd e = z.array().exp();
  return e / e.sum();
}

double reference_total(const NetConfig& cfg, const ParamVector& theta, const LabeledBatch& batch,
                       const std::optional<ParamVector>& prev, double ls, double lwd) {
  double task = 0.0;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    const Eigen::VectorXd p = reference_forward(cfg, theta, batch.inputs.row(i).transpose());
    const int y = batch.labels[i];
    task -= cfg.head == Head::sigmoid_bce ? (y == 1 ? std::log(p[0]) : std::log(1.0 - p[0])) : std::log(p[y]);
  }
  task /= static_cast<double>(batch.size());
  double reg = 0.5 * lwd * theta.squaredNorm();
  if (prev) reg += ls * (theta - *prev).squaredNorm();
  return task + reg;
}

ParamVector random_theta(const NetConfig& cfg, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  ParamVector t(cfg.n_params());
  for (auto& v : t) v = n(rng);
  return t;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("parameter counts and canonical names") {
  const auto bin = NetConfig::for_classes(2);
  const auto tri = NetConfig::for_classes(3);
  CHECK(bin.head == Head::sigmoid_bce);
  CHECK(tri.head == Head::softmax_ce);
  CHECK(bin.n_params() == 17);
  CHECK(tri.n_params() == 27);
  const auto names = param_names(tri);
  REQUIRE(names.size() == 27);
  CHECK(names.front() == "l1w0");
  CHECK(names[7] == "l1w7");
  CHECK(names[8] == "l1b0");
  CHECK(names[11] == "l1b3");
  CHECK(names[12] == "l2w0");
  CHECK(names[24] == "l2b0");
  CHECK(names.back() == "l2b2");
  CHECK(layer_of(tri, 11) == 1);
  CHECK(layer_of(tri, 12) == 2);
  CHECK(param_names(bin)[16] == "l2b0");
}

TEST_CASE("flatten and unflatten are inverse") {
  std::mt19937_64 rng(1);
  for (int k : {2, 3}) {
    const auto cfg = NetConfig::for_classes(k);
    const ParamVector t = random_theta(cfg, rng, 1.0);
    CHECK(flatten(cfg, unflatten(cfg, t)) == t);
    const NetParams p = unflatten(cfg, t);
    // Row-major W1: entry (j, i) at j * input_dim + i.
    CHECK(p.w1(1, 0) == t[2]);
    CHECK(p.w1(3, 1) == t[7]);
    CHECK(p.b1[0] == t[8]);
  }
  CHECK_THROWS_AS(unflatten(NetConfig::for_classes(2), ParamVector::Zero(5)), std::invalid_argument);
}

TEST_CASE("forward matches the matrix-form reference") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int k : {2, 3}) {
    const auto cfg = NetConfig::for_classes(k);
    for (int draw = 0; draw < 50; ++draw) {
      const ParamVector t = random_theta(cfg, rng, 1.5);
      const Eigen::Vector2d x(n(rng), n(rng));
      const Eigen::VectorXd a = forward(cfg, t, x);
      const Eigen::VectorXd b = reference_forward(cfg, t, x);
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-13);
      int expected = 0;
      if (k == 2) {
        expected = b[0] > 0.5 ? 1 : 0;
      } else {
        b.maxCoeff(&expected);
      }
      CHECK(predict(cfg, t, x) == expected);
    }
  }
}

TEST_CASE("loss matches the reference including both regularizers") {
  std::mt19937_64 rng(3);
  for (auto kind : {DriftKind::C_lissajous, DriftKind::E_subcluster_mog}) {
    const auto spec = DriftSpec::defaults(kind);
    const auto cfg = NetConfig::for_classes(spec.n_classes);
    const auto batch = sample_timestep(spec, 17, 64, 5);
    const ParamVector t = random_theta(cfg, rng, 1.0);
    const ParamVector prev = random_theta(cfg, rng, 1.0);
    const auto lg = loss_and_grad(cfg, t, batch, prev, 0.3, 0.2);
    CHECK(lg.total == doctest::Approx(reference_total(cfg, t, batch, prev, 0.3, 0.2)).epsilon(1e-12));
    CHECK(lg.task == doctest::Approx(reference_total(cfg, t, batch, std::nullopt, 0.0, 0.0)).epsilon(1e-12));
    // No smoothness term without a previous theta.
    const auto first = loss_and_grad(cfg, t, batch, std::nullopt, 0.3, 0.2);
    CHECK(first.total == doctest::Approx(reference_total(cfg, t, batch, std::nullopt, 0.0, 0.2)).epsilon(1e-12));
  }
}

TEST_CASE("analytic gradient agrees with central differences on 100 draws") {
  std::mt19937_64 rng(4);
  int worst_draw = -1;
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const int k = draw % 2 == 0 ? 2 : 3;
    const auto spec = DriftSpec::defaults(k == 2 ? DriftKind::B_osc_sep : DriftKind::D_orbit_mog);
    const auto cfg = NetConfig::for_classes(k);
    const auto batch = sample_timestep(spec, draw, 32, 100 + draw);
    const ParamVector t = random_theta(cfg, rng, 1.0);
    const std::optional<ParamVector> prev =
        draw % 3 == 0 ? std::nullopt : std::optional<ParamVector>(random_theta(cfg, rng, 1.0));
    const double ls = 0.05, lwd = 0.01;
    const auto lg = loss_and_grad(cfg, t, batch, prev, ls, lwd);
    Eigen::VectorXd fd(t.size());
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      ParamVector up = t, dn = t;
      up[i] += h;
      dn[i] -= h;
      fd[i] = (reference_total(cfg, up, batch, prev, ls, lwd) - reference_total(cfg, dn, batch, prev, ls, lwd)) /
              (2.0 * h);
    }
    const double rel = (lg.grad - fd).norm() / std::max(1e-12, fd.norm());
    if (rel > worst) worst = rel, worst_draw = draw;
  }
  INFO("worst draw " << worst_draw);
  CHECK(worst < 1e-5);
}

TEST_CASE("accuracy counts correct predictions") {
  const auto spec = DriftSpec::defaults(DriftKind::D_orbit_mog);
  const auto cfg = NetConfig::for_classes(3);
  const auto batch = sample_timestep(spec, 0, 300, 9);
  std::mt19937_64 rng(5);
  const ParamVector t = random_theta(cfg, rng, 1.0);
  int correct = 0;
  for (Eigen::Index i = 0; i < batch.size(); ++i)
    correct += predict(cfg, t, batch.inputs.row(i).transpose()) == batch.labels[i];
  CHECK(accuracy(cfg, t, batch) == doctest::Approx(correct / 300.0));
}

TEST_CASE("non-finite parameters raise a numerical error") {
  const auto cfg = NetConfig::for_classes(2);
  const auto batch = sample_timestep(DriftSpec::defaults(DriftKind::A_sign_flip), 0, 8, 0);
  ParamVector t = ParamVector::Zero(cfg.n_params());
  t[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(loss_and_grad(cfg, t, batch, std::nullopt, 0.0, 0.0), NumericalError);
}

}  // TEST_SUITE
