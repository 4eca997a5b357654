#include <doctest.h>

#include <stdexcept>

#include "komet/eval.hpp"

using namespace komet;

TEST_SUITE("eval") {

TEST_CASE("series summary") {
  AccuracySeries s;
  s.accuracies = {1.0, 0.9, 0.85, 0.5, 0.95};
  s.summarize();
  CHECK(s.mean == doctest::Approx(0.84));
  CHECK(s.min == 0.5);
  CHECK(s.steps_below_90 == 2);  // 0.9 itself is not below
  AccuracySeries empty;
  empty.summarize();
  CHECK(empty.mean == 0.0);
}

TEST_CASE("frozen baseline repeats the last training column") {
  Eigen::MatrixXd w = Eigen::MatrixXd::Random(5, 8);
  const auto f = frozen_baseline(w, 4);
  REQUIRE(f.size() == 4);
  for (const auto& c : f) CHECK(c == w.col(7));
  CHECK_THROWS(frozen_baseline(Eigen::MatrixXd(5, 0), 3));
}

TEST_CASE("evaluation overloads agree on the test stream") {
  const auto spec = DriftSpec::defaults(DriftKind::E_subcluster_mog);
  const auto cfg = NetConfig::for_classes(3);
  std::vector<ParamVector> thetas;
  std::vector<LabeledBatch> batches;
  for (int k = 0; k < 6; ++k) {
    thetas.push_back(initial_params(cfg, spec.kind, k));
    batches.push_back(sample_timestep(spec, 20 + k, 150, 4, Stream::test));
  }
  const auto a = evaluate_weights(spec, cfg, thetas, 20, 4, EvalMode::frozen, 150);
  const auto b = evaluate_weights(cfg, thetas, batches, 20, EvalMode::frozen);
  CHECK(a.accuracies == b.accuracies);
  CHECK(a.t_begin == 20);
  CHECK(a.mode == EvalMode::frozen);
  for (int k = 0; k < 6; ++k) CHECK(a.accuracies[k] == accuracy(cfg, thetas[k], batches[k]));
  batches.pop_back();
  CHECK_THROWS(evaluate_weights(cfg, thetas, batches, 20, EvalMode::frozen));
}

TEST_CASE("with no drift, retraining matches the frozen model") {
  auto spec = DriftSpec::defaults(DriftKind::C_lissajous);
  spec.params["amp_x"] = 0.0;
  spec.params["amp_y"] = 0.0;
  const auto cfg = NetConfig::for_classes(2);
  auto tcfg = TrainConfig::defaults_for(cfg);
  tcfg.batch_size = 400;
  const auto train = run_sequence(spec, cfg, tcfg, 0, 40, 0);
  const auto retrain = retrained_baseline(spec, cfg, tcfg, train.final_state, 40, 70, 0);
  std::vector<ParamVector> rt;
  for (int k = 0; k < retrain.trajectory.steps(); ++k) rt.emplace_back(retrain.trajectory.matrix.col(k));
  const auto frozen = evaluate_weights(spec, cfg, frozen_baseline(train.trajectory.matrix, 30), 40, 0, EvalMode::frozen);
  const auto retrained = evaluate_weights(spec, cfg, rt, 40, 0, EvalMode::retrained);
  CHECK(frozen.mean > 0.95);
  CHECK(std::abs(frozen.mean - retrained.mean) < 0.01);
}

TEST_CASE("the batch-source retraining anchors on the carried state") {
  const auto spec = DriftSpec::defaults(DriftKind::A_sign_flip);
  const auto cfg = NetConfig::for_classes(2);
  auto tcfg = TrainConfig::defaults_for(cfg);
  tcfg.batch_size = 200;
  const auto head = run_sequence(spec, cfg, tcfg, 0, 5, 2);
  const auto direct = retrained_baseline(spec, cfg, tcfg, head.final_state, 5, 8, 2);
  const auto sourced = retrained_baseline(cfg, tcfg, head.final_state, 5, 8,
                                          [&](int t) { return sample_timestep(spec, t, 200, 2); });
  CHECK(direct.trajectory.matrix == sourced.trajectory.matrix);
}

TEST_CASE("report assembly") {
  const auto cfg = NetConfig::for_classes(2);
  WeightTrajectory tr, re;
  tr.matrix = Eigen::MatrixXd::Random(cfg.n_params(), 4);
  tr.epochs = {100, 60, 80, 60};
  tr.accuracies = {0.9, 1.0, 1.0, 0.98};
  re.matrix = Eigen::MatrixXd::Random(cfg.n_params(), 2);
  re.epochs = {500, 500};
  re.accuracies = {0.96, 0.8};
  KoopmanModel m;
  m.basis.explained_variance = Eigen::Vector2d(3.0, 1.0);
  m.basis.components = Eigen::MatrixXd::Zero(2, cfg.n_params());
  m.basis.total_variance = 4.0;
  m.scaler.mean = Eigen::VectorXd::Zero(cfg.n_params());
  m.rho_pre = 1.0;
  AccuracySeries auto_s, frozen, retrained;
  auto_s.accuracies = {0.9, 0.8};
  auto_s.summarize();
  retrained.accuracies = {1.0, 0.9};
  retrained.summarize();

  ReportInputs in;
  in.dataset = "B";
  in.training = &tr;
  in.retraining = &re;
  in.mean_epochs_cold = 90.0;
  in.model = &m;
  in.net = &cfg;
  in.koopman_auto = &auto_s;
  in.frozen = &frozen;
  in.retrained = &retrained;
  in.coupling_note = "skipped";
  const auto r = build_report(in);
  CHECK(r.training.mean_train_acc == doctest::Approx((0.9 + 1 + 1 + 0.98 + 0.96 + 0.8) / 6));
  CHECK(r.training.min_train_acc == 0.8);
  CHECK(r.training.mean_epochs_warm == doctest::Approx(75.0));
  CHECK(r.training.mean_epochs_cold == 90.0);
  CHECK(r.koopman.latent_dim == 2);
  CHECK(r.koopman.n_params == 17);
  CHECK(r.koopman.explained_ratio == doctest::Approx(1.0));
  CHECK(r.gap_to_retrained() == doctest::Approx(0.1));
  CHECK_FALSE(r.coupling.has_value());
  CHECK(r.coupling_note == "skipped");

  in.model = nullptr;
  CHECK_THROWS_AS(build_report(in), std::invalid_argument);
}

}  // TEST_SUITE
