#include "komet/pipeline.hpp"

#include <chrono>
#include <cstdio>

#include "komet/coupling.hpp"
#include "komet/error.hpp"
#include "komet/io.hpp"
#include "komet/kernels.hpp"
#include "komet/koopman.hpp"
#include "komet/svg.hpp"
#include "komet/trainer.hpp"

namespace komet {

namespace fs = std::filesystem;

namespace {

constexpr const char* kCouplingRefusal =
    "coupling analysis refused for dataset F: its training window is non-periodic, which invalidates the "
    "stationarity assumption of the dCor/TE estimators (pass --force to compute it anyway)";

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fixed(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

void prepare(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.jobs > 0) kernels::set_threads(cfg.jobs);
}

void require_hash(const std::string& found, const std::string& expected, const fs::path& file, const char* producer) {
  if (found != expected) {
    throw MissingArtifactError("stale upstream artifact '" + file.string() + "': config hash " + found +
                               " does not match " + expected + " for the current config (re-run `komet " + producer +
                               "`)");
  }
}

Json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    Json j = Json::parse(text);
    if (!j.contains("schema_version") || j["schema_version"] != kSchemaVersion) {
      throw MissingArtifactError("unsupported schema version in '" + path.string() + "'");
    }
    return j;
  } catch (const Json::exception& e) {
    throw MissingArtifactError("corrupt artifact '" + path.string() + "': " + e.what());
  }
}

Json header(const char* kind, const std::string& hash, const RunConfig& cfg) {
  return Json{{"schema_version", kSchemaVersion},
              {"kind", kind},
              {"config_hash", hash},
              {"dataset", std::string(kind_letter(cfg.dataset.kind))},
              {"seed", cfg.seed}};
}

std::vector<LabeledBatch> load_batches(const fs::path& path, const RunConfig& cfg) {
  std::string hash;
  auto batches = parse_batches_csv(read_file(path), cfg.dataset.n_classes, &hash);
  require_hash(hash, config_hash(cfg, Stage::data), path, "generate");
  return batches;
}

// Training batches indexed by t over the whole stream.
std::vector<LabeledBatch> load_train_batches(const fs::path& dir, const RunConfig& cfg) {
  const fs::path path = dir / "data_train.csv";
  auto batches = load_batches(path, cfg);
  if (static_cast<int>(batches.size()) != cfg.dataset.total_steps) {
    throw MissingArtifactError("'" + path.string() + "' does not cover every timestep");
  }
  for (int t = 0; t < cfg.dataset.total_steps; ++t) {
    if (batches[static_cast<std::size_t>(t)].timestep != t) throw MissingArtifactError("'" + path.string() + "' has a gap");
  }
  return batches;
}

struct TrainArtifacts {
  WeightTrajectory trajectory;
  TrainerState final_state;
  std::optional<double> mean_epochs_cold;
};

TrainArtifacts load_training(const fs::path& dir, const RunConfig& cfg) {
  const auto expected = config_hash(cfg, Stage::train);
  const fs::path csv = dir / "trajectory.csv";
  const fs::path side = dir / "trajectory.json";
  const CsvTable table = read_csv(csv);
  require_hash(table.config_hash, expected, csv, "train");
  const Json j = read_json(side);
  require_hash(j.at("config_hash").get<std::string>(), expected, side, "train");

  TrainArtifacts a;
  const NetConfig net = cfg.net();
  a.trajectory.matrix = weights_from_table(table, param_names(net), &a.trajectory.t_begin);
  a.trajectory.epochs = j.at("epochs").get<std::vector<int>>();
  a.trajectory.accuracies = j.at("accuracies").get<std::vector<double>>();
  a.final_state = trainer_state_from_json(j.at("final_state"));
  if (!j.at("mean_epochs_cold").is_null()) a.mean_epochs_cold = j["mean_epochs_cold"].get<double>();
  if (a.trajectory.steps() != cfg.t_train || a.trajectory.epochs.size() != static_cast<std::size_t>(cfg.t_train)) {
    throw MissingArtifactError("training artifacts do not cover the configured window");
  }
  return a;
}

KoopmanModel load_model(const fs::path& dir, const RunConfig& cfg) {
  const fs::path path = dir / "koopman.json";
  const Json j = read_json(path);
  require_hash(j.at("config_hash").get<std::string>(), config_hash(cfg, Stage::fit), path, "fit");
  return koopman_from_json(j.at("model"));
}

std::vector<int> block_separators(const NetConfig& net) {
  const int w1 = net.hidden * net.input_dim;
  const int l1 = net.layer1_size();
  return {w1, l1, l1 + net.n_outputs() * net.hidden};
}

}  // namespace

fs::path output_dir(const RunConfig& cfg) { return cfg.out_dir.empty() ? fs::path(default_out_dir(cfg)) : fs::path(cfg.out_dir); }

void cmd_generate(const RunConfig& cfg, std::ostream& log) {
  prepare(cfg);
  Timer timer;
  const fs::path dir = output_dir(cfg);
  const auto hash = config_hash(cfg, Stage::data);
  const DriftSpec& spec = cfg.dataset;

  std::vector<LabeledBatch> train(static_cast<std::size_t>(spec.total_steps));
  std::vector<LabeledBatch> test(static_cast<std::size_t>(cfg.horizon()));
#pragma omp parallel for schedule(static)
  for (int t = 0; t < spec.total_steps; ++t) {
    train[static_cast<std::size_t>(t)] = sample_timestep(spec, t, cfg.train.batch_size, cfg.seed, Stream::train);
    if (t >= cfg.t_train) {
      test[static_cast<std::size_t>(t - cfg.t_train)] = sample_timestep(spec, t, cfg.test_samples, cfg.seed, Stream::test);
    }
  }

  const std::string train_csv = batches_csv(train, hash);
  const std::string test_csv = batches_csv(test, hash);
  atomic_write(dir / "data_train.csv", train_csv);
  atomic_write(dir / "data_test.csv", test_csv);

  Json m = header("manifest", hash, cfg);
  m["streams"] = {
      {"train",
       {{"file", "data_train.csv"}, {"t_begin", 0}, {"t_end", spec.total_steps}, {"samples_per_step", cfg.train.batch_size},
        {"rows", static_cast<long long>(spec.total_steps) * cfg.train.batch_size}, {"fnv1a", fnv1a_hex(train_csv)}}},
      {"test",
       {{"file", "data_test.csv"}, {"t_begin", cfg.t_train}, {"t_end", spec.total_steps}, {"samples_per_step", cfg.test_samples},
        {"rows", static_cast<long long>(cfg.horizon()) * cfg.test_samples}, {"fnv1a", fnv1a_hex(test_csv)}}}};
  atomic_write(dir / "manifest.json", dump(m));
  atomic_write(dir / "config.txt", "# config_hash=" + config_hash(cfg, Stage::report) + "\n" + cfg.to_text());
  log << "generate: dataset " << kind_letter(spec.kind) << " seed " << cfg.seed << ", " << spec.total_steps << " x "
      << cfg.train.batch_size << " train rows, " << cfg.horizon() << " x " << cfg.test_samples << " test rows -> "
      << dir.string() << " (" << fixed(timer.seconds(), 1) << " s)\n";
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
  prepare(cfg);
  Timer timer;
  const fs::path dir = output_dir(cfg);
  const auto batches = load_train_batches(dir, cfg);
  const NetConfig net = cfg.net();
  const BatchSource source = [&](int t) { return batches[static_cast<std::size_t>(t)]; };

  TrainerState init = TrainerState::zeros(net.n_params());
  init.theta = initial_params(net, cfg.dataset.kind, cfg.seed);
  const SequenceResult warm = run_sequence(net, cfg.train, 0, cfg.t_train, source, init, std::nullopt);

  std::optional<double> cold_epochs;
  if (cfg.cold_ablation && !cfg.train.carry_moments) {
    cold_epochs = warm.trajectory.mean_epochs();
  } else if (cfg.cold_ablation) {
    TrainConfig cold = cfg.train;
    cold.carry_moments = false;
    cold_epochs = run_sequence(net, cold, 0, cfg.t_train, source, init, std::nullopt).trajectory.mean_epochs();
  }

  const auto hash = config_hash(cfg, Stage::train);
  const auto& traj = warm.trajectory;
  atomic_write(dir / "trajectory.csv", to_csv(weights_table(traj.matrix, param_names(net), traj.t_begin, hash)));
  Json j = header("trajectory", hash, cfg);
  j["t_begin"] = traj.t_begin;
  j["t_end"] = traj.t_begin + traj.steps();
  j["epochs"] = traj.epochs;
  j["accuracies"] = traj.accuracies;
  j["mean_epochs"] = traj.mean_epochs();
  j["mean_epochs_cold"] = cold_epochs ? Json(*cold_epochs) : Json(nullptr);
  j["final_state"] = to_json(warm.final_state);
  atomic_write(dir / "trajectory.json", dump(j));

  log << "train: " << traj.steps() << " steps, mean epochs " << fixed(traj.mean_epochs(), 1);
  if (cold_epochs) log << " (moments reset: " << fixed(*cold_epochs, 1) << ")";
  log << ", train acc mean " << fixed(traj.mean_accuracy()) << " min " << fixed(traj.min_accuracy()) << " ("
      << fixed(timer.seconds(), 1) << " s)\n";
}

void cmd_fit(const RunConfig& cfg, std::ostream& log) {
  prepare(cfg);
  const fs::path dir = output_dir(cfg);
  const fs::path csv = dir / "trajectory.csv";
  const CsvTable table = read_csv(csv);
  const auto train_hash = config_hash(cfg, Stage::train);
  require_hash(table.config_hash, train_hash, csv, "train");
  int t_begin = 0;
  const Eigen::MatrixXd w = weights_from_table(table, param_names(cfg.net()), &t_begin);

  const KoopmanModel model = fit_koopman(w, cfg.koopman_options(), t_begin);
  const auto hash = config_hash(cfg, Stage::fit);
  Json j = header("koopman_model", hash, cfg);
  j["source_config_hash"] = train_hash;
  j["model"] = to_json(model);
  atomic_write(dir / "koopman.json", dump(j));
  atomic_write(dir / "eigenvalues.csv", to_csv(eigenvalue_table(model.eigenvalues, hash)));

  log << "fit: strategy " << to_string(model.strategy) << ", p = " << model.basis.dim() << " of " << w.rows()
      << " (explained " << fixed(model.basis.explained_ratio()) << "), rho pre " << fixed(model.rho_pre) << " post "
      << fixed(model.rho_post) << " latent " << fixed(model.rho_latent) << "\n";
  if (model.rho_pre > 1.01) {
    log << "warning: pre-enforcement spectral radius " << fixed(model.rho_pre)
        << " > 1; the rollout relies on the projected operator\n";
  }
  if (cfg.dataset.kind == DriftKind::F_expanding && model.strategy == Strategy::fourier) {
    log << "warning: dataset F drifts monotonically and the fourier strategy assumes a periodic trajectory "
           "(pre-enforcement rho "
        << fixed(model.rho_pre) << ", latent block " << fixed(model.rho_latent) << "); consider detrend_fourier\n";
  }
}

void cmd_rollout(const RunConfig& cfg, std::ostream& log) {
  prepare(cfg);
  Timer timer;
  const fs::path dir = output_dir(cfg);
  const NetConfig net = cfg.net();
  const KoopmanModel model = load_model(dir, cfg);
  const TrainArtifacts train = load_training(dir, cfg);
  const auto batches = load_train_batches(dir, cfg);
  const auto test = load_batches(dir / "data_test.csv", cfg);
  const int h = cfg.horizon();
  if (static_cast<int>(test.size()) != h || test.front().timestep != cfg.t_train) {
    throw MissingArtifactError("'" + (dir / "data_test.csv").string() + "' does not cover the rollout window");
  }
  if (model.t_last != cfg.t_train - 1) throw MissingArtifactError("Koopman model was fitted on a different window");

  const auto predicted = predict_weights(model, h, cfg.rollout_mode);
  for (const auto& theta : predicted) {
    if (!theta.allFinite()) throw NumericalError("Koopman rollout produced non-finite weights");
  }
  const auto frozen = frozen_baseline(train.trajectory.matrix, h);
  const BatchSource source = [&](int t) { return batches[static_cast<std::size_t>(t)]; };
  const SequenceResult retrained =
      retrained_baseline(net, cfg.train, train.final_state, cfg.t_train, cfg.dataset.total_steps, source);
  std::vector<ParamVector> retrained_cols;
  for (int k = 0; k < h; ++k) retrained_cols.push_back(retrained.trajectory.matrix.col(k));

  const auto a = evaluate_weights(net, predicted, test, cfg.t_train, EvalMode::koopman_auto);
  const auto f = evaluate_weights(net, frozen, test, cfg.t_train, EvalMode::frozen);
  const auto r = evaluate_weights(net, retrained_cols, test, cfg.t_train, EvalMode::retrained);

  const auto hash = config_hash(cfg, Stage::rollout);
  const auto names = param_names(net);
  Eigen::MatrixXd pred(net.n_params(), h);
  for (int k = 0; k < h; ++k) pred.col(k) = predicted[static_cast<std::size_t>(k)];
  atomic_write(dir / "predicted_weights.csv", to_csv(weights_table(pred, names, cfg.t_train, hash)));
  atomic_write(dir / "retrained_weights.csv",
               to_csv(weights_table(retrained.trajectory.matrix, names, cfg.t_train, hash)));

  CsvTable traces;
  traces.config_hash = hash;
  traces.header = {"t", "koopman", "frozen", "retrained"};
  for (int k = 0; k < h; ++k) {
    const auto i = static_cast<std::size_t>(k);
    traces.rows.push_back({std::to_string(cfg.t_train + k), format_double(a.accuracies[i]), format_double(f.accuracies[i]),
                           format_double(r.accuracies[i])});
  }
  atomic_write(dir / "accuracy_traces.csv", to_csv(traces));

  Json j = header("rollout", hash, cfg);
  j["rollout_mode"] = to_string(cfg.rollout_mode);
  j["koopman_auto"] = to_json(a);
  j["frozen"] = to_json(f);
  j["retrained"] = to_json(r);
  j["retraining"] = {{"epochs", retrained.trajectory.epochs}, {"accuracies", retrained.trajectory.accuracies}};
  atomic_write(dir / "rollout.json", dump(j));

  log << "rollout: t = " << cfg.t_train << ".." << cfg.dataset.total_steps - 1 << ", koopman " << fixed(a.mean)
      << " (min " << fixed(a.min) << ", " << a.steps_below_90 << " below 90%), frozen " << fixed(f.mean) << " ("
      << f.steps_below_90 << " below), retrained " << fixed(r.mean) << " (" << fixed(timer.seconds(), 1) << " s)\n";
}

void cmd_couple(const RunConfig& cfg, std::ostream& log) {
  prepare(cfg);
  if (cfg.dataset.kind == DriftKind::F_expanding && !cfg.force) throw ConfigError(kCouplingRefusal);
  const fs::path dir = output_dir(cfg);
  const NetConfig net = cfg.net();
  const fs::path csv = dir / "trajectory.csv";
  const CsvTable table = read_csv(csv);
  require_hash(table.config_hash, config_hash(cfg, Stage::train), csv, "train");
  int t_begin = 0;
  const auto names = param_names(net);
  const Eigen::MatrixXd w = weights_from_table(table, names, &t_begin);
  const CouplingReport rep = coupling_report(w, net, cfg.te_bins, t_begin);

  const auto hash = config_hash(cfg, Stage::couple);
  atomic_write(dir / "dcor.csv", to_csv(named_matrix_table(rep.dcor, names, hash)));
  atomic_write(dir / "te.csv", to_csv(named_matrix_table(rep.te, names, hash)));
  atomic_write(dir / "te_norm.csv", to_csv(named_matrix_table(rep.te_norm, names, hash)));

  const std::string tag = "<!-- config_hash=" + hash + " -->\n";
  const std::string letter(kind_letter(cfg.dataset.kind));
  const std::string window = " (t=" + std::to_string(rep.t_begin) + "-" + std::to_string(rep.t_end - 1) + ")";
  HeatmapOptions o;
  o.separators = block_separators(net);
  o.title = "Distance correlation, dataset " + letter + window;
  atomic_write(dir / "dcor.svg", tag + heatmap_svg(rep.dcor, names, o));
  o.title = "Normalized transfer entropy TE(i->j), dataset " + letter + window;
  o.vmax = std::max(rep.te_norm.maxCoeff(), 1e-12);
  atomic_write(dir / "te_norm.svg", tag + heatmap_svg(rep.te_norm, names, o));

  Json j = header("coupling", hash, cfg);
  j["t_begin"] = rep.t_begin;
  j["t_end"] = rep.t_end;
  j["te_bins"] = rep.bins;
  j["forced"] = cfg.dataset.kind == DriftKind::F_expanding;
  j["dcor_mean_offdiag"] = rep.dcor_mean_offdiag;
  j["dcor_frac_above_half"] = rep.dcor_frac_above_half;
  j["te_ratio_l1_l2"] = rep.te_ratio_l1_l2;
  atomic_write(dir / "coupling.json", dump(j));
  log << "couple: dCor mean " << fixed(rep.dcor_mean_offdiag, 3) << ", " << fixed(100.0 * rep.dcor_frac_above_half, 1)
      << "% of pairs > 0.5, TE ratio L1/L2 " << fixed(rep.te_ratio_l1_l2, 3) << "\n";
}

RunReport cmd_report(const RunConfig& cfg, std::ostream& log) {
  prepare(cfg);
  const fs::path dir = output_dir(cfg);
  const NetConfig net = cfg.net();
  const TrainArtifacts train = load_training(dir, cfg);
  const KoopmanModel model = load_model(dir, cfg);

  const auto rollout_hash = config_hash(cfg, Stage::rollout);
  const fs::path rpath = dir / "rollout.json";
  const Json rj = read_json(rpath);
  require_hash(rj.at("config_hash").get<std::string>(), rollout_hash, rpath, "rollout");
  const fs::path wpath = dir / "retrained_weights.csv";
  const CsvTable wt = read_csv(wpath);
  require_hash(wt.config_hash, rollout_hash, wpath, "rollout");
  WeightTrajectory retraining;
  retraining.matrix = weights_from_table(wt, param_names(net), &retraining.t_begin);
  retraining.epochs = rj.at("retraining").at("epochs").get<std::vector<int>>();
  retraining.accuracies = rj.at("retraining").at("accuracies").get<std::vector<double>>();
  const AccuracySeries a = accuracy_series_from_json(rj.at("koopman_auto"));
  const AccuracySeries f = accuracy_series_from_json(rj.at("frozen"));
  const AccuracySeries r = accuracy_series_from_json(rj.at("retrained"));

  std::optional<CouplingReport> coupling;
  std::string note;
  const fs::path cpath = dir / "coupling.json";
  if (fs::exists(cpath)) {
    const Json cj = read_json(cpath);
    require_hash(cj.at("config_hash").get<std::string>(), config_hash(cfg, Stage::couple), cpath, "couple");
    CouplingReport c;
    c.dcor_mean_offdiag = cj.at("dcor_mean_offdiag").get<double>();
    c.dcor_frac_above_half = cj.at("dcor_frac_above_half").get<double>();
    c.te_ratio_l1_l2 = cj.at("te_ratio_l1_l2").get<double>();
    c.bins = cj.at("te_bins").get<int>();
    coupling = c;
  } else if (cfg.dataset.kind == DriftKind::F_expanding) {
    note = "not reported: non-periodic training window invalidates the stationarity assumption of dCor/TE";
  } else {
    throw MissingArtifactError("missing upstream artifact '" + cpath.string() + "' (run `komet couple`)");
  }

  ReportInputs in;
  in.dataset = std::string(kind_letter(cfg.dataset.kind));
  in.training = &train.trajectory;
  in.retraining = &retraining;
  in.mean_epochs_cold = train.mean_epochs_cold;
  in.model = &model;
  in.net = &net;
  in.koopman_auto = &a;
  in.frozen = &f;
  in.retrained = &r;
  in.coupling = coupling ? &*coupling : nullptr;
  in.coupling_note = note;
  in.seed = cfg.seed;
  in.config_hash = config_hash(cfg, Stage::report);
  const RunReport report = build_report(in);

  atomic_write(dir / "report.json", dump(to_json(report)));
  atomic_write(dir / "table1.csv", table1_csv(report, in.config_hash));
  log << "report: " << (dir / "report.json").string() << " (koopman " << fixed(report.koopman_auto.mean) << ", gap to retrained "
      << fixed(report.gap_to_retrained()) << ")\n";
  return report;
}

RunReport cmd_all(const RunConfig& cfg, std::ostream& log) {
  cmd_generate(cfg, log);
  cmd_train(cfg, log);
  cmd_fit(cfg, log);
  cmd_rollout(cfg, log);
  if (cfg.dataset.kind != DriftKind::F_expanding || cfg.force) {
    cmd_couple(cfg, log);
  } else {
    std::error_code ec;
    fs::remove(output_dir(cfg) / "coupling.json", ec);
    log << "couple: skipped for dataset F (non-periodic training window); use --force to compute\n";
  }
  return cmd_report(cfg, log);
}

std::string table1_csv(const RunReport& r, const std::string& hash) {
  CsvTable t;
  t.config_hash = hash;
  t.header = {"dataset",       "n_params",      "mean_train_acc", "min_train_acc",   "mean_epochs_warm",
              "mean_epochs_cold", "strategy",   "latent_dim",     "rho_pre",         "rho_post",
              "rho_latent",    "koopman_mean",  "koopman_min",    "koopman_below_90", "frozen_mean",
              "frozen_below_90", "retrained_mean", "gap_to_retrained", "dcor_mean",   "dcor_frac_above_half",
              "te_ratio_l1_l2"};
  const auto& tr = r.training;
  const auto& k = r.koopman;
  std::vector<std::string> row{r.dataset,
                               std::to_string(k.n_params),
                               fixed(tr.mean_train_acc),
                               fixed(tr.min_train_acc),
                               fixed(tr.mean_epochs_warm, 1),
                               tr.mean_epochs_cold ? fixed(*tr.mean_epochs_cold, 1) : "NR",
                               std::string(to_string(k.strategy)),
                               std::to_string(k.latent_dim),
                               fixed(k.rho_pre),
                               fixed(k.rho_post),
                               fixed(k.rho_latent),
                               fixed(r.koopman_auto.mean),
                               fixed(r.koopman_auto.min),
                               std::to_string(r.koopman_auto.steps_below_90),
                               fixed(r.frozen.mean),
                               std::to_string(r.frozen.steps_below_90),
                               fixed(r.retrained.mean),
                               fixed(r.gap_to_retrained())};
  if (r.coupling) {
    row.push_back(fixed(r.coupling->dcor_mean_offdiag, 3));
    row.push_back(fixed(r.coupling->dcor_frac_above_half, 3));
    row.push_back(fixed(r.coupling->te_ratio_l1_l2, 3));
  } else {
    row.insert(row.end(), {"NR", "NR", "NR"});
  }
  t.rows.push_back(std::move(row));
  return to_csv(t);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  if (dynamic_cast<const MissingArtifactError*>(&e)) return 4;
  return 1;
}

}  // namespace komet
