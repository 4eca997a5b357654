#include "komet/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "komet/error.hpp"

namespace komet {

namespace fs = std::filesystem;

void atomic_write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw ConfigError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw ConfigError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw ConfigError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("missing upstream artifact '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double x) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

namespace {

[[noreturn]] void corrupt(const std::string& what) { throw MissingArtifactError("corrupt artifact: " + what); }

double parse_double(std::string_view s) {
  double x = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size()) corrupt("bad number '" + std::string(s) + "'");
  return x;
}

int parse_int(std::string_view s) {
  int x = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size()) corrupt("bad integer '" + std::string(s) + "'");
  return x;
}

// Calls f(line) for every line without the trailing newline / carriage return.
template <class F>
void for_each_line(std::string_view text, F&& f) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    f(line);
    pos = nl + 1;
  }
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto c = line.find(',', pos);
    out.push_back(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
    if (c == std::string_view::npos) break;
    pos = c + 1;
  }
  return out;
}

constexpr std::string_view kHashPrefix = "# config_hash=";

}  // namespace

std::string to_csv(const CsvTable& t) {
  std::string out;
  out += kHashPrefix;
  out += t.config_hash + "\n";
  auto row = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  row(t.header);
  for (const auto& r : t.rows) row(r);
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  bool have_header = false;
  for_each_line(text, [&](std::string_view line) {
    if (line.empty()) return;
    if (line.starts_with(kHashPrefix)) {
      t.config_hash = std::string(line.substr(kHashPrefix.size()));
      return;
    }
    std::vector<std::string> cells;
    for (auto c : split(line)) cells.emplace_back(c);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
    } else {
      if (cells.size() != t.header.size()) corrupt("ragged CSV row");
      t.rows.push_back(std::move(cells));
    }
  });
  if (!have_header) corrupt("CSV without header");
  return t;
}

CsvTable read_csv(const fs::path& path) {
  try {
    return parse_csv(read_file(path));
  } catch (const MissingArtifactError& e) {
    throw MissingArtifactError(std::string(e.what()) + " (" + path.string() + ")");
  }
}

CsvTable weights_table(const Eigen::MatrixXd& w, const std::vector<std::string>& names, int t_begin,
                       const std::string& hash) {
  if (static_cast<Eigen::Index>(names.size()) != w.rows()) throw std::invalid_argument("weights_table: name count");
  CsvTable t;
  t.config_hash = hash;
  t.header.push_back("param");
  for (Eigen::Index k = 0; k < w.cols(); ++k) t.header.push_back("t" + std::to_string(t_begin + k));
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    std::vector<std::string> row{names[static_cast<std::size_t>(i)]};
    for (Eigen::Index k = 0; k < w.cols(); ++k) row.push_back(format_double(w(i, k)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Eigen::MatrixXd weights_from_table(const CsvTable& t, const std::vector<std::string>& names, int* t_begin) {
  if (t.header.size() < 2 || t.header[0] != "param" || !t.header[1].starts_with("t")) corrupt("weights header");
  if (t.rows.size() != names.size()) corrupt("weights table has the wrong parameter count");
  if (t_begin) *t_begin = parse_int(std::string_view(t.header[1]).substr(1));
  Eigen::MatrixXd w(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size() - 1));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i][0] != names[i]) corrupt("unexpected parameter '" + t.rows[i][0] + "'");
    for (std::size_t k = 1; k < t.rows[i].size(); ++k)
      w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k - 1)) = parse_double(t.rows[i][k]);
  }
  return w;
}

CsvTable named_matrix_table(const Eigen::MatrixXd& m, const std::vector<std::string>& names, const std::string& hash) {
  CsvTable t;
  t.config_hash = hash;
  t.header.push_back("param");
  t.header.insert(t.header.end(), names.begin(), names.end());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<std::string> row{names[static_cast<std::size_t>(i)]};
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(format_double(m(i, j)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string batches_csv(const std::vector<LabeledBatch>& batches, const std::string& hash) {
  std::string out;
  out += kHashPrefix;
  out += hash + "\nx1,x2,label,t\n";
  for (const auto& b : batches) {
    const std::string t = std::to_string(b.timestep);
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      out += format_double(b.inputs(i, 0));
      out += ',';
      out += format_double(b.inputs(i, 1));
      out += ',';
      out += std::to_string(b.labels(i));
      out += ',';
      out += t;
      out += '\n';
    }
  }
  return out;
}

std::vector<LabeledBatch> parse_batches_csv(const std::string& text, int n_classes, std::string* hash) {
  struct Row {
    double x1, x2;
    int label;
  };
  std::vector<std::pair<int, std::vector<Row>>> groups;
  bool have_header = false;
  for_each_line(text, [&](std::string_view line) {
    if (line.empty()) return;
    if (line.starts_with(kHashPrefix)) {
      if (hash) *hash = std::string(line.substr(kHashPrefix.size()));
      return;
    }
    if (!have_header) {
      if (line != "x1,x2,label,t") corrupt("dataset header must be x1,x2,label,t");
      have_header = true;
      return;
    }
    const auto c = split(line);
    if (c.size() != 4) corrupt("dataset row needs 4 fields");
    const int t = parse_int(c[3]);
    const int label = parse_int(c[2]);
    if (label < 0 || label >= n_classes) corrupt("label out of range");
    if (groups.empty() || groups.back().first != t) {
      if (!groups.empty() && t < groups.back().first) corrupt("dataset rows are not grouped by ascending t");
      groups.push_back({t, {}});
    }
    groups.back().second.push_back({parse_double(c[0]), parse_double(c[1]), label});
  });
  if (!have_header) corrupt("dataset without header");
  std::vector<LabeledBatch> out;
  out.reserve(groups.size());
  for (const auto& [t, rows] : groups) {
    LabeledBatch b;
    b.timestep = t;
    b.inputs.resize(static_cast<Eigen::Index>(rows.size()), 2);
    b.labels.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      b.inputs(r, 0) = rows[i].x1;
      b.inputs(r, 1) = rows[i].x2;
      b.labels(r) = rows[i].label;
    }
    out.push_back(std::move(b));
  }
  return out;
}

CsvTable eigenvalue_table(const Eigen::VectorXcd& ev, const std::string& hash) {
  CsvTable t;
  t.config_hash = hash;
  t.header = {"re", "im", "modulus", "phase"};
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    t.rows.push_back({format_double(ev[i].real()), format_double(ev[i].imag()), format_double(std::abs(ev[i])),
                      format_double(std::arg(ev[i]))});
  }
  return t;
}

// ---------------------------------------------------------------- JSON

Json vector_json(const Eigen::VectorXd& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  if (!j.is_array()) corrupt("expected a JSON array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) j.push_back(vector_json(m.row(i).transpose()));
  return j;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  if (!j.is_array()) corrupt("expected a JSON matrix");
  if (j.empty()) return {};
  const auto cols = j[0].size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != cols) corrupt("ragged JSON matrix");
    m.row(static_cast<Eigen::Index>(i)) = vector_from_json(j[i]).transpose();
  }
  return m;
}

Json to_json(const TrainerState& s) {
  return Json{{"theta", vector_json(s.theta)},
              {"m", vector_json(s.m)},
              {"v", vector_json(s.v)},
              {"step_count", s.step_count},
              {"timestep", s.timestep}};
}

TrainerState trainer_state_from_json(const Json& j) {
  TrainerState s;
  s.theta = vector_from_json(j.at("theta"));
  s.m = vector_from_json(j.at("m"));
  s.v = vector_from_json(j.at("v"));
  s.step_count = j.at("step_count").get<std::int64_t>();
  s.timestep = j.at("timestep").get<int>();
  s.check();
  return s;
}

Json to_json(const KoopmanModel& m) {
  Json ev = Json::array();
  for (Eigen::Index i = 0; i < m.eigenvalues.size(); ++i) ev.push_back({m.eigenvalues[i].real(), m.eigenvalues[i].imag()});
  Json j{{"strategy", to_string(m.strategy)},
         {"period", m.dict.period},
         {"harmonics", m.dict.harmonics},
         {"latent_dim", m.dict.latent_dim},
         {"scaler", {{"mean", vector_json(m.scaler.mean)}, {"std", vector_json(m.scaler.std)}}}};
  if (m.trend) {
    j["trend"] = {{"intercept", vector_json(m.trend->intercept)}, {"slope", vector_json(m.trend->slope)}};
  } else {
    j["trend"] = nullptr;
  }
  j["pca"] = {{"threshold", m.basis.threshold},
              {"total_variance", m.basis.total_variance},
              {"explained_variance", vector_json(m.basis.explained_variance)},
              {"components", matrix_json(m.basis.components)}};
  j["A"] = matrix_json(m.A);
  j["A_raw"] = matrix_json(m.A_raw);
  j["eigenvalues"] = ev;
  j["rho_pre"] = m.rho_pre;
  j["rho_post"] = m.rho_post;
  j["rho_latent"] = m.rho_latent;
  j["fit_residual"] = m.fit_residual;
  j["uniform_rescale"] = m.uniform_rescale;
  j["t_last"] = m.t_last;
  j["z_last"] = vector_json(m.z_last);
  return j;
}

KoopmanModel koopman_from_json(const Json& j) {
  try {
    KoopmanModel m;
    m.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    m.dict.period = j.at("period").get<int>();
    m.dict.harmonics = j.at("harmonics").get<int>();
    m.dict.latent_dim = j.at("latent_dim").get<int>();
    m.scaler.mean = vector_from_json(j.at("scaler").at("mean"));
    m.scaler.std = vector_from_json(j.at("scaler").at("std"));
    if (!j.at("trend").is_null()) {
      TrendModel t;
      t.intercept = vector_from_json(j["trend"].at("intercept"));
      t.slope = vector_from_json(j["trend"].at("slope"));
      m.trend = std::move(t);
    }
    const auto& p = j.at("pca");
    m.basis.threshold = p.at("threshold").get<double>();
    m.basis.total_variance = p.at("total_variance").get<double>();
    m.basis.explained_variance = vector_from_json(p.at("explained_variance"));
    m.basis.components = matrix_from_json(p.at("components"));
    m.A = matrix_from_json(j.at("A"));
    m.A_raw = matrix_from_json(j.at("A_raw"));
    const auto& ev = j.at("eigenvalues");
    m.eigenvalues.resize(static_cast<Eigen::Index>(ev.size()));
    for (std::size_t i = 0; i < ev.size(); ++i)
      m.eigenvalues[static_cast<Eigen::Index>(i)] = {ev[i].at(0).get<double>(), ev[i].at(1).get<double>()};
    m.rho_pre = j.at("rho_pre").get<double>();
    m.rho_post = j.at("rho_post").get<double>();
    m.rho_latent = j.at("rho_latent").get<double>();
    m.fit_residual = j.at("fit_residual").get<double>();
    m.uniform_rescale = j.at("uniform_rescale").get<bool>();
    m.t_last = j.at("t_last").get<int>();
    m.z_last = vector_from_json(j.at("z_last"));
    const auto n = m.dict.lifted_dim();
    if (m.A.rows() != n || m.A.cols() != n || m.z_last.size() != m.dict.latent_dim) corrupt("Koopman model dimensions");
    return m;
  } catch (const Json::exception& e) {
    corrupt(std::string("Koopman model JSON: ") + e.what());
  }
}

Json to_json(const AccuracySeries& s) {
  Json acc = Json::array();
  for (double a : s.accuracies) acc.push_back(a);
  return Json{{"mode", to_string(s.mode)}, {"t_begin", s.t_begin}, {"mean", s.mean},
              {"min", s.min},                {"steps_below_90", s.steps_below_90}, {"accuracies", acc}};
}

AccuracySeries accuracy_series_from_json(const Json& j) {
  AccuracySeries s;
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "koopman_auto") s.mode = EvalMode::koopman_auto;
  else if (mode == "frozen") s.mode = EvalMode::frozen;
  else if (mode == "retrained") s.mode = EvalMode::retrained;
  else corrupt("unknown accuracy mode '" + mode + "'");
  s.t_begin = j.at("t_begin").get<int>();
  s.accuracies = j.at("accuracies").get<std::vector<double>>();
  s.mean = j.at("mean").get<double>();
  s.min = j.at("min").get<double>();
  s.steps_below_90 = j.at("steps_below_90").get<int>();
  return s;
}

Json to_json(const RunReport& r) {
  Json j{{"schema_version", kSchemaVersion}, {"kind", "run_report"}, {"dataset", r.dataset},
         {"seed", r.seed},                    {"config_hash", r.config_hash}};
  Json tr{{"mean_train_acc", r.training.mean_train_acc},
          {"min_train_acc", r.training.min_train_acc},
          {"mean_epochs_warm", r.training.mean_epochs_warm}};
  tr["mean_epochs_cold"] = r.training.mean_epochs_cold ? Json(*r.training.mean_epochs_cold) : Json(nullptr);
  tr["layer2_trend_fraction"] = r.training.layer2_trend_fraction;
  j["training"] = tr;
  const auto& k = r.koopman;
  j["koopman"] = {{"strategy", to_string(k.strategy)}, {"latent_dim", k.latent_dim},
                  {"n_params", k.n_params},            {"explained_ratio", k.explained_ratio},
                  {"rho_pre", k.rho_pre},              {"rho_post", k.rho_post},
                  {"rho_latent", k.rho_latent},        {"fit_residual", k.fit_residual}};
  j["koopman_auto"] = to_json(r.koopman_auto);
  j["frozen"] = to_json(r.frozen);
  j["retrained"] = to_json(r.retrained);
  j["gap_to_retrained"] = r.gap_to_retrained();
  if (r.coupling) {
    j["coupling"] = {{"reported", true},
                     {"dcor_mean_offdiag", r.coupling->dcor_mean_offdiag},
                     {"dcor_frac_above_half", r.coupling->dcor_frac_above_half},
                     {"te_ratio_l1_l2", r.coupling->te_ratio_l1_l2},
                     {"te_bins", r.coupling->bins}};
  } else {
    j["coupling"] = {{"reported", false}, {"note", r.coupling_note}};
  }
  return j;
}

RunReport run_report_from_json(const Json& j) {
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) corrupt("unsupported report schema version");
    RunReport r;
    r.dataset = j.at("dataset").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    const auto& tr = j.at("training");
    r.training.mean_train_acc = tr.at("mean_train_acc").get<double>();
    r.training.min_train_acc = tr.at("min_train_acc").get<double>();
    r.training.mean_epochs_warm = tr.at("mean_epochs_warm").get<double>();
    if (!tr.at("mean_epochs_cold").is_null()) r.training.mean_epochs_cold = tr["mean_epochs_cold"].get<double>();
    r.training.layer2_trend_fraction = tr.at("layer2_trend_fraction").get<double>();
    const auto& k = j.at("koopman");
    r.koopman.strategy = strategy_from_string(k.at("strategy").get<std::string>());
    r.koopman.latent_dim = k.at("latent_dim").get<int>();
    r.koopman.n_params = k.at("n_params").get<int>();
    r.koopman.explained_ratio = k.at("explained_ratio").get<double>();
    r.koopman.rho_pre = k.at("rho_pre").get<double>();
    r.koopman.rho_post = k.at("rho_post").get<double>();
    r.koopman.rho_latent = k.at("rho_latent").get<double>();
    r.koopman.fit_residual = k.at("fit_residual").get<double>();
    r.koopman_auto = accuracy_series_from_json(j.at("koopman_auto"));
    r.frozen = accuracy_series_from_json(j.at("frozen"));
    r.retrained = accuracy_series_from_json(j.at("retrained"));
    const auto& c = j.at("coupling");
    if (c.at("reported").get<bool>()) {
      r.coupling = CouplingSummary{c.at("dcor_mean_offdiag").get<double>(), c.at("dcor_frac_above_half").get<double>(),
                                   c.at("te_ratio_l1_l2").get<double>(), c.at("te_bins").get<int>()};
    } else {
      r.coupling_note = c.at("note").get<std::string>();
    }
    return r;
  } catch (const Json::exception& e) {
    corrupt(std::string("report JSON: ") + e.what());
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace komet
