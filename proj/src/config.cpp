#include "komet/config.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "komet/error.hpp"

namespace komet {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

long long to_int(const std::string& key, const std::string& v) {
  long long x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

int to_int32(const std::string& key, const std::string& v) {
  const long long x = to_int(key, v);
  if (x < INT32_MIN || x > INT32_MAX) throw ConfigError(key + ": out of range");
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string fmt(double x) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

std::string fmt(bool b) { return b ? "true" : "false"; }

std::string_view to_string(StrategyChoice s) {
  switch (s) {
    case StrategyChoice::automatic: return "auto";
    case StrategyChoice::fourier: return "fourier";
    case StrategyChoice::detrend_fourier: return "detrend_fourier";
  }
  return "?";
}

StrategyChoice strategy_choice(const std::string& v) {
  if (v == "auto") return StrategyChoice::automatic;
  if (v == "fourier") return StrategyChoice::fourier;
  if (v == "detrend_fourier") return StrategyChoice::detrend_fourier;
  throw ConfigError("koopman.strategy: expected auto, fourier or detrend_fourier, got '" + v + "'");
}

// Every hashed key with its canonical value.
KeyValues canonical(const RunConfig& c) {
  KeyValues kv;
  kv["dataset.kind"] = std::string(kind_letter(c.dataset.kind));
  kv["dataset.period"] = std::to_string(c.dataset.period);
  kv["dataset.noise_std"] = fmt(c.dataset.noise_std);
  for (const auto& [k, v] : c.dataset.params) kv["dataset." + k] = fmt(v);
  kv["run.seed"] = std::to_string(c.seed);
  kv["eval.test_samples"] = std::to_string(c.test_samples);

  const auto& t = c.train;
  kv["train.learning_rate"] = fmt(t.learning_rate);
  kv["train.lambda_s"] = fmt(t.lambda_s);
  kv["train.lambda_wd"] = fmt(t.lambda_wd);
  kv["train.patience"] = std::to_string(t.patience);
  kv["train.tolerance"] = fmt(t.tolerance);
  kv["train.max_epochs"] = std::to_string(t.max_epochs);
  kv["train.batch_size"] = std::to_string(t.batch_size);
  kv["train.carry_moments"] = fmt(t.carry_moments);
  kv["train.beta1"] = fmt(t.adam.beta1);
  kv["train.beta2"] = fmt(t.adam.beta2);
  kv["train.adam_eps"] = fmt(t.adam.eps);
  kv["train.cold_ablation"] = fmt(c.cold_ablation);
  kv["train.t_train"] = std::to_string(c.t_train);

  kv["koopman.strategy"] = std::string(to_string(c.strategy));
  kv["koopman.harmonics"] = std::to_string(c.harmonics);
  kv["koopman.pca_threshold"] = fmt(c.pca_threshold);
  kv["koopman.eps"] = fmt(c.eps);
  kv["koopman.rcond"] = fmt(c.rcond);
  kv["koopman.rollout_mode"] = std::string(to_string(c.rollout_mode));
  kv["coupling.te_bins"] = std::to_string(c.te_bins);
  return kv;
}

bool in_stage(const std::string& key, Stage stage) {
  const bool data = key.starts_with("dataset.") || key == "run.seed" || key == "eval.test_samples" ||
                    key == "train.batch_size";
  const bool train = data || key.starts_with("train.");
  const bool fit = train || (key.starts_with("koopman.") && key != "koopman.rollout_mode");
  switch (stage) {
    case Stage::data: return data;
    case Stage::train: return train;
    case Stage::fit: return fit;
    case Stage::rollout: return fit || key == "koopman.rollout_mode";
    case Stage::couple: return train || key == "coupling.te_bins";
    case Stage::report: return true;
  }
  return true;
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = trim(text.substr(pos, nl - pos));
    ++line_no;
    pos = nl + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty() || value.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key or value");
    if (kv.count(key)) throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

RunConfig RunConfig::for_kind(DriftKind kind) {
  RunConfig c;
  c.dataset = DriftSpec::defaults(kind);
  c.train = TrainConfig::defaults_for(NetConfig::for_classes(c.dataset.n_classes));
  return c;
}

RunConfig RunConfig::from_key_values(const KeyValues& kv) {
  const auto kind = kv.find("dataset.kind");
  RunConfig c = for_kind(kind == kv.end() ? DriftKind::A_sign_flip : kind_from_string(kind->second));
  for (const auto& [k, v] : kv) {
    if (k != "dataset.kind") c.apply(k, v);
  }
  return c;
}

void RunConfig::apply(const std::string& key, const std::string& v) {
  if (key == "dataset.kind") {
    const auto keep_seed = seed;
    *this = for_kind(kind_from_string(v));
    seed = keep_seed;
  } else if (key == "dataset.period") {
    dataset.period = to_int32(key, v);
    dataset.total_steps = 4 * dataset.period;
  } else if (key == "dataset.noise_std") {
    dataset.noise_std = to_double(key, v);
  } else if (key.starts_with("dataset.")) {
    const std::string name = key.substr(8);
    if (!dataset.params.count(name)) {
      throw ConfigError("unknown key '" + key + "' for dataset " + std::string(kind_letter(dataset.kind)));
    }
    dataset.params[name] = to_double(key, v);
  } else if (key == "run.seed") {
    const long long s = to_int(key, v);
    if (s < 0) throw ConfigError("run.seed must be >= 0");
    seed = static_cast<std::uint64_t>(s);
  } else if (key == "run.out") {
    out_dir = v;
  } else if (key == "run.jobs") {
    jobs = to_int32(key, v);
  } else if (key == "eval.test_samples") {
    test_samples = to_int32(key, v);
  } else if (key == "train.learning_rate") {
    train.learning_rate = to_double(key, v);
  } else if (key == "train.lambda_s") {
    train.lambda_s = to_double(key, v);
  } else if (key == "train.lambda_wd") {
    train.lambda_wd = to_double(key, v);
  } else if (key == "train.patience") {
    train.patience = to_int32(key, v);
  } else if (key == "train.tolerance") {
    train.tolerance = to_double(key, v);
  } else if (key == "train.max_epochs") {
    train.max_epochs = to_int32(key, v);
  } else if (key == "train.batch_size") {
    train.batch_size = to_int32(key, v);
  } else if (key == "train.carry_moments") {
    train.carry_moments = to_bool(key, v);
  } else if (key == "train.beta1") {
    train.adam.beta1 = to_double(key, v);
  } else if (key == "train.beta2") {
    train.adam.beta2 = to_double(key, v);
  } else if (key == "train.adam_eps") {
    train.adam.eps = to_double(key, v);
  } else if (key == "train.cold_ablation") {
    cold_ablation = to_bool(key, v);
  } else if (key == "train.t_train") {
    t_train = to_int32(key, v);
  } else if (key == "koopman.strategy") {
    strategy = strategy_choice(v);
  } else if (key == "koopman.harmonics") {
    harmonics = to_int32(key, v);
  } else if (key == "koopman.pca_threshold") {
    pca_threshold = to_double(key, v);
  } else if (key == "koopman.eps") {
    eps = to_double(key, v);
  } else if (key == "koopman.rcond") {
    rcond = to_double(key, v);
  } else if (key == "koopman.rollout_mode") {
    rollout_mode = rollout_mode_from_string(v);
  } else if (key == "coupling.te_bins") {
    te_bins = to_int32(key, v);
  } else if (key == "coupling.force") {
    force = to_bool(key, v);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

Strategy RunConfig::resolved_strategy() const {
  switch (strategy) {
    case StrategyChoice::fourier: return Strategy::fourier;
    case StrategyChoice::detrend_fourier: return Strategy::detrend_fourier;
    case StrategyChoice::automatic: break;
  }
  return dataset.kind == DriftKind::F_expanding ? Strategy::detrend_fourier : Strategy::fourier;
}

KoopmanOptions RunConfig::koopman_options() const {
  KoopmanOptions o;
  o.strategy = resolved_strategy();
  o.period = dataset.period;
  o.harmonics = harmonics;
  o.pca_threshold = pca_threshold;
  o.eps = eps;
  o.rcond = rcond;
  return o;
}

void RunConfig::validate() const {
  dataset.validate();
  train.validate();
  if (!(train.adam.beta1 >= 0.0 && train.adam.beta1 < 1.0)) throw ConfigError("train.beta1 must be in [0, 1)");
  if (!(train.adam.beta2 >= 0.0 && train.adam.beta2 < 1.0)) throw ConfigError("train.beta2 must be in [0, 1)");
  if (!(train.adam.eps > 0.0)) throw ConfigError("train.adam_eps must be > 0");
  if (t_train < 50 || t_train >= dataset.total_steps) {
    throw ConfigError("train.t_train must be in [50, total_steps)");
  }
  if (harmonics < 0) throw ConfigError("koopman.harmonics must be >= 0");
  if (!(pca_threshold > 0.0 && pca_threshold <= 1.0)) throw ConfigError("koopman.pca_threshold must be in (0, 1]");
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("koopman.eps must be in (0, 1)");
  if (!(rcond > 0.0 && rcond < 1.0)) throw ConfigError("koopman.rcond must be in (0, 1)");
  if (te_bins < 2) throw ConfigError("coupling.te_bins must be >= 2");
  if (test_samples < 1) throw ConfigError("eval.test_samples must be >= 1");
  if (jobs < 0) throw ConfigError("run.jobs must be >= 0");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : canonical(*this)) out += k + " = " + v + "\n";
  return out;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const RunConfig& cfg, Stage stage) {
  std::string lines;
  for (const auto& [k, v] : canonical(cfg))
    if (in_stage(k, stage)) lines += k + "=" + v + "\n";
  return fnv1a_hex(lines);
}

std::string default_out_dir(const RunConfig& cfg) {
  return "runs/" + std::string(kind_letter(cfg.dataset.kind)) + "_s" + std::to_string(cfg.seed);
}

}  // namespace komet
