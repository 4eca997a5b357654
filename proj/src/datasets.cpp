#include "komet/datasets.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "komet/error.hpp"

namespace komet {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Eigen::Vector2d unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

double phase(const DriftSpec& spec, int t) { return kTwoPi * t / spec.period; }

// Vertices of the rotating equilateral triangle, vertex k belongs to class k.
std::vector<Eigen::Vector2d> triangle(double radius, double angle) {
  std::vector<Eigen::Vector2d> v;
  for (int k = 0; k < 3; ++k) v.push_back(radius * unit(angle + kTwoPi * k / 3.0));
  return v;
}

}  // namespace

std::string_view kind_letter(DriftKind kind) {
  switch (kind) {
    case DriftKind::A_sign_flip: return "A";
    case DriftKind::B_osc_sep: return "B";
    case DriftKind::C_lissajous: return "C";
    case DriftKind::D_orbit_mog: return "D";
    case DriftKind::E_subcluster_mog: return "E";
    case DriftKind::F_expanding: return "F";
  }
  return "?";
}

DriftKind kind_from_string(std::string_view s) {
  if (s == "A" || s == "a" || s == "A_sign_flip") return DriftKind::A_sign_flip;
  if (s == "B" || s == "b" || s == "B_osc_sep") return DriftKind::B_osc_sep;
  if (s == "C" || s == "c" || s == "C_lissajous") return DriftKind::C_lissajous;
  if (s == "D" || s == "d" || s == "D_orbit_mog") return DriftKind::D_orbit_mog;
  if (s == "E" || s == "e" || s == "E_subcluster_mog") return DriftKind::E_subcluster_mog;
  if (s == "F" || s == "f" || s == "F_expanding") return DriftKind::F_expanding;
  throw ConfigError("unknown dataset kind '" + std::string(s) + "' (expected A-F)");
}

DriftSpec DriftSpec::defaults(DriftKind kind) {
  DriftSpec s;
  s.kind = kind;
  switch (kind) {
    case DriftKind::A_sign_flip:
      s.n_classes = 2;
      s.noise_std = 0.25;
      s.params = {{"radius", 1.0}, {"reverse_rotation", 1.0}};
      break;
    case DriftKind::B_osc_sep:
      // sep in [0.4, 1.6]; Phi(-0.4 / (2 * 0.12)) ~ 4.8% Bayes error at the minimum.
      s.n_classes = 2;
      s.noise_std = 0.12;
      s.params = {{"sep_mean", 1.0}, {"sep_amp", 0.6}};
      break;
    case DriftKind::C_lissajous:
      s.n_classes = 2;
      s.noise_std = 0.18;
      s.params = {{"amp_x", 1.8}, {"amp_y", 1.0}, {"separation", 1.2}};
      break;
    case DriftKind::D_orbit_mog:
      s.n_classes = 3;
      s.noise_std = 0.25;
      s.params = {{"radius", 1.8}};
      break;
    case DriftKind::E_subcluster_mog:
      s.n_classes = 3;
      s.noise_std = 0.22;
      s.params = {{"radius_mean", 1.5}, {"radius_amp", 0.3}, {"subcluster_offset", 0.3}};
      break;
    case DriftKind::F_expanding:
      s.n_classes = 3;
      s.noise_std = 0.25;
      s.params = {{"radius0", 1.2}, {"radius_slope", 0.004}};
      break;
  }
  return s;
}

double DriftSpec::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) {
    throw ConfigError("dataset " + std::string(kind_letter(kind)) + " has no parameter '" + name + "'");
  }
  return it->second;
}

void DriftSpec::validate() const {
  if (period < 1) throw ConfigError("dataset.period must be >= 1");
  if (total_steps != 4 * period) throw ConfigError("dataset.total_steps must equal 4 * period");
  const int expected_classes = (kind <= DriftKind::C_lissajous) ? 2 : 3;
  if (n_classes != expected_classes) throw ConfigError("n_classes does not match dataset kind");
  if (input_dim != 2) throw ConfigError("only 2-D inputs are supported");
  if (!(noise_std > 0.0) || !std::isfinite(noise_std)) throw ConfigError("noise_std must be finite and > 0");
  for (const auto& [k, v] : params) {
    if (!std::isfinite(v)) throw ConfigError("dataset parameter '" + k + "' is not finite");
  }
}

double circumradius(const DriftSpec& spec, int t) {
  switch (spec.kind) {
    case DriftKind::D_orbit_mog:
      return spec.param("radius");
    case DriftKind::E_subcluster_mog:
      return spec.param("radius_mean") + spec.param("radius_amp") * std::cos(phase(spec, t));
    case DriftKind::F_expanding:
      return spec.param("radius0") + spec.param("radius_slope") * t;
    default:
      throw ConfigError("circumradius is only defined for kinds D-F");
  }
}

double gap(const DriftSpec& spec, int t) { return std::sqrt(3.0) * circumradius(spec, t); }

std::vector<MixtureComponent> mixture(const DriftSpec& spec, int t) {
  if (t < 0 || t >= spec.total_steps) throw ConfigError("timestep out of range");
  const double ph = phase(spec, t);
  std::vector<MixtureComponent> out;
  switch (spec.kind) {
    case DriftKind::A_sign_flip: {
      const bool second_half = 2 * (t % spec.period) >= spec.period;
      const bool reversal = spec.param("reverse_rotation") != 0.0;
      // Either the rotation direction reverses at 180 degrees (continuous
      // triangle-wave angle) or the labels swap on the second half-period.
      const double angle = (reversal && second_half) ? kTwoPi - ph : ph;
      const Eigen::Vector2d c = spec.param("radius") * unit(angle);
      const bool flipped = !reversal && second_half;
      out.push_back({flipped ? Eigen::Vector2d(-c) : c, 0});
      out.push_back({flipped ? c : Eigen::Vector2d(-c), 1});
      break;
    }
    case DriftKind::B_osc_sep: {
      const double sep = spec.param("sep_mean") + spec.param("sep_amp") * std::cos(ph);
      const Eigen::Vector2d half = 0.5 * sep * unit(ph);
      out.push_back({-half, 0});
      out.push_back({half, 1});
      break;
    }
    case DriftKind::C_lissajous: {
      const Eigen::Vector2d delta(spec.param("amp_x") * std::sin(ph), spec.param("amp_y") * std::cos(ph));
      const Eigen::Vector2d half(0.5 * spec.param("separation"), 0.0);
      out.push_back({delta - half, 0});
      out.push_back({delta + half, 1});
      break;
    }
    case DriftKind::D_orbit_mog:
    case DriftKind::F_expanding: {
      const auto v = triangle(circumradius(spec, t), ph);
      for (int k = 0; k < 3; ++k) out.push_back({v[k], k});
      break;
    }
    case DriftKind::E_subcluster_mog: {
      const auto v = triangle(circumradius(spec, t), ph);
      const double off = spec.param("subcluster_offset");
      for (int k = 0; k < 3; ++k) {
        const Eigen::Vector2d tangent = unit(ph + kTwoPi * k / 3.0 + 0.5 * std::numbers::pi);
        out.push_back({v[k] - off * tangent, k, 0.5});
        out.push_back({v[k] + off * tangent, k, 0.5});
      }
      break;
    }
  }
  return out;
}

std::vector<Eigen::Vector2d> centroids(const DriftSpec& spec, int t) {
  std::vector<Eigen::Vector2d> out;
  for (const auto& c : mixture(spec, t)) out.push_back(c.mean);
  return out;
}

std::uint64_t stream_seed(std::uint64_t seed, DriftKind kind, Stream stream, int t) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(kind));
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  return splitmix64(h ^ static_cast<std::uint64_t>(t));
}

LabeledBatch sample_timestep(const DriftSpec& spec, int t, int n, std::uint64_t seed, Stream stream) {
  if (n < 1) throw ConfigError("sample count must be >= 1");
  const auto comps = mixture(spec, t);

  // Per-class component lists (kind E has two per class).
  std::vector<std::vector<const MixtureComponent*>> by_class(spec.n_classes);
  for (const auto& c : comps) by_class[c.label].push_back(&c);

  std::mt19937_64 rng(stream_seed(seed, spec.kind, stream, t));
  std::normal_distribution<double> normal(0.0, spec.noise_std);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  LabeledBatch batch;
  batch.inputs.resize(n, 2);
  batch.labels.resize(n);
  batch.timestep = t;
  for (int i = 0; i < n; ++i) {
    const int label = i % spec.n_classes;
    const auto& members = by_class[label];
    const MixtureComponent* comp = members.front();
    if (members.size() > 1) {
      double u = uniform(rng);
      for (const auto* m : members) {
        comp = m;
        if ((u -= m->weight) < 0.0) break;
      }
    }
    const double dx = normal(rng);
    const double dy = normal(rng);
    batch.inputs(i, 0) = comp->mean.x() + dx;
    batch.inputs(i, 1) = comp->mean.y() + dy;
    batch.labels(i) = label;
  }
  return batch;
}

int bayes_label(const DriftSpec& spec, int t, const Eigen::Vector2d& x) {
  // Equal isotropic noise and equal class priors: the likelihood ratio reduces
  // to comparing sum_k w_k exp(-|x - mu_k|^2 / 2 sigma^2) per class.
  const double inv2s2 = 0.5 / (spec.noise_std * spec.noise_std);
  std::vector<double> like(spec.n_classes, 0.0);
  for (const auto& c : mixture(spec, t)) like[c.label] += c.weight * std::exp(-(x - c.mean).squaredNorm() * inv2s2);
  int best = 0;
  for (int k = 1; k < spec.n_classes; ++k)
    if (like[k] > like[best]) best = k;
  return best;
}

}  // namespace komet
