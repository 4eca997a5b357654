#include "komet/koopman.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "komet/error.hpp"

namespace komet {

std::string_view to_string(Strategy s) { return s == Strategy::fourier ? "fourier" : "detrend_fourier"; }

std::string_view to_string(RolloutMode m) { return m == RolloutMode::autonomous ? "autonomous" : "reproject_time"; }

Strategy strategy_from_string(std::string_view s) {
  if (s == "fourier") return Strategy::fourier;
  if (s == "detrend_fourier" || s == "detrend+fourier") return Strategy::detrend_fourier;
  throw ConfigError("unknown koopman strategy '" + std::string(s) + "'");
}

RolloutMode rollout_mode_from_string(std::string_view s) {
  if (s == "autonomous") return RolloutMode::autonomous;
  if (s == "reproject_time") return RolloutMode::reproject_time;
  throw ConfigError("unknown rollout mode '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- scaler

Eigen::MatrixXd Scaler::apply(const Eigen::MatrixXd& w) const {
  return (w.colwise() - mean).array().colwise() / std.array();
}

Eigen::MatrixXd Scaler::invert(const Eigen::MatrixXd& z) const {
  return (z.array().colwise() * std.array()).matrix().colwise() + mean;
}

std::pair<Eigen::MatrixXd, Scaler> standardize(const Eigen::MatrixXd& w) {
  if (w.rows() == 0 || w.cols() < 2) throw std::invalid_argument("standardize: need at least 2 columns");
  Scaler s;
  s.mean = w.rowwise().mean();
  const Eigen::MatrixXd centred = w.colwise() - s.mean;
  s.std = (centred.array().square().rowwise().sum() / static_cast<double>(w.cols())).sqrt();
  s.std = s.std.cwiseMax(kStdFloor);
  Eigen::MatrixXd z = centred.array().colwise() / s.std.array();
  // Degenerate rows carry only rounding noise after centring.
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    if (s.std[i] <= kStdFloor) z.row(i).setZero();
  return {std::move(z), std::move(s)};
}

// ---------------------------------------------------------------- trend

Eigen::MatrixXd TrendModel::evaluate(const std::vector<int>& times) const {
  Eigen::MatrixXd out(intercept.size(), static_cast<Eigen::Index>(times.size()));
  for (std::size_t k = 0; k < times.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = intercept + slope * times[k];
  return out;
}

std::pair<Eigen::MatrixXd, TrendModel> detrend(const Eigen::MatrixXd& w, int t_begin) {
  const auto n = w.cols();
  if (n < 3) throw std::invalid_argument("detrend: need at least 3 columns");
  const Eigen::ArrayXd t = Eigen::ArrayXd::LinSpaced(n, t_begin, t_begin + static_cast<double>(n - 1));
  const double tbar = t.mean();
  const Eigen::ArrayXd tc = t - tbar;
  const double sxx = (tc * tc).sum();

  TrendModel tr;
  tr.slope.resize(w.rows());
  tr.intercept.resize(w.rows());
  Eigen::MatrixXd resid(w.rows(), n);
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    const double ybar = w.row(i).mean();
    const double b = ((w.row(i).transpose().array() - ybar) * tc).sum() / sxx;
    tr.slope[i] = b;
    tr.intercept[i] = ybar - b * tbar;
    resid.row(i) = (w.row(i).transpose().array() - tr.intercept[i] - b * t).transpose();
  }
  return {std::move(resid), std::move(tr)};
}

Eigen::MatrixXd retrend(const Eigen::MatrixXd& residual, const TrendModel& trend, int t_begin) {
  std::vector<int> times(static_cast<std::size_t>(residual.cols()));
  for (std::size_t k = 0; k < times.size(); ++k) times[k] = t_begin + static_cast<int>(k);
  return residual + trend.evaluate(times);
}

// ---------------------------------------------------------------- PCA

double PcaBasis::explained_ratio() const {
  return total_variance > 0.0 ? explained_variance.sum() / total_variance : 1.0;
}

Eigen::MatrixXd PcaBasis::project(const Eigen::MatrixXd& x) const {
  const Eigen::VectorXd inv_sd = explained_variance.array().rsqrt();
  return inv_sd.asDiagonal() * (components * x);
}

Eigen::MatrixXd PcaBasis::back_project(const Eigen::MatrixXd& latent) const {
  const Eigen::VectorXd sd = explained_variance.array().sqrt();
  return components.transpose() * (sd.asDiagonal() * latent);
}

PcaBasis fit_pca(const Eigen::MatrixXd& z, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("fit_pca: threshold must be in (0, 1]");
  const Eigen::MatrixXd centred = z.colwise() - z.rowwise().mean();
  const Eigen::MatrixXd cov = centred * centred.transpose() / static_cast<double>(z.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw NumericalError("fit_pca: eigen decomposition failed");

  // Eigen returns ascending order.
  const Eigen::VectorXd evals = es.eigenvalues().reverse();
  const Eigen::MatrixXd evecs = es.eigenvectors().rowwise().reverse();
  const double top = std::max(evals[0], 0.0);
  const double total = evals.cwiseMax(0.0).sum();

  int rank = 0;
  const double tol = top * 1e-12 * static_cast<double>(evals.size());
  while (rank < evals.size() && evals[rank] > tol) ++rank;
  if (rank == 0) throw NumericalError("fit_pca: trajectory has no variance");

  int p = 0;
  double acc = 0.0;
  while (p < rank) {
    acc += evals[p];
    ++p;
    if (acc >= threshold * total) break;
  }

  PcaBasis b;
  b.threshold = threshold;
  b.total_variance = total;
  b.explained_variance = evals.head(p);
  b.components = evecs.leftCols(p).transpose();
  // Fix the sign convention: largest-magnitude loading of each row positive.
  for (int r = 0; r < p; ++r) {
    Eigen::Index idx;
    b.components.row(r).cwiseAbs().maxCoeff(&idx);
    if (b.components(r, idx) < 0.0) b.components.row(r) *= -1.0;
  }
  return b;
}

// ---------------------------------------------------------------- dictionary

double DictionarySpec::omega() const { return 2.0 * std::numbers::pi / period; }

Eigen::VectorXd lift(const Eigen::VectorXd& z, int t, const DictionarySpec& dict) {
  if (z.size() != dict.latent_dim) throw std::invalid_argument("lift: latent dimension mismatch");
  Eigen::VectorXd psi(dict.lifted_dim());
  psi[0] = 1.0;
  psi.segment(1, dict.latent_dim) = z;
  const double w = dict.omega();
  for (int k = 1; k <= dict.harmonics; ++k) {
    const int slot = 1 + dict.latent_dim + 2 * (k - 1);
    psi[slot] = std::sin(k * w * t);
    psi[slot + 1] = std::cos(k * w * t);
  }
  return psi;
}

Eigen::MatrixXd lift_all(const Eigen::MatrixXd& latent, int t_begin, const DictionarySpec& dict) {
  Eigen::MatrixXd psi(dict.lifted_dim(), latent.cols());
  for (Eigen::Index k = 0; k < latent.cols(); ++k)
    psi.col(k) = lift(latent.col(k), t_begin + static_cast<int>(k), dict);
  return psi;
}

// ---------------------------------------------------------------- EDMD

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double rcond) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("pseudo_inverse: SVD failed");
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = s.size() ? rcond * s[0] : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > cutoff) inv[i] = 1.0 / s[i];
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::MatrixXd edmd_fit(const Eigen::MatrixXd& psi_minus, const Eigen::MatrixXd& psi_plus) {
  if (psi_minus.rows() != psi_plus.rows() || psi_minus.cols() != psi_plus.cols()) {
    throw std::invalid_argument("edmd_fit: snapshot matrices differ in shape");
  }
  Eigen::MatrixXd a = psi_plus * pseudo_inverse(psi_minus);
  if (!a.allFinite()) throw NumericalError("edmd_fit: non-finite operator");
  return a;
}

double spectral_radius(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  if (es.info() != Eigen::Success) throw NumericalError("spectral_radius: eigen decomposition failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

SpectralProjection enforce_spectral_radius(const Eigen::MatrixXd& a, double eps) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, true);
  if (es.info() != Eigen::Success) throw NumericalError("enforce_spectral_radius: eigen decomposition failed");
  const Eigen::VectorXcd lambda = es.eigenvalues();
  const double rho = lambda.cwiseAbs().maxCoeff();

  SpectralProjection out;
  out.A = a;
  if (rho < 1.0) return out;

  const Eigen::MatrixXcd v = es.eigenvectors();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(v);
  const auto& s = svd.singularValues();
  out.eigenbasis_condition = s[s.size() - 1] > 0.0 ? s[0] / s[s.size() - 1] : std::numeric_limits<double>::infinity();

  if (!(out.eigenbasis_condition <= kEigenbasisConditionLimit)) {
    out.A = a * ((1.0 - eps) / rho);
    out.uniform_rescale = true;
    return out;
  }

  Eigen::VectorXcd adjusted = lambda;
  for (Eigen::Index i = 0; i < adjusted.size(); ++i) {
    const double mod = std::abs(adjusted[i]);
    if (mod >= 1.0) adjusted[i] *= (1.0 - eps) / mod;
  }
  const Eigen::MatrixXcd rebuilt = v * adjusted.asDiagonal() * v.partialPivLu().inverse();
  out.A = rebuilt.real();
  if (!out.A.allFinite()) throw NumericalError("enforce_spectral_radius: reconstruction is not finite");
  return out;
}

// ---------------------------------------------------------------- pipeline

KoopmanModel fit_koopman(const Eigen::MatrixXd& w, const KoopmanOptions& opts, int t_begin) {
  if (w.cols() < 3) throw std::invalid_argument("fit_koopman: trajectory too short");
  KoopmanModel m;
  m.strategy = opts.strategy;

  Eigen::MatrixXd x = w;
  if (opts.strategy == Strategy::detrend_fourier) {
    auto [resid, tr] = detrend(w, t_begin);
    x = std::move(resid);
    m.trend = std::move(tr);
  }
  auto [z, scaler] = standardize(x);
  m.scaler = std::move(scaler);
  m.basis = fit_pca(z, opts.pca_threshold);
  m.dict = {m.basis.dim(), opts.harmonics, opts.period};

  const Eigen::MatrixXd latent = m.basis.project(z);
  const Eigen::MatrixXd psi = lift_all(latent, t_begin, m.dict);
  const auto n = psi.cols();
  const Eigen::MatrixXd psi_minus = psi.leftCols(n - 1);
  const Eigen::MatrixXd psi_plus = psi.rightCols(n - 1);

  m.A_raw = edmd_fit(psi_minus, psi_plus);
  m.fit_residual = (psi_plus - m.A_raw * psi_minus).norm() / psi_plus.norm();
  m.rho_pre = spectral_radius(m.A_raw);
  m.rho_latent = spectral_radius(m.A_raw.block(1, 1, m.dict.latent_dim, m.dict.latent_dim));

  auto proj = enforce_spectral_radius(m.A_raw, opts.eps);
  m.A = std::move(proj.A);
  m.uniform_rescale = proj.uniform_rescale;
  Eigen::EigenSolver<Eigen::MatrixXd> es(m.A, false);
  m.eigenvalues = es.eigenvalues();
  m.rho_post = m.eigenvalues.cwiseAbs().maxCoeff();

  m.t_last = t_begin + static_cast<int>(n) - 1;
  m.z_last = latent.col(n - 1);
  return m;
}

std::vector<Eigen::VectorXd> rollout(const KoopmanModel& model, const Eigen::VectorXd& z_start, int t_start,
                                     int horizon, RolloutMode mode) {
  if (horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
  const int p = model.dict.latent_dim;
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(horizon));
  Eigen::VectorXd psi = lift(z_start, t_start, model.dict);
  for (int k = 1; k <= horizon; ++k) {
    if (mode == RolloutMode::reproject_time && k > 1) psi = lift(psi.segment(1, p), t_start + k - 1, model.dict);
    psi = model.A * psi;
    if (!psi.allFinite()) throw NumericalError("rollout: state became non-finite at step " + std::to_string(k));
    out.emplace_back(psi.segment(1, p));
  }
  return out;
}

std::vector<ParamVector> reconstruct_weights(const KoopmanModel& model, const std::vector<Eigen::VectorXd>& latent,
                                             int t_first) {
  const int p = model.dict.latent_dim;
  Eigen::MatrixXd zs(p, static_cast<Eigen::Index>(latent.size()));
  for (std::size_t k = 0; k < latent.size(); ++k) {
    if (latent[k].size() != p) throw std::invalid_argument("reconstruct_weights: latent dimension mismatch");
    zs.col(static_cast<Eigen::Index>(k)) = latent[k];
  }
  Eigen::MatrixXd w = model.scaler.invert(model.basis.back_project(zs));
  if (model.trend) w = retrend(w, *model.trend, t_first);
  std::vector<ParamVector> out;
  for (Eigen::Index k = 0; k < w.cols(); ++k) out.emplace_back(w.col(k));
  return out;
}

std::vector<ParamVector> predict_weights(const KoopmanModel& model, int horizon, RolloutMode mode) {
  return reconstruct_weights(model, rollout(model, model.z_last, model.t_last, horizon, mode), model.t_last + 1);
}

}  // namespace komet
