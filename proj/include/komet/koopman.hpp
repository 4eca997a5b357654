#pragma once

// Koopman identification of a weight trajectory.
//
//   W --(detrend)--> standardize --> PCA whiten --> lift [1, z, sin/cos(k w t)]
//     --> EDMD least squares --> spectral-radius projection
//
// Prediction rolls the lifted state forward with A and maps the latent
// coordinates back through the whitening, the scaler and (if present) the
// extrapolated linear trend.

#include <complex>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "komet/model.hpp"

namespace komet {

enum class Strategy { fourier, detrend_fourier };
enum class RolloutMode { autonomous, reproject_time };

std::string_view to_string(Strategy s);
std::string_view to_string(RolloutMode m);
Strategy strategy_from_string(std::string_view s);
RolloutMode rollout_mode_from_string(std::string_view s);

struct Scaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& w) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& z) const;
};

inline constexpr double kStdFloor = 1e-8;

struct TrendModel {
  Eigen::VectorXd intercept;
  Eigen::VectorXd slope;  // per step of the true timestep index

  /// a + b t for every parameter, one column per timestep in `times`.
  Eigen::MatrixXd evaluate(const std::vector<int>& times) const;
};

struct PcaBasis {
  Eigen::MatrixXd components;  // p x n_params, orthonormal rows
  Eigen::VectorXd explained_variance;  // retained eigenvalues, descending
  double total_variance = 0.0;
  double threshold = 0.995;

  int dim() const { return static_cast<int>(components.rows()); }
  double explained_ratio() const;
  /// Whitened coordinates: Lambda^{-1/2} U^T x.
  Eigen::MatrixXd project(const Eigen::MatrixXd& standardized) const;
  Eigen::MatrixXd back_project(const Eigen::MatrixXd& latent) const;
};

struct DictionarySpec {
  int latent_dim = 0;
  int harmonics = 4;
  int period = 100;

  double omega() const;
  int lifted_dim() const { return 1 + latent_dim + 2 * harmonics; }
};

struct KoopmanModel {
  Strategy strategy = Strategy::fourier;
  Scaler scaler;
  std::optional<TrendModel> trend;
  PcaBasis basis;
  DictionarySpec dict;
  Eigen::MatrixXd A;           // after spectral-radius enforcement
  Eigen::MatrixXd A_raw;       // least-squares fit before enforcement
  Eigen::VectorXcd eigenvalues;  // of A
  double rho_pre = 0.0;        // rho(A_raw)
  double rho_post = 0.0;       // rho(A)
  double rho_latent = 0.0;     // spectral radius of the latent block A[z, z] of A_raw
  double fit_residual = 0.0;   // |Psi+ - A_raw Psi-|_F / |Psi+|_F
  bool uniform_rescale = false;  // eigenbasis too ill-conditioned, A scaled uniformly
  int t_last = 0;              // last training timestep
  Eigen::VectorXd z_last;      // latent state at t_last
};

// Stage 1: per-row z-scoring over the window. Rows with std below kStdFloor
// are floored and map to zeros.
std::pair<Eigen::MatrixXd, Scaler> standardize(const Eigen::MatrixXd& w);

// Per-row OLS line over the true timesteps t_begin .. t_begin + cols - 1.
std::pair<Eigen::MatrixXd, TrendModel> detrend(const Eigen::MatrixXd& w, int t_begin = 0);
Eigen::MatrixXd retrend(const Eigen::MatrixXd& residual, const TrendModel& trend, int t_begin = 0);

/// Minimal p whose cumulative explained-variance ratio reaches threshold,
/// capped at the numerical rank.
PcaBasis fit_pca(const Eigen::MatrixXd& standardized, double threshold = 0.995);

Eigen::VectorXd lift(const Eigen::VectorXd& z, int t, const DictionarySpec& dict);
Eigen::MatrixXd lift_all(const Eigen::MatrixXd& latent, int t_begin, const DictionarySpec& dict);

/// Moore-Penrose pseudoinverse through SVD with relative cutoff rcond * sigma_max.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double rcond = 1e-10);

/// A = Psi+ Psi-^+ (minimum-norm least squares).
Eigen::MatrixXd edmd_fit(const Eigen::MatrixXd& psi_minus, const Eigen::MatrixXd& psi_plus);

double spectral_radius(const Eigen::MatrixXd& a);

struct SpectralProjection {
  Eigen::MatrixXd A;
  bool uniform_rescale = false;  // eigenbasis condition number exceeded the limit
  double eigenbasis_condition = 1.0;
};

// Above this the eigenvalue pull can rewrite A: a Jordan pair (a linear
// drift in the latent state) splits into two eigenvalues with nearly parallel
// eigenvectors, and moving both onto 1 - eps erases the coupling between them.
// Observed fits on the datasets stay below 1e3.
inline constexpr double kEigenbasisConditionLimit = 1e4;

/// Eigenvalues with modulus >= 1 are pulled to modulus 1 - eps, phase kept,
/// and A is rebuilt in its eigenbasis. Unchanged when rho(A) < 1 already.
SpectralProjection enforce_spectral_radius(const Eigen::MatrixXd& a, double eps = 1e-6);

struct KoopmanOptions {
  Strategy strategy = Strategy::fourier;
  int period = 100;
  int harmonics = 4;
  double pca_threshold = 0.995;
  double eps = 1e-6;
  double rcond = 1e-10;
};

/// Full identification on a trajectory whose column k is timestep t_begin + k.
KoopmanModel fit_koopman(const Eigen::MatrixXd& w, const KoopmanOptions& opts, int t_begin = 0);

/// horizon latent states for t_start+1 .. t_start+horizon.
std::vector<Eigen::VectorXd> rollout(const KoopmanModel& model, const Eigen::VectorXd& z_start, int t_start,
                                     int horizon, RolloutMode mode = RolloutMode::autonomous);

/// Latent states back to parameter vectors at timesteps t_first, t_first+1, ...
std::vector<ParamVector> reconstruct_weights(const KoopmanModel& model, const std::vector<Eigen::VectorXd>& latent,
                                             int t_first);

/// Convenience: autonomous prediction of theta for t_last+1 .. t_last+horizon.
std::vector<ParamVector> predict_weights(const KoopmanModel& model, int horizon,
                                         RolloutMode mode = RolloutMode::autonomous);

}  // namespace komet
