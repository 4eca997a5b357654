#pragma once

// Pairwise dependence diagnostics over a weight trajectory: distance
// correlation (symmetric) and binned transfer entropy (directed).

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "komet/model.hpp"

namespace komet {

/// Sample distance correlation in [0, 1] from doubly-centred distance
/// matrices. Returns 0 when either series has zero distance variance.
double distance_correlation(std::span<const double> x, std::span<const double> y);

/// Equal-frequency bin index per sample. Tied values always share a bin, so a
/// constant series maps to a single bin.
std::vector<int> quantile_bins(std::span<const double> x, int bins);

/// H(Y_t | Y_{t-1}) in nats from the binned series.
double conditional_entropy_lag1(std::span<const int> y_bins, int bins);

/// TE(X -> Y) = H(Y_t | Y_{t-1}) - H(Y_t | Y_{t-1}, X_{t-1}) in nats, plug-in
/// histogram estimate with history length 1, clipped at 0.
double transfer_entropy(std::span<const double> x, std::span<const double> y, int bins);
double transfer_entropy_binned(std::span<const int> x_bins, std::span<const int> y_bins, int bins);

struct CouplingReport {
  Eigen::MatrixXd dcor;    // symmetric, unit diagonal
  Eigen::MatrixXd te;      // raw TE(i -> j), rows are sources
  Eigen::MatrixXd te_norm; // te(i, j) / H(Y_j,t | Y_j,t-1)
  double dcor_mean_offdiag = 0.0;
  double dcor_frac_above_half = 0.0;
  double te_ratio_l1_l2 = 0.0;  // mean te_norm(L1 -> L2) / mean te_norm(L2 -> L1)
  int t_begin = 0;
  int t_end = 0;  // exclusive
  int bins = 8;
};

/// Fills both matrices for every parameter pair of the trajectory window.
/// trajectory is n_params x T (one column per timestep).
CouplingReport coupling_report(const Eigen::MatrixXd& trajectory, const NetConfig& cfg, int bins, int t_begin = 0);

/// Summary statistics of an already-filled report (recomputed from matrices).
void summarize(CouplingReport& report, const NetConfig& cfg);

}  // namespace komet
