#pragma once

// Data-parallel inner loops.
//
// Each kernel has a straightforward serial reference in komet::kernels::serial
// and an OpenMP version in komet::kernels::omp. The library calls the OpenMP
// versions; the serial ones are kept for the equivalence tests and the
// benchmark target.
//
// The OpenMP reductions split work into fixed-size chunks and combine the
// partial sums in chunk order, so results do not depend on the thread count.

#include <Eigen/Dense>

#include "komet/datasets.hpp"
#include "komet/model.hpp"

namespace komet::kernels {

struct TaskLossGrad {
  double loss = 0.0;     // mean task loss over the batch
  Eigen::VectorXd grad;  // gradient of the mean task loss
};

/// Rows are series, columns are time. Returns the symmetric pairwise matrix.
using SeriesMatrix = Eigen::MatrixXd;

namespace serial {
TaskLossGrad task_loss_grad(const NetConfig& cfg, const ParamVector& theta, const LabeledBatch& batch);
int count_correct(const NetConfig& cfg, const ParamVector& theta, const LabeledBatch& batch);
Eigen::MatrixXd dcor_matrix(const SeriesMatrix& series);
/// entry (i, j) = TE(series i -> series j), diagonal 0.
Eigen::MatrixXd te_matrix(const SeriesMatrix& series, int bins);
}  // namespace serial

namespace omp {
inline constexpr Eigen::Index kChunk = 200;

TaskLossGrad task_loss_grad(const NetConfig& cfg, const ParamVector& theta, const LabeledBatch& batch);
int count_correct(const NetConfig& cfg, const ParamVector& theta, const LabeledBatch& batch);
Eigen::MatrixXd dcor_matrix(const SeriesMatrix& series);
Eigen::MatrixXd te_matrix(const SeriesMatrix& series, int bins);
}  // namespace omp

/// Sets the OpenMP thread count used by the omp kernels (<= 0 keeps the default).
void set_threads(int n);

}  // namespace komet::kernels
