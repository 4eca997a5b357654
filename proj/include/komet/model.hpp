#pragma once

// Two-layer feedforward classifier with sigmoid hidden units.
//
//   binary : p = sigmoid(w2 . sigmoid(W1 x + b1) + b2)        (BCE)
//   3-class: p = softmax(W2 sigmoid(W1 x + b1) + b2)          (CE)
//
// Parameters are stored flat in the canonical order
//   rows of W1, b1, rows of W2, b2
// and named l1w*, l1b*, l2w*, l2b* in every exported file.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "komet/datasets.hpp"

namespace komet {

enum class Head { sigmoid_bce, softmax_ce };

struct NetConfig {
  int input_dim = 2;
  int hidden = 4;
  int n_classes = 2;
  Head head = Head::sigmoid_bce;

  /// Binary tasks use the sigmoid/BCE head, everything else softmax/CE.
  static NetConfig for_classes(int n_classes);

  int n_outputs() const { return head == Head::sigmoid_bce ? 1 : n_classes; }
  int layer1_size() const { return hidden * input_dim + hidden; }
  int n_params() const { return layer1_size() + n_outputs() * hidden + n_outputs(); }
};

using ParamVector = Eigen::VectorXd;

struct NetParams {
  Eigen::MatrixXd w1;  // hidden x input_dim
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // n_outputs x hidden
  Eigen::VectorXd b2;
};

NetParams unflatten(const NetConfig& cfg, const ParamVector& theta);
ParamVector flatten(const NetConfig& cfg, const NetParams& p);

std::vector<std::string> param_names(const NetConfig& cfg);

/// 1 for W1/b1 entries, 2 for W2/b2 entries.
inline int layer_of(const NetConfig& cfg, int index) { return index < cfg.layer1_size() ? 1 : 2; }

/// Class probabilities. The binary head returns a single entry P(class 1).
Eigen::VectorXd forward(const NetConfig& cfg, const ParamVector& theta, const Eigen::Vector2d& x);

/// Predicted class: threshold 0.5 for binary (ties to 0), argmax with ties
/// to the lowest index otherwise.
int predict(const NetConfig& cfg, const ParamVector& theta, const Eigen::Vector2d& x);

struct LossGrad {
  double total = 0.0;
  double task = 0.0;  // mean BCE/CE only; the early-stopping signal
  Eigen::VectorXd grad;
};

/// L_task + lambda_s |theta - theta_prev|^2 + (lambda_wd / 2) |theta|^2 with
/// its exact gradient. The smoothness term is dropped when theta_prev is
/// empty (first timestep). theta_prev is a constant: no gradient flows into it.
/// Throws NumericalError on non-finite results.
LossGrad loss_and_grad(const NetConfig& cfg, const ParamVector& theta, const LabeledBatch& batch,
                       const std::optional<ParamVector>& theta_prev, double lambda_s, double lambda_wd);

double accuracy(const NetConfig& cfg, const ParamVector& theta, const LabeledBatch& batch);

void check_dims(const NetConfig& cfg, const ParamVector& theta);

}  // namespace komet
