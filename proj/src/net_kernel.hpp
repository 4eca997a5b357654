#pragma once

// Per-sample forward/backward on the flat parameter layout. Shared by the
// serial and OpenMP batch kernels.

#include <algorithm>
#include <cmath>

#include "komet/model.hpp"

namespace komet::detail {

inline constexpr int kMaxHidden = 32;
inline constexpr int kMaxOutputs = 8;

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

struct Layout {
  int in, hidden, out;
  int b1, w2, b2;  // offsets into the flat vector

  explicit Layout(const NetConfig& cfg)
      : in(cfg.input_dim),
        hidden(cfg.hidden),
        out(cfg.n_outputs()),
        b1(cfg.hidden * cfg.input_dim),
        w2(b1 + cfg.hidden),
        b2(w2 + cfg.n_outputs() * cfg.hidden) {}
};

// Fills hidden activations and output logits for one input.
inline void logits(const Layout& L, const double* th, const double* x, double* h, double* z) {
  for (int j = 0; j < L.hidden; ++j) {
    double a = th[L.b1 + j];
    for (int i = 0; i < L.in; ++i) a += th[j * L.in + i] * x[i];
    h[j] = sigmoid(a);
  }
  for (int o = 0; o < L.out; ++o) {
    double a = th[L.b2 + o];
    for (int j = 0; j < L.hidden; ++j) a += th[L.w2 + o * L.hidden + j] * h[j];
    z[o] = a;
  }
}

inline int predict_from_logits(const Layout& L, const double* z) {
  if (L.out == 1) return z[0] > 0.0 ? 1 : 0;  // p > 0.5 <=> logit > 0
  int best = 0;
  for (int o = 1; o < L.out; ++o)
    if (z[o] > z[best]) best = o;
  return best;
}

// Adds the gradient of this sample's task loss into g and returns the loss.
inline double accumulate_sample(const Layout& L, const double* th, const double* x, int label, double* g) {
  double h[kMaxHidden] = {};
  double z[kMaxOutputs] = {};
  double dz[kMaxOutputs];
  logits(L, th, x, h, z);

  double loss;
  if (L.out == 1) {
    loss = softplus(z[0]) - (label == 1 ? z[0] : 0.0);
    dz[0] = sigmoid(z[0]) - (label == 1 ? 1.0 : 0.0);
  } else {
    double zmax = z[0];
    for (int o = 1; o < L.out; ++o) zmax = std::max(zmax, z[o]);
    double s = 0.0;
    for (int o = 0; o < L.out; ++o) s += std::exp(z[o] - zmax);
    const double lse = zmax + std::log(s);
    loss = lse - z[label];
    for (int o = 0; o < L.out; ++o) dz[o] = std::exp(z[o] - lse) - (o == label ? 1.0 : 0.0);
  }

  for (int o = 0; o < L.out; ++o) {
    g[L.b2 + o] += dz[o];
    for (int j = 0; j < L.hidden; ++j) g[L.w2 + o * L.hidden + j] += dz[o] * h[j];
  }
  for (int j = 0; j < L.hidden; ++j) {
    double dh = 0.0;
    for (int o = 0; o < L.out; ++o) dh += th[L.w2 + o * L.hidden + j] * dz[o];
    const double da = dh * h[j] * (1.0 - h[j]);
    g[L.b1 + j] += da;
    for (int i = 0; i < L.in; ++i) g[j * L.in + i] += da * x[i];
  }
  return loss;
}

}  // namespace komet::detail
