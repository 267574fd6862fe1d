// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/frontend/compression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fsa/common/errors.hpp"

namespace fsa::frontend {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

LogCompression LogCompression::log_eps(double epsilon) {
  if (!(epsilon > 0.0)) throw ArgumentError("log_eps epsilon must be > 0");
  LogCompression c;
  c.kind = CompressionKind::kLogEps;
  c.epsilon = epsilon;
  return c;
}

LogCompression LogCompression::log_learn(double pre_alpha, double pre_beta) {
  LogCompression c;
  c.kind = CompressionKind::kLogLearn;
  c.pre_alpha.tensor[0] = pre_alpha;
  c.pre_beta.tensor[0] = pre_beta;
  return c;
}

double LogCompression::alpha() const {
  return kind == CompressionKind::kLogEps ? 1.0 : std::exp(pre_alpha.tensor[0]);
}

double LogCompression::beta() const {
  if (kind == CompressionKind::kLogEps) return epsilon;
  // softplus underflows to 0 below about -745; keep the log argument positive.
  return std::max(softplus(pre_beta.tensor[0]), std::numeric_limits<double>::min());
}

Tensor compress(const Tensor& mel, const LogCompression& c) {
  const double a = c.alpha(), b = c.beta();
  Tensor out(mel.shape());
  for (std::size_t i = 0; i < mel.size(); ++i) {
    if (mel[i] < 0.0) throw ArgumentError("compress: negative mel energy");
    out[i] = std::log(a * mel[i] + b);
  }
  out.check_finite("compress");
  return out;
}

void compress_backward(const Tensor& mel, LogCompression& c, const Tensor& grad_output) {
  if (c.kind != CompressionKind::kLogLearn) return;
  ndgrad::require_same_shape(mel.shape(), grad_output.shape(), "compress_backward");
  const double a = c.alpha(), b = c.beta();
  const double db_dpre = sigmoid(c.pre_beta.tensor[0]);
  double ga = 0.0, gb = 0.0;
  for (std::size_t i = 0; i < mel.size(); ++i) {
    const double inv = grad_output[i] / (a * mel[i] + b);
    ga += inv * a * mel[i];  // d alpha / d pre_alpha = alpha
    gb += inv * db_dpre;
  }
  c.pre_alpha.tensor.ensure_grad()[0] += ga;
  c.pre_beta.tensor.ensure_grad()[0] += gb;
}

}  // namespace fsa::frontend
