// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "fsa/ndgrad/parameter.hpp"
#include "fsa/ndgrad/tensor.hpp"

namespace fsa::frontend {

using ndgrad::Parameter;
using ndgrad::Tensor;

enum class CompressionKind { kLogEps, kLogLearn };

// f(X) = log(alpha * X + beta).
//
// log_eps fixes alpha = 1, beta = epsilon. log_learn trains pre-gate scalars:
// alpha = exp(pre_alpha), beta = softplus(pre_beta), so both stay positive.
struct LogCompression {
  CompressionKind kind = CompressionKind::kLogEps;
  double epsilon = 1e-10;
  Parameter pre_alpha{"compress.pre_alpha", Tensor({1}, 7.0)};
  Parameter pre_beta{"compress.pre_beta", Tensor({1}, 1.0)};

  static LogCompression log_eps(double epsilon = 1e-10);
  static LogCompression log_learn(double pre_alpha = 7.0, double pre_beta = 1.0);

  double alpha() const;
  double beta() const;
};

double softplus(double x);
double sigmoid(double x);

Tensor compress(const Tensor& mel, const LogCompression& c);
// Accumulates d(loss)/d(pre_alpha) and d(loss)/d(pre_beta) for log_learn; a
// no-op for log_eps.
void compress_backward(const Tensor& mel, LogCompression& c, const Tensor& grad_output);

}  // namespace fsa::frontend
