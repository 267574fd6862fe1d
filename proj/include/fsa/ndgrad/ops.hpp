// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

// Differentiable operations over Tensors.
//
// Each op is a forward function plus an explicit backward that accumulates
// into the gradient slots of the Parameters involved and optionally returns
// the gradient with respect to the input. Forward results are checked for
// finiteness; a NaN/Inf raises NumericError instead of propagating.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fsa/common/rng.hpp"
#include "fsa/ndgrad/parameter.hpp"
#include "fsa/ndgrad/tensor.hpp"

namespace fsa::ndgrad {

enum class Padding { kValid, kSame };
enum class Mode { kTrain, kEval };
enum class Activation { kRelu, kElu, kLinear };

// --- conv2d: input [N,C,H,W], kernel [F,C,kh,kw], bias [F], stride 1.
// Same padding splits (k-1) as floor((k-1)/2) before and the rest after.
Shape conv2d_output_shape(const Shape& input, const Shape& kernel, Padding padding);
Tensor conv2d(const Tensor& input, const Parameter& kernel, const Parameter& bias,
              Padding padding);
// Returns the input gradient, or an empty Tensor if need_input_grad is false.
Tensor conv2d_backward(const Tensor& input, Parameter& kernel, Parameter& bias, Padding padding,
                       const Tensor& grad_output, bool need_input_grad);

// --- max pooling over non-overlapping (ph, pw) windows; trailing rows and
// columns that do not fill a window are dropped. Ties go to the lowest index.
struct PoolResult {
  Tensor output;
  std::vector<std::uint32_t> argmax;
};
Shape maxpool2d_output_shape(const Shape& input, std::size_t pool_h, std::size_t pool_w);
PoolResult maxpool2d(const Tensor& input, std::size_t pool_h, std::size_t pool_w);
Tensor maxpool2d_backward(const Shape& input_shape, std::span<const std::uint32_t> argmax,
                          const Tensor& grad_output);

// --- global max over each feature map: [N,C,H,W] -> [N,C].
PoolResult global_max(const Tensor& input);

// --- dense: input [N,D_in], weight [D_in,D_out], bias [D_out].
Tensor dense(const Tensor& input, const Parameter& weight, const Parameter& bias);
Tensor dense_backward(const Tensor& input, Parameter& weight, Parameter& bias,
                      const Tensor& grad_output, bool need_input_grad);

// --- elementwise activations. ELU uses alpha = 1.
double activate(double x, Activation kind);
Tensor activation(const Tensor& input, Activation kind);
// Backward is expressed through the forward output.
Tensor activation_backward(const Tensor& output, Activation kind, const Tensor& grad_output);

// --- batch norm over (N,H,W) per channel. Accepts [N,C,H,W] or [N,C].
struct RunningStats {
  std::vector<double> mean;
  std::vector<double> var;

  explicit RunningStats(std::size_t channels = 0) : mean(channels, 0.0), var(channels, 1.0) {}
};
struct BatchNormCache {
  Mode mode = Mode::kEval;
  Tensor xhat;
  std::vector<double> inv_std;
};
inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

Tensor batchnorm(const Tensor& input, const Parameter& gamma, const Parameter& beta, Mode mode,
                 RunningStats& stats, BatchNormCache* cache);
// Eval-mode normalization that only reads the running statistics.
Tensor batchnorm_infer(const Tensor& input, const Parameter& gamma, const Parameter& beta,
                       const RunningStats& stats);
Tensor batchnorm_backward(const BatchNormCache& cache, Parameter& gamma, Parameter& beta,
                          const Tensor& grad_output, bool need_input_grad);

// --- inverted dropout. mask holds 0 or 1/(1-rate) per element (train mode).
Tensor dropout(const Tensor& input, double rate, Mode mode, SeededRng& rng,
               std::vector<double>* mask);
Tensor dropout_backward(std::span<const double> mask, const Tensor& grad_output);

// --- softmax + mean cross-entropy over rows of [N,K] logits.
struct XentResult {
  double loss = 0.0;
  Tensor probs;
};
Tensor softmax_rows(const Tensor& logits);
XentResult softmax_xent(const Tensor& logits, std::span<const int> labels);
// d(mean loss)/d(logits) = (probs - onehot) / N.
Tensor softmax_xent_grad(const Tensor& probs, std::span<const int> labels);

}  // namespace fsa::ndgrad
