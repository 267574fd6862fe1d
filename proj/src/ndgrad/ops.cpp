// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/ndgrad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fsa/common/errors.hpp"
#include "fsa/ndgrad/kernels.hpp"

namespace fsa::ndgrad {
namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         " tensor, got " + shape_str(t.shape()));
  }
}

ConvGeometry conv_geometry(const Shape& in, const Shape& k, Padding padding) {
  if (in.size() != 4 || k.size() != 4) {
    throw DimensionError("conv2d: input " + shape_str(in) + " and kernel " + shape_str(k) +
                         " must both be rank 4");
  }
  if (in[1] != k[1]) {
    throw DimensionError("conv2d: input " + shape_str(in) + " has " + std::to_string(in[1]) +
                         " channels but kernel " + shape_str(k) + " expects " +
                         std::to_string(k[1]));
  }
  ConvGeometry g;
  g.batch = in[0];
  g.in_channels = in[1];
  g.in_h = in[2];
  g.in_w = in[3];
  g.filters = k[0];
  g.kernel_h = k[2];
  g.kernel_w = k[3];
  if (padding == Padding::kValid) {
    if (g.kernel_h > g.in_h || g.kernel_w > g.in_w) {
      throw DimensionError("conv2d: kernel " + shape_str(k) + " larger than input " +
                           shape_str(in) + " under valid padding");
    }
    g.out_h = g.in_h - g.kernel_h + 1;
    g.out_w = g.in_w - g.kernel_w + 1;
  } else {
    g.pad_top = (g.kernel_h - 1) / 2;
    g.pad_left = (g.kernel_w - 1) / 2;
    g.out_h = g.in_h;
    g.out_w = g.in_w;
  }
  return g;
}

void check_bias(const Tensor& bias, std::size_t n, const char* op) {
  if (bias.rank() != 1 || bias.dim(0) != n) {
    throw DimensionError(std::string(op) + ": bias " + shape_str(bias.shape()) +
                         " does not match " + std::to_string(n) + " outputs");
  }
}

std::size_t channel_plane(const Shape& s) {
  std::size_t p = 1;
  for (std::size_t i = 2; i < s.size(); ++i) p *= s[i];
  return p;
}

}  // namespace

Shape conv2d_output_shape(const Shape& input, const Shape& kernel, Padding padding) {
  const ConvGeometry g = conv_geometry(input, kernel, padding);
  return {g.batch, g.filters, g.out_h, g.out_w};
}

Tensor conv2d(const Tensor& input, const Parameter& kernel, const Parameter& bias,
              Padding padding) {
  const ConvGeometry g = conv_geometry(input.shape(), kernel.tensor.shape(), padding);
  check_bias(bias.tensor, g.filters, "conv2d");
  Tensor out({g.batch, g.filters, g.out_h, g.out_w});
  kernels::conv2d_forward(g, input.raw(), kernel.tensor.raw(), bias.tensor.raw(), out.raw());
  out.check_finite("conv2d output");
  return out;
}

Tensor conv2d_backward(const Tensor& input, Parameter& kernel, Parameter& bias, Padding padding,
                       const Tensor& grad_output, bool need_input_grad) {
  const ConvGeometry g = conv_geometry(input.shape(), kernel.tensor.shape(), padding);
  require_same_shape(grad_output.shape(), {g.batch, g.filters, g.out_h, g.out_w},
                     "conv2d_backward grad_output");
  Tensor grad_in;
  if (need_input_grad) grad_in = Tensor(input.shape());
  kernels::conv2d_backward(g, input.raw(), kernel.tensor.raw(), grad_output.raw(),
                           need_input_grad ? grad_in.raw() : nullptr,
                           kernel.tensor.ensure_grad().data(), bias.tensor.ensure_grad().data());
  return grad_in;
}

Shape maxpool2d_output_shape(const Shape& input, std::size_t pool_h, std::size_t pool_w) {
  if (pool_h == 0 || pool_w == 0) throw ArgumentError("maxpool2d: pool size of 0");
  if (input.size() != 4) throw DimensionError("maxpool2d: expected rank 4, got " + shape_str(input));
  if (input[2] < pool_h || input[3] < pool_w) {
    throw DimensionError("maxpool2d: input " + shape_str(input) + " smaller than pool " +
                         std::to_string(pool_h) + "x" + std::to_string(pool_w));
  }
  return {input[0], input[1], input[2] / pool_h, input[3] / pool_w};
}

PoolResult maxpool2d(const Tensor& input, std::size_t pool_h, std::size_t pool_w) {
  const Shape out_shape = maxpool2d_output_shape(input.shape(), pool_h, pool_w);
  PoolGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
                 pool_h,       pool_w,       out_shape[2], out_shape[3]};
  PoolResult r{Tensor(out_shape), std::vector<std::uint32_t>(shape_numel(out_shape))};
  kernels::maxpool_forward(g, input.raw(), r.output.raw(), r.argmax.data());
  return r;
}

Tensor maxpool2d_backward(const Shape& input_shape, std::span<const std::uint32_t> argmax,
                          const Tensor& grad_output) {
  if (argmax.size() != grad_output.size()) {
    throw DimensionError("maxpool2d_backward: argmax/grad size mismatch");
  }
  Tensor grad_in(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad_in[argmax[i]] += grad_output[i];
  return grad_in;
}

PoolResult global_max(const Tensor& input) {
  require_rank(input, 4, "global_max");
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t plane = input.dim(2) * input.dim(3);
  PoolResult r{Tensor({input.dim(0), input.dim(1)}), std::vector<std::uint32_t>(planes)};
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = input.raw() + p * plane;
    std::size_t best = 0;
    for (std::size_t i = 1; i < plane; ++i) {
      if (src[i] > src[best]) best = i;
    }
    r.output[p] = src[best];
    r.argmax[p] = static_cast<std::uint32_t>(p * plane + best);
  }
  return r;
}

Tensor dense(const Tensor& input, const Parameter& weight, const Parameter& bias) {
  require_rank(input, 2, "dense");
  if (weight.tensor.rank() != 2 || weight.tensor.dim(0) != input.dim(1)) {
    throw DimensionError("dense: input " + shape_str(input.shape()) + " vs weight " +
                         shape_str(weight.tensor.shape()));
  }
  const std::size_t n = input.dim(0), d_in = input.dim(1), d_out = weight.tensor.dim(1);
  check_bias(bias.tensor, d_out, "dense");
  Tensor out({n, d_out});
  kernels::dense_forward(n, d_in, d_out, input.raw(), weight.tensor.raw(), bias.tensor.raw(),
                         out.raw());
  out.check_finite("dense output");
  return out;
}

Tensor dense_backward(const Tensor& input, Parameter& weight, Parameter& bias,
                      const Tensor& grad_output, bool need_input_grad) {
  const std::size_t n = input.dim(0), d_in = input.dim(1), d_out = weight.tensor.dim(1);
  require_same_shape(grad_output.shape(), {n, d_out}, "dense_backward grad_output");
  Tensor grad_in;
  if (need_input_grad) grad_in = Tensor(input.shape());
  kernels::dense_backward(n, d_in, d_out, input.raw(), weight.tensor.raw(), grad_output.raw(),
                          need_input_grad ? grad_in.raw() : nullptr,
                          weight.tensor.ensure_grad().data(), bias.tensor.ensure_grad().data());
  return grad_in;
}

double activate(double x, Activation kind) {
  switch (kind) {
    case Activation::kRelu:
      return x > 0.0 ? x : 0.0;
    case Activation::kElu:
      return x > 0.0 ? x : std::expm1(x);
    case Activation::kLinear:
      break;
  }
  return x;
}

Tensor activation(const Tensor& input, Activation kind) {
  Tensor out(input.shape());
  const double* src = input.raw();
  double* dst = out.raw();
  const std::size_t n = input.size();
  for (std::size_t i = 0; i < n; ++i) dst[i] = activate(src[i], kind);
  return out;
}

Tensor activation_backward(const Tensor& output, Activation kind, const Tensor& grad_output) {
  require_same_shape(output.shape(), grad_output.shape(), "activation_backward");
  Tensor g(output.shape());
  const std::size_t n = output.size();
  const double* y = output.raw();
  const double* gy = grad_output.raw();
  double* gx = g.raw();
  switch (kind) {
    case Activation::kRelu:
      for (std::size_t i = 0; i < n; ++i) gx[i] = y[i] > 0.0 ? gy[i] : 0.0;
      break;
    case Activation::kElu:
      // For x <= 0, y = e^x - 1 so dy/dx = y + 1.
      for (std::size_t i = 0; i < n; ++i) gx[i] = y[i] > 0.0 ? gy[i] : gy[i] * (y[i] + 1.0);
      break;
    case Activation::kLinear:
      std::copy(gy, gy + n, gx);
      break;
  }
  return g;
}

namespace {

// Shared body; `update` receives the new running statistics in train mode.
Tensor batchnorm_impl(const Tensor& input, const Parameter& gamma, const Parameter& beta,
                      Mode mode, const RunningStats& stats, RunningStats* update,
                      BatchNormCache* cache) {
  if (input.rank() != 4 && input.rank() != 2) {
    throw DimensionError("batchnorm: expected rank 2 or 4, got " + shape_str(input.shape()));
  }
  const std::size_t n = input.dim(0), channels = input.dim(1);
  const std::size_t plane = channel_plane(input.shape());
  check_bias(gamma.tensor, channels, "batchnorm gamma");
  check_bias(beta.tensor, channels, "batchnorm beta");
  if (stats.mean.size() != channels || stats.var.size() != channels) {
    throw DimensionError("batchnorm: running stats sized for " +
                         std::to_string(stats.mean.size()) + " channels, input has " +
                         std::to_string(channels));
  }

  Tensor out(input.shape());
  Tensor xhat;
  if (cache) xhat = Tensor(input.shape());
  std::vector<double> inv_std(channels);
  const double count = static_cast<double>(n * plane);
  for (std::size_t c = 0; c < channels; ++c) {
    double mean, var;
    if (mode == Mode::kTrain) {
      double sum = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const double* x = input.raw() + (s * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) sum += x[i];
      }
      mean = sum / count;
      double sq = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const double* x = input.raw() + (s * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) sq += (x[i] - mean) * (x[i] - mean);
      }
      var = sq / count;
      if (update) {
        update->mean[c] = kBatchNormMomentum * stats.mean[c] + (1.0 - kBatchNormMomentum) * mean;
        update->var[c] = kBatchNormMomentum * stats.var[c] + (1.0 - kBatchNormMomentum) * var;
      }
    } else {
      mean = stats.mean[c];
      var = stats.var[c];
    }
    inv_std[c] = 1.0 / std::sqrt(var + kBatchNormEpsilon);
    const double gm = gamma.tensor[c], bt = beta.tensor[c];
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t off = (s * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double h = (input[off + i] - mean) * inv_std[c];
        if (cache) xhat[off + i] = h;
        out[off + i] = gm * h + bt;
      }
    }
  }
  out.check_finite("batchnorm output");
  if (cache) {
    cache->mode = mode;
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

}  // namespace

Tensor batchnorm(const Tensor& input, const Parameter& gamma, const Parameter& beta, Mode mode,
                 RunningStats& stats, BatchNormCache* cache) {
  return batchnorm_impl(input, gamma, beta, mode, stats, &stats, cache);
}

Tensor batchnorm_infer(const Tensor& input, const Parameter& gamma, const Parameter& beta,
                       const RunningStats& stats) {
  return batchnorm_impl(input, gamma, beta, Mode::kEval, stats, nullptr, nullptr);
}

Tensor batchnorm_backward(const BatchNormCache& cache, Parameter& gamma, Parameter& beta,
                          const Tensor& grad_output, bool need_input_grad) {
  const Tensor& xhat = cache.xhat;
  require_same_shape(xhat.shape(), grad_output.shape(), "batchnorm_backward");
  const std::size_t n = xhat.dim(0), channels = xhat.dim(1);
  const std::size_t plane = channel_plane(xhat.shape());
  const double count = static_cast<double>(n * plane);
  auto g_gamma = gamma.tensor.ensure_grad();
  auto g_beta = beta.tensor.ensure_grad();
  Tensor grad_in;
  if (need_input_grad) grad_in = Tensor(xhat.shape());

  for (std::size_t c = 0; c < channels; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t off = (s * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += grad_output[off + i];
        sum_dy_xhat += grad_output[off + i] * xhat[off + i];
      }
    }
    g_gamma[c] += sum_dy_xhat;
    g_beta[c] += sum_dy;
    if (!need_input_grad) continue;
    const double k = gamma.tensor[c] * cache.inv_std[c];
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t off = (s * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        if (cache.mode == Mode::kTrain) {
          grad_in[off + i] =
              k * (grad_output[off + i] - sum_dy / count - xhat[off + i] * sum_dy_xhat / count);
        } else {
          grad_in[off + i] = k * grad_output[off + i];
        }
      }
    }
  }
  return grad_in;
}

Tensor dropout(const Tensor& input, double rate, Mode mode, SeededRng& rng,
               std::vector<double>* mask) {
  if (!(rate >= 0.0) || rate >= 1.0) {
    throw ArgumentError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::kEval || rate == 0.0) {
    if (mask) mask->assign(input.size(), 1.0);
    return input.reshaped(input.shape());
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor out(input.shape());
  std::vector<double> local;
  std::vector<double>& m = mask ? *mask : local;
  m.resize(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    m[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out[i] = input[i] * m[i];
  }
  return out;
}

Tensor dropout_backward(std::span<const double> mask, const Tensor& grad_output) {
  if (mask.size() != grad_output.size()) throw DimensionError("dropout_backward: mask size");
  Tensor g(grad_output.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) g[i] = grad_output[i] * mask[i];
  return g;
}

Tensor softmax_rows(const Tensor& logits) {
  require_rank(logits, 2, "softmax");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor probs(logits.shape());
  for (std::size_t r = 0; r < n; ++r) {
    const double* z = logits.raw() + r * k;
    double* p = probs.raw() + r * k;
    const double mx = *std::max_element(z, z + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = std::exp(z[j] - mx);
      sum += p[j];
    }
    for (std::size_t j = 0; j < k; ++j) p[j] /= sum;
  }
  return probs;
}

XentResult softmax_xent(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax_xent");
  logits.check_finite("softmax_xent logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw DimensionError("softmax_xent: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
  }
  XentResult r;
  r.probs = softmax_rows(logits);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw ArgumentError("softmax_xent: label " + std::to_string(y) + " outside [0," +
                          std::to_string(k) + ")");
    }
    // log p_y = z_y - max - log(sum exp(z - max)), computed without forming p_y.
    const double* z = logits.raw() + i * k;
    const double mx = *std::max_element(z, z + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - mx);
    total -= z[y] - mx - std::log(sum);
  }
  r.loss = total / static_cast<double>(n);
  return r;
}

Tensor softmax_xent_grad(const Tensor& probs, std::span<const int> labels) {
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  Tensor g(probs.shape());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double target = static_cast<int>(j) == labels[i] ? 1.0 : 0.0;
      g[i * k + j] = (probs[i * k + j] - target) * inv_n;
    }
  }
  return g;
}

}  // namespace fsa::ndgrad
