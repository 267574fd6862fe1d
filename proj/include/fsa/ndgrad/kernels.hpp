// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

// Raw compute kernels behind the differentiable ops.
//
// Two implementations share one signature set:
//   fsa::ndgrad::kernels    OpenMP over the batch, im2col + GEMM
//   fsa::ndgrad::reference  direct serial loops, kept for tests and benches
//
// All buffers are row-major NCHW (or [N, D] for dense). Batch reductions in
// the parallel path are summed in fixed-size chunks in sample order, so results
// are bitwise independent of the thread count.

#pragma once

#include <cstddef>
#include <cstdint>

namespace fsa::ndgrad {

struct ConvGeometry {
  std::size_t batch = 0, in_channels = 0, in_h = 0, in_w = 0;
  std::size_t filters = 0, kernel_h = 0, kernel_w = 0;
  std::size_t pad_top = 0, pad_left = 0;
  std::size_t out_h = 0, out_w = 0;

  std::size_t in_plane() const { return in_h * in_w; }
  std::size_t out_plane() const { return out_h * out_w; }
  std::size_t patch() const { return in_channels * kernel_h * kernel_w; }
};

struct PoolGeometry {
  std::size_t batch = 0, channels = 0, in_h = 0, in_w = 0;
  std::size_t pool_h = 0, pool_w = 0;
  std::size_t out_h = 0, out_w = 0;
};

namespace kernels {

void conv2d_forward(const ConvGeometry& g, const double* input, const double* kernel,
                    const double* bias, double* output);
// grad_input may be null when the input needs no gradient. grad_kernel and
// grad_bias are accumulated into (+=).
void conv2d_backward(const ConvGeometry& g, const double* input, const double* kernel,
                     const double* grad_output, double* grad_input, double* grad_kernel,
                     double* grad_bias);

void dense_forward(std::size_t n, std::size_t d_in, std::size_t d_out, const double* x,
                   const double* weight, const double* bias, double* y);
void dense_backward(std::size_t n, std::size_t d_in, std::size_t d_out, const double* x,
                    const double* weight, const double* grad_y, double* grad_x,
                    double* grad_weight, double* grad_bias);

// argmax receives the flat input index of each output's winner.
void maxpool_forward(const PoolGeometry& g, const double* input, double* output,
                     std::uint32_t* argmax);

}  // namespace kernels

namespace reference {

void conv2d_forward(const ConvGeometry& g, const double* input, const double* kernel,
                    const double* bias, double* output);
void conv2d_backward(const ConvGeometry& g, const double* input, const double* kernel,
                     const double* grad_output, double* grad_input, double* grad_kernel,
                     double* grad_bias);
void dense_forward(std::size_t n, std::size_t d_in, std::size_t d_out, const double* x,
                   const double* weight, const double* bias, double* y);
void dense_backward(std::size_t n, std::size_t d_in, std::size_t d_out, const double* x,
                    const double* weight, const double* grad_y, double* grad_x,
                    double* grad_weight, double* grad_bias);
void maxpool_forward(const PoolGeometry& g, const double* input, double* output,
                     std::uint32_t* argmax);

}  // namespace reference

}  // namespace fsa::ndgrad
