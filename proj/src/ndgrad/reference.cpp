// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include <limits>

#include "fsa/ndgrad/kernels.hpp"

namespace fsa::ndgrad::reference {

void conv2d_forward(const ConvGeometry& g, const double* input, const double* kernel,
                    const double* bias, double* output) {
  for (std::size_t s = 0; s < g.batch; ++s) {
    for (std::size_t f = 0; f < g.filters; ++f) {
      for (std::size_t y = 0; y < g.out_h; ++y) {
        for (std::size_t x = 0; x < g.out_w; ++x) {
          double acc = bias[f];
          for (std::size_t c = 0; c < g.in_channels; ++c) {
            for (std::size_t i = 0; i < g.kernel_h; ++i) {
              const long sy = static_cast<long>(y + i) - static_cast<long>(g.pad_top);
              if (sy < 0 || sy >= static_cast<long>(g.in_h)) continue;
              for (std::size_t j = 0; j < g.kernel_w; ++j) {
                const long sx = static_cast<long>(x + j) - static_cast<long>(g.pad_left);
                if (sx < 0 || sx >= static_cast<long>(g.in_w)) continue;
                acc += kernel[((f * g.in_channels + c) * g.kernel_h + i) * g.kernel_w + j] *
                       input[((s * g.in_channels + c) * g.in_h + sy) * g.in_w + sx];
              }
            }
          }
          output[((s * g.filters + f) * g.out_h + y) * g.out_w + x] = acc;
        }
      }
    }
  }
}

void conv2d_backward(const ConvGeometry& g, const double* input, const double* kernel,
                     const double* grad_output, double* grad_input, double* grad_kernel,
                     double* grad_bias) {
  for (std::size_t s = 0; s < g.batch; ++s) {
    for (std::size_t f = 0; f < g.filters; ++f) {
      for (std::size_t y = 0; y < g.out_h; ++y) {
        for (std::size_t x = 0; x < g.out_w; ++x) {
          const double go = grad_output[((s * g.filters + f) * g.out_h + y) * g.out_w + x];
          grad_bias[f] += go;
          for (std::size_t c = 0; c < g.in_channels; ++c) {
            for (std::size_t i = 0; i < g.kernel_h; ++i) {
              const long sy = static_cast<long>(y + i) - static_cast<long>(g.pad_top);
              if (sy < 0 || sy >= static_cast<long>(g.in_h)) continue;
              for (std::size_t j = 0; j < g.kernel_w; ++j) {
                const long sx = static_cast<long>(x + j) - static_cast<long>(g.pad_left);
                if (sx < 0 || sx >= static_cast<long>(g.in_w)) continue;
                const std::size_t ki = ((f * g.in_channels + c) * g.kernel_h + i) * g.kernel_w + j;
                const std::size_t ii = ((s * g.in_channels + c) * g.in_h + sy) * g.in_w + sx;
                grad_kernel[ki] += go * input[ii];
                if (grad_input) grad_input[ii] += go * kernel[ki];
              }
            }
          }
        }
      }
    }
  }
}

void dense_forward(std::size_t n, std::size_t d_in, std::size_t d_out, const double* x,
                   const double* weight, const double* bias, double* y) {
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t o = 0; o < d_out; ++o) {
      double acc = bias[o];
      for (std::size_t i = 0; i < d_in; ++i) acc += x[r * d_in + i] * weight[i * d_out + o];
      y[r * d_out + o] = acc;
    }
  }
}

void dense_backward(std::size_t n, std::size_t d_in, std::size_t d_out, const double* x,
                    const double* weight, const double* grad_y, double* grad_x,
                    double* grad_weight, double* grad_bias) {
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t o = 0; o < d_out; ++o) {
      const double gy = grad_y[r * d_out + o];
      grad_bias[o] += gy;
      for (std::size_t i = 0; i < d_in; ++i) {
        grad_weight[i * d_out + o] += x[r * d_in + i] * gy;
        if (grad_x) grad_x[r * d_in + i] += weight[i * d_out + o] * gy;
      }
    }
  }
}

void maxpool_forward(const PoolGeometry& g, const double* input, double* output,
                     std::uint32_t* argmax) {
  for (std::size_t p = 0; p < g.batch * g.channels; ++p) {
    for (std::size_t y = 0; y < g.out_h; ++y) {
      for (std::size_t x = 0; x < g.out_w; ++x) {
        std::size_t best = p * g.in_h * g.in_w + (y * g.pool_h) * g.in_w + x * g.pool_w;
        for (std::size_t i = 0; i < g.pool_h; ++i) {
          for (std::size_t j = 0; j < g.pool_w; ++j) {
            const std::size_t idx = p * g.in_h * g.in_w + (y * g.pool_h + i) * g.in_w +
                                    x * g.pool_w + j;
            if (input[idx] > input[best]) best = idx;
          }
        }
        output[(p * g.out_h + y) * g.out_w + x] = input[best];
        argmax[(p * g.out_h + y) * g.out_w + x] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

}  // namespace fsa::ndgrad::reference
