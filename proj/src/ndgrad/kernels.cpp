// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/ndgrad/kernels.hpp"

// Eigen's own threading changes GEMM blocking with the thread count.
#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>
#include <algorithm>
#include <limits>
#include <vector>

namespace fsa::ndgrad::kernels {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// Samples per partial sum in batch reductions. Fixed, so the summation order
// never depends on how many threads run.
constexpr std::size_t kReduceChunk = 8;

// col[(c*kh + i)*kw + j][y*out_w + x] = input[c][y - pad_top + i][x - pad_left + j]
void im2col(const ConvGeometry& g, const double* in, double* col) {
  const std::size_t plane = g.out_plane();
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const double* src = in + c * g.in_plane();
    for (std::size_t i = 0; i < g.kernel_h; ++i) {
      for (std::size_t j = 0; j < g.kernel_w; ++j) {
        double* dst = col + ((c * g.kernel_h + i) * g.kernel_w + j) * plane;
        for (std::size_t y = 0; y < g.out_h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + i) -
                                    static_cast<std::ptrdiff_t>(g.pad_top);
          double* row = dst + y * g.out_w;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(g.in_h)) {
            std::fill(row, row + g.out_w, 0.0);
            continue;
          }
          const double* srow = src + static_cast<std::size_t>(sy) * g.in_w;
          for (std::size_t x = 0; x < g.out_w; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + j) -
                                      static_cast<std::ptrdiff_t>(g.pad_left);
            row[x] = (sx < 0 || sx >= static_cast<std::ptrdiff_t>(g.in_w))
                         ? 0.0
                         : srow[static_cast<std::size_t>(sx)];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* col, double* in) {
  const std::size_t plane = g.out_plane();
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    double* dst = in + c * g.in_plane();
    for (std::size_t i = 0; i < g.kernel_h; ++i) {
      for (std::size_t j = 0; j < g.kernel_w; ++j) {
        const double* src = col + ((c * g.kernel_h + i) * g.kernel_w + j) * plane;
        for (std::size_t y = 0; y < g.out_h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + i) -
                                    static_cast<std::ptrdiff_t>(g.pad_top);
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          double* drow = dst + static_cast<std::size_t>(sy) * g.in_w;
          const double* row = src + y * g.out_w;
          for (std::size_t x = 0; x < g.out_w; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + j) -
                                      static_cast<std::ptrdiff_t>(g.pad_left);
            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
            drow[static_cast<std::size_t>(sx)] += row[x];
          }
        }
      }
    }
  }
}

std::size_t chunk_count(std::size_t n) { return (n + kReduceChunk - 1) / kReduceChunk; }

// Eigen sends vector-shaped and tiny products down GEMV or coefficient-wise
// paths whose reduction order follows pointer alignment. Those shapes go
// through this fixed-order loop instead; larger ones use the blocked GEMM,
// whose order depends only on the shapes.
bool use_blocked_gemm(std::size_t m, std::size_t n, std::size_t k) {
  return m >= 2 && n >= 2 && m + n + k >= 24;
}

// C[m,n] (+)= sum_k op(A)[m,k] op(B)[k,n], all row-major. op transposes when
// the flag is set: A is stored [k,m] and B is stored [n,k].
void gemm(const double* a, bool trans_a, const double* b, bool trans_b, double* c, std::size_t m,
          std::size_t n, std::size_t k, bool accumulate) {
  if (use_blocked_gemm(m, n, k)) {
    MapMat out(c, m, n);
    auto run = [&](const auto& lhs, const auto& rhs) {
      if (accumulate) {
        out.noalias() += lhs * rhs;
      } else {
        out.noalias() = lhs * rhs;
      }
    };
    const ConstMapMat am(a, trans_a ? k : m, trans_a ? m : k);
    const ConstMapMat bm(b, trans_b ? n : k, trans_b ? k : n);
    if (trans_a && trans_b) {
      run(am.transpose(), bm.transpose());
    } else if (trans_a) {
      run(am.transpose(), bm);
    } else if (trans_b) {
      run(am, bm.transpose());
    } else {
      run(am, bm);
    }
    return;
  }
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = trans_a ? a[p * m + i] : a[i * k + p];
      for (std::size_t j = 0; j < n; ++j) {
        crow[j] += av * (trans_b ? b[j * k + p] : b[p * n + j]);
      }
    }
  }
}

double row_sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, const double* input, const double* kernel,
                    const double* bias, double* output) {
  const auto n = static_cast<std::ptrdiff_t>(g.batch);
  const std::size_t plane = g.out_plane();
  const std::size_t patch = g.patch();
#pragma omp parallel
  {
    std::vector<double> col(patch * plane);
#pragma omp for schedule(static)
    for (std::ptrdiff_t s = 0; s < n; ++s) {
      im2col(g, input + s * g.in_channels * g.in_plane(), col.data());
      double* out = output + s * g.filters * plane;
      gemm(kernel, false, col.data(), false, out, g.filters, plane, patch, false);
      for (std::size_t f = 0; f < g.filters; ++f) {
        double* row = out + f * plane;
        for (std::size_t i = 0; i < plane; ++i) row[i] += bias[f];
      }
    }
  }
}

void conv2d_backward(const ConvGeometry& g, const double* input, const double* kernel,
                     const double* grad_output, double* grad_input, double* grad_kernel,
                     double* grad_bias) {
  const std::size_t plane = g.out_plane();
  const std::size_t patch = g.patch();
  const std::size_t chunks = chunk_count(g.batch);
  std::vector<double> part_k(chunks * g.filters * patch, 0.0);
  std::vector<double> part_b(chunks * g.filters, 0.0);

#pragma omp parallel
  {
    std::vector<double> col(patch * plane);
    std::vector<double> gcol(grad_input ? patch * plane : 0);
#pragma omp for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
      double* pk = part_k.data() + c * g.filters * patch;
      double* pb = part_b.data() + c * g.filters;
      const std::size_t lo = static_cast<std::size_t>(c) * kReduceChunk;
      const std::size_t hi = std::min(g.batch, lo + kReduceChunk);
      for (std::size_t s = lo; s < hi; ++s) {
        const double* in_s = input + s * g.in_channels * g.in_plane();
        const double* go = grad_output + s * g.filters * plane;
        im2col(g, in_s, col.data());
        gemm(go, false, col.data(), true, pk, g.filters, patch, plane, true);
        for (std::size_t f = 0; f < g.filters; ++f) pb[f] += row_sum(go + f * plane, plane);
        if (grad_input) {
          gemm(kernel, true, go, false, gcol.data(), patch, plane, g.filters, false);
          col2im_add(g, gcol.data(), grad_input + s * g.in_channels * g.in_plane());
        }
      }
    }
  }
  for (std::size_t c = 0; c < chunks; ++c) {
    const double* pk = part_k.data() + c * g.filters * patch;
    for (std::size_t i = 0; i < g.filters * patch; ++i) grad_kernel[i] += pk[i];
    const double* pb = part_b.data() + c * g.filters;
    for (std::size_t f = 0; f < g.filters; ++f) grad_bias[f] += pb[f];
  }
}

void dense_forward(std::size_t n, std::size_t d_in, std::size_t d_out, const double* x,
                   const double* weight, const double* bias, double* y) {
  gemm(x, false, weight, false, y, n, d_out, d_in, false);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d_out; ++j) y[r * d_out + j] += bias[j];
}

void dense_backward(std::size_t n, std::size_t d_in, std::size_t d_out, const double* x,
                    const double* weight, const double* grad_y, double* grad_x,
                    double* grad_weight, double* grad_bias) {
  gemm(x, true, grad_y, false, grad_weight, d_in, d_out, n, true);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d_out; ++j) grad_bias[j] += grad_y[r * d_out + j];
  if (grad_x) gemm(grad_y, false, weight, true, grad_x, n, d_in, d_out, true);
}

void maxpool_forward(const PoolGeometry& g, const double* input, double* output,
                     std::uint32_t* argmax) {
  const auto planes = static_cast<std::ptrdiff_t>(g.batch * g.channels);
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < planes; ++p) {
    const std::size_t base = static_cast<std::size_t>(p) * in_plane;
    const double* src = input + base;
    for (std::size_t y = 0; y < g.out_h; ++y) {
      for (std::size_t x = 0; x < g.out_w; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        bool first = true;
        // Row-major scan with strict '>' keeps the lowest linear index on ties.
        for (std::size_t i = 0; i < g.pool_h; ++i) {
          const std::size_t row = (y * g.pool_h + i) * g.in_w + x * g.pool_w;
          for (std::size_t j = 0; j < g.pool_w; ++j) {
            const double v = src[row + j];
            if (first || v > best) {
              best = v;
              best_idx = row + j;
              first = false;
            }
          }
        }
        const std::size_t o = static_cast<std::size_t>(p) * out_plane + y * g.out_w + x;
        output[o] = best;
        argmax[o] = static_cast<std::uint32_t>(base + best_idx);
      }
    }
  }
}

}  // namespace fsa::ndgrad::kernels
