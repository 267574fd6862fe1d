// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

// Parallel kernels against the serial reference on layer shapes from the
// evaluated models.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "fsa/common/rng.hpp"
#include "fsa/ndgrad/kernels.hpp"

namespace {

using fsa::ndgrad::ConvGeometry;
using fsa::ndgrad::PoolGeometry;
namespace kern = fsa::ndgrad::kernels;
namespace ref = fsa::ndgrad::reference;

std::vector<double> random_buffer(std::size_t n, std::uint64_t seed) {
  fsa::SeededRng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// 3x3 same convolution over [batch, channels, side, side].
ConvGeometry conv_shape(benchmark::State& state) {
  ConvGeometry g;
  g.batch = static_cast<std::size_t>(state.range(0));
  g.in_channels = static_cast<std::size_t>(state.range(1));
  g.filters = static_cast<std::size_t>(state.range(2));
  g.in_h = g.in_w = g.out_h = g.out_w = static_cast<std::size_t>(state.range(3));
  g.kernel_h = g.kernel_w = 3;
  g.pad_top = g.pad_left = 1;
  return g;
}

template <bool kParallel>
void BM_ConvForward(benchmark::State& state) {
  const ConvGeometry g = conv_shape(state);
  const auto x = random_buffer(g.batch * g.in_channels * g.in_plane(), 1);
  const auto w = random_buffer(g.filters * g.patch(), 2);
  const auto b = random_buffer(g.filters, 3);
  std::vector<double> y(g.batch * g.filters * g.out_plane());
  for (auto _ : state) {
    if constexpr (kParallel)
      kern::conv2d_forward(g, x.data(), w.data(), b.data(), y.data());
    else
      ref::conv2d_forward(g, x.data(), w.data(), b.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool kParallel>
void BM_ConvBackward(benchmark::State& state) {
  const ConvGeometry g = conv_shape(state);
  const auto x = random_buffer(g.batch * g.in_channels * g.in_plane(), 1);
  const auto w = random_buffer(g.filters * g.patch(), 2);
  const auto gy = random_buffer(g.batch * g.filters * g.out_plane(), 4);
  std::vector<double> gx(x.size()), gw(w.size()), gb(g.filters);
  for (auto _ : state) {
    if constexpr (kParallel)
      kern::conv2d_backward(g, x.data(), w.data(), gy.data(), gx.data(), gw.data(), gb.data());
    else
      ref::conv2d_backward(g, x.data(), w.data(), gy.data(), gx.data(), gw.data(), gb.data());
    benchmark::DoNotOptimize(gw.data());
  }
}

template <bool kParallel>
void BM_Dense(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d_in = static_cast<std::size_t>(state.range(1));
  const auto d_out = static_cast<std::size_t>(state.range(2));
  const auto x = random_buffer(n * d_in, 1);
  const auto w = random_buffer(d_in * d_out, 2);
  const auto b = random_buffer(d_out, 3);
  const auto gy = random_buffer(n * d_out, 4);
  std::vector<double> y(n * d_out), gx(x.size()), gw(w.size()), gb(d_out);
  for (auto _ : state) {
    if constexpr (kParallel) {
      kern::dense_forward(n, d_in, d_out, x.data(), w.data(), b.data(), y.data());
      kern::dense_backward(n, d_in, d_out, x.data(), w.data(), gy.data(), gx.data(), gw.data(),
                           gb.data());
    } else {
      ref::dense_forward(n, d_in, d_out, x.data(), w.data(), b.data(), y.data());
      ref::dense_backward(n, d_in, d_out, x.data(), w.data(), gy.data(), gx.data(), gw.data(),
                          gb.data());
    }
    benchmark::DoNotOptimize(gw.data());
  }
}

template <bool kParallel>
void BM_MaxPool(benchmark::State& state) {
  PoolGeometry g;
  g.batch = static_cast<std::size_t>(state.range(0));
  g.channels = static_cast<std::size_t>(state.range(1));
  g.in_h = g.in_w = static_cast<std::size_t>(state.range(2));
  g.pool_h = g.pool_w = 2;
  g.out_h = g.out_w = g.in_h / 2;
  const auto x = random_buffer(g.batch * g.channels * g.in_h * g.in_w, 1);
  std::vector<double> y(g.batch * g.channels * g.out_h * g.out_w);
  std::vector<std::uint32_t> arg(y.size());
  for (auto _ : state) {
    if constexpr (kParallel)
      kern::maxpool_forward(g, x.data(), y.data(), arg.data());
    else
      ref::maxpool_forward(g, x.data(), y.data(), arg.data());
    benchmark::DoNotOptimize(y.data());
  }
}

// {batch, in_channels, filters, side}: first VGG block on a 128x128 patch,
// and a deeper block.
#define CONV_ARGS ->Args({8, 1, 32, 128})->Args({8, 32, 32, 32})->Unit(benchmark::kMillisecond)
BENCHMARK(BM_ConvForward<false>) CONV_ARGS;
BENCHMARK(BM_ConvForward<true>) CONV_ARGS;
BENCHMARK(BM_ConvBackward<false>) CONV_ARGS;
BENCHMARK(BM_ConvBackward<true>) CONV_ARGS;
#undef CONV_ARGS

#define DENSE_ARGS ->Args({256, 1024, 128})->Args({64, 4096, 10})->Unit(benchmark::kMicrosecond)
BENCHMARK(BM_Dense<false>) DENSE_ARGS;
BENCHMARK(BM_Dense<true>) DENSE_ARGS;
#undef DENSE_ARGS

#define POOL_ARGS ->Args({8, 32, 128})->Unit(benchmark::kMicrosecond)
BENCHMARK(BM_MaxPool<false>) POOL_ARGS;
BENCHMARK(BM_MaxPool<true>) POOL_ARGS;
#undef POOL_ARGS

}  // namespace

BENCHMARK_MAIN();
