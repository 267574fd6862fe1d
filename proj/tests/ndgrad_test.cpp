// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>
#include <omp.h>

#include <cmath>
#include <numeric>
#include <string>

#include "fsa/common/errors.hpp"
#include "fsa/ndgrad/kernels.hpp"
#include "fsa/ndgrad/ops.hpp"
#include "fsa/ndgrad/sgd.hpp"
#include "gradcheck.hpp"

using namespace fsa;
using namespace fsa::ndgrad;
using fsa::testing::random_tensor;

namespace {

Parameter param(Shape shape, std::vector<double> values) {
  return Parameter{"p", Tensor(std::move(shape), std::move(values))};
}

double worst_over_trials(double (*check)(std::uint64_t), int trials) {
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    worst = std::max(worst, check(derive_seed(0x5eed, {static_cast<std::uint64_t>(t)})));
  }
  return worst;
}

}  // namespace

TEST_CASE("tensor rejects zero dims and mismatched data") {
  CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>(3)), DimensionError);
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK_THROWS_AS(t.grad(), StateError);
  t.ensure_grad();
  CHECK(t.grad().size() == 6);
  t[1] = std::nan("");
  CHECK_THROWS_AS(t.check_finite("t"), NumericError);
}

TEST_CASE("conv2d identity kernel") {
  SeededRng rng(1);
  Tensor x = random_tensor({1, 1, 3, 3}, rng);
  auto k = param({1, 1, 1, 1}, {1.0});
  auto b = param({1}, {0.0});
  const Tensor y = conv2d(x, k, b, Padding::kValid);
  CHECK(y.shape() == x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("conv2d ones kernel sums 2x2 windows") {
  Tensor x({1, 1, 4, 4}, 1.0);
  auto k = param({1, 1, 2, 2}, {1, 1, 1, 1});
  auto b = param({1}, {0.0});
  const Tensor y = conv2d(x, k, b, Padding::kValid);
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  for (double v : y.values()) CHECK(v == 4.0);
}

TEST_CASE("conv2d output shapes and errors") {
  CHECK(conv2d_output_shape({2, 3, 7, 9}, {4, 3, 3, 5}, Padding::kValid) == Shape{2, 4, 5, 5});
  CHECK(conv2d_output_shape({2, 3, 7, 9}, {4, 3, 3, 5}, Padding::kSame) == Shape{2, 4, 7, 9});
  try {
    conv2d_output_shape({1, 2, 5, 5}, {1, 3, 3, 3}, Padding::kValid);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[1,2,5,5]") != std::string::npos);
    CHECK(msg.find("[1,3,3,3]") != std::string::npos);
  }
  CHECK_THROWS_AS(conv2d_output_shape({1, 1, 2, 2}, {1, 1, 3, 3}, Padding::kValid),
                  DimensionError);
}

TEST_CASE("conv2d kernel gradient of sum(output) on 1x2x5x5") {
  SeededRng rng(7);
  Tensor x = random_tensor({1, 2, 5, 5}, rng);
  Parameter k{"k", random_tensor({3, 2, 3, 3}, rng)};
  Parameter b{"b", random_tensor({3}, rng)};
  const Tensor ones(conv2d_output_shape(x.shape(), k.tensor.shape(), Padding::kValid), 1.0);
  conv2d_backward(x, k, b, Padding::kValid, ones, false);
  auto loss = [&] {
    const Tensor y = conv2d(x, k, b, Padding::kValid);
    return std::accumulate(y.values().begin(), y.values().end(), 0.0);
  };
  const auto numeric = fsa::testing::numeric_gradient(k.tensor.data(), loss);
  CHECK(fsa::testing::relative_error(k.tensor.grad(), numeric) < 1e-6);
}

TEST_CASE("finite-difference checks per op") {
  constexpr int kTrials = 25;
  CHECK(worst_over_trials(fsa::testing::gradcheck_conv2d, kTrials) < 1e-6);
  CHECK(worst_over_trials(fsa::testing::gradcheck_maxpool, kTrials) < 1e-6);
  CHECK(worst_over_trials(fsa::testing::gradcheck_dense, kTrials) < 1e-6);
  CHECK(worst_over_trials(fsa::testing::gradcheck_activation, kTrials) < 1e-6);
  CHECK(worst_over_trials(fsa::testing::gradcheck_batchnorm, kTrials) < 1e-5);
  CHECK(worst_over_trials(fsa::testing::gradcheck_softmax_xent, kTrials) < 1e-6);
}

TEST_CASE("parallel kernels agree with the serial reference") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SeededRng rng(seed);
    ConvGeometry g;
    g.batch = 1 + rng.below(11);
    g.in_channels = 1 + rng.below(4);
    g.in_h = 3 + rng.below(8);
    g.in_w = 3 + rng.below(8);
    g.filters = 1 + rng.below(5);
    g.kernel_h = 1 + rng.below(3);
    g.kernel_w = 1 + rng.below(3);
    const bool same = rng.below(2) == 1;
    g.pad_top = same ? (g.kernel_h - 1) / 2 : 0;
    g.pad_left = same ? (g.kernel_w - 1) / 2 : 0;
    g.out_h = same ? g.in_h : g.in_h - g.kernel_h + 1;
    g.out_w = same ? g.in_w : g.in_w - g.kernel_w + 1;

    const Tensor x = random_tensor({g.batch, g.in_channels, g.in_h, g.in_w}, rng);
    const Tensor k = random_tensor({g.filters, g.in_channels, g.kernel_h, g.kernel_w}, rng);
    const Tensor b = random_tensor({g.filters}, rng);
    const std::size_t out_n = g.batch * g.filters * g.out_h * g.out_w;
    std::vector<double> y_fast(out_n), y_ref(out_n);
    kernels::conv2d_forward(g, x.raw(), k.raw(), b.raw(), y_fast.data());
    reference::conv2d_forward(g, x.raw(), k.raw(), b.raw(), y_ref.data());
    CHECK(fsa::testing::relative_error(y_fast, y_ref) < 1e-12);

    const Tensor go = random_tensor({out_n}, rng);
    std::vector<double> gi_fast(x.size()), gi_ref(x.size());
    std::vector<double> gk_fast(k.size()), gk_ref(k.size());
    std::vector<double> gb_fast(g.filters), gb_ref(g.filters);
    kernels::conv2d_backward(g, x.raw(), k.raw(), go.raw(), gi_fast.data(), gk_fast.data(),
                             gb_fast.data());
    reference::conv2d_backward(g, x.raw(), k.raw(), go.raw(), gi_ref.data(), gk_ref.data(),
                               gb_ref.data());
    CHECK(fsa::testing::relative_error(gi_fast, gi_ref) < 1e-12);
    CHECK(fsa::testing::relative_error(gk_fast, gk_ref) < 1e-12);
    CHECK(fsa::testing::relative_error(gb_fast, gb_ref) < 1e-12);
  }
}

TEST_CASE("conv backward is bitwise independent of thread count") {
  SeededRng rng(3);
  ConvGeometry g{.batch = 19, .in_channels = 3, .in_h = 9, .in_w = 8, .filters = 4,
                 .kernel_h = 3, .kernel_w = 3, .pad_top = 1, .pad_left = 1, .out_h = 9,
                 .out_w = 8};
  const Tensor x = random_tensor({g.batch, 3, 9, 8}, rng);
  const Tensor k = random_tensor({4, 3, 3, 3}, rng);
  const Tensor go = random_tensor({g.batch * 4 * 9 * 8}, rng);
  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    std::vector<double> gk(k.size()), gb(4), gi(x.size());
    kernels::conv2d_backward(g, x.raw(), k.raw(), go.raw(), gi.data(), gk.data(), gb.data());
    gk.insert(gk.end(), gi.begin(), gi.end());
    gk.insert(gk.end(), gb.begin(), gb.end());
    return gk;
  };
  const auto one = run(1);
  const auto four = run(4);
  omp_set_num_threads(omp_get_num_procs());
  CHECK(one == four);
}

TEST_CASE("maxpool examples") {
  const Tensor c({1, 2, 4, 6}, 3.25);
  const auto pc = maxpool2d(c, 2, 3);
  CHECK(pc.output.shape() == Shape{1, 2, 2, 2});
  for (double v : pc.output.values()) CHECK(v == 3.25);

  const Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  const auto p = maxpool2d(x, 2, 2);
  CHECK(p.output.shape() == Shape{1, 1, 1, 1});
  CHECK(p.output[0] == 4.0);

  CHECK(maxpool2d_output_shape({2, 3, 7, 9}, 2, 4) == Shape{2, 3, 3, 2});
  CHECK_THROWS_AS(maxpool2d(x, 0, 2), ArgumentError);
  CHECK_THROWS_AS(maxpool2d(x, 2, 0), ArgumentError);
}

TEST_CASE("maxpool ties route to the lowest index") {
  const Tensor x({1, 1, 2, 2}, {5, 5, 5, 5});
  const auto p = maxpool2d(x, 2, 2);
  CHECK(p.argmax[0] == 0);
  const Tensor g = maxpool2d_backward(x.shape(), p.argmax, Tensor({1, 1, 1, 1}, 1.0));
  CHECK(g.values() == std::vector<double>{1, 0, 0, 0});
}

TEST_CASE("dense examples") {
  SeededRng rng(2);
  const Tensor x = random_tensor({3, 4}, rng);
  Parameter eye{"w", Tensor({4, 4})};
  for (std::size_t i = 0; i < 4; ++i) eye.tensor[i * 4 + i] = 1.0;
  const Tensor y = dense(x, eye, param({4}, {0, 0, 0, 0}));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);

  const Tensor z = dense(Tensor({1, 2}, {1, 2}), param({2, 2}, {1, 0, 0, 1}), param({2}, {3, 3}));
  CHECK(z.values() == std::vector<double>{4, 5});
  CHECK_THROWS_AS(dense(x, param({3, 2}, std::vector<double>(6)), param({2}, {0, 0})),
                  DimensionError);
}

TEST_CASE("activation values") {
  CHECK(activate(-1.0, Activation::kRelu) == 0.0);
  CHECK(activate(2.0, Activation::kRelu) == 2.0);
  CHECK(activate(0.0, Activation::kElu) == 0.0);
  CHECK(activate(-1.0, Activation::kElu) == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-15));
  CHECK(activate(-1.0, Activation::kElu) == doctest::Approx(-0.63212).epsilon(1e-5));
  CHECK(activate(-3.5, Activation::kLinear) == -3.5);
}

TEST_CASE("batchnorm train normalizes and eval with unit stats is identity") {
  SeededRng rng(4);
  Tensor x = random_tensor({6, 2, 3, 3}, rng);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 3.0 * x[i] + ((i / 9) % 2 ? 10.0 : -4.0);
  const auto gamma = param({2}, {1, 1});
  const auto beta = param({2}, {0, 0});
  RunningStats stats(2);
  const Tensor y = batchnorm(x, gamma, beta, Mode::kTrain, stats, nullptr);
  for (std::size_t c = 0; c < 2; ++c) {
    double sum = 0.0, sq = 0.0, xs = 0.0, xsq = 0.0;
    for (std::size_t n = 0; n < 6; ++n)
      for (std::size_t j = 0; j < 9; ++j) {
        const std::size_t i = (n * 2 + c) * 9 + j;
        sum += y[i];
        sq += y[i] * y[i];
        xs += x[i];
        xsq += x[i] * x[i];
      }
    const double mean = sum / 54.0;
    const double var = sq / 54.0 - mean * mean;
    const double xvar = xsq / 54.0 - (xs / 54.0) * (xs / 54.0);
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - xvar / (xvar + kBatchNormEpsilon)) < 1e-6);
    CHECK(stats.mean[c] == doctest::Approx(0.1 * xs / 54.0).epsilon(1e-12));
  }

  RunningStats unit(2);
  const Tensor e = batchnorm(x, gamma, beta, Mode::kEval, unit, nullptr);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(e[i] == doctest::Approx(x[i] / std::sqrt(1.0 + kBatchNormEpsilon)).epsilon(1e-12));
  }
  CHECK(unit.mean == std::vector<double>{0, 0});
}

TEST_CASE("batchnorm accepts a single-sample batch") {
  const Tensor x({1, 1, 1, 1}, 2.0);
  RunningStats stats(1);
  const Tensor y = batchnorm(x, param({1}, {1}), param({1}, {0.5}), Mode::kTrain, stats, nullptr);
  CHECK(y[0] == 0.5);
}

TEST_CASE("dropout modes and rates") {
  SeededRng rng(5);
  const Tensor x = random_tensor({4, 5}, rng);
  std::vector<double> mask;
  CHECK(dropout(x, 0.0, Mode::kTrain, rng, &mask).values() == x.values());
  CHECK(dropout(x, 0.0, Mode::kEval, rng, nullptr).values() == x.values());
  CHECK(dropout(x, 0.5, Mode::kEval, rng, nullptr).values() == x.values());
  CHECK_THROWS_AS(dropout(x, 1.0, Mode::kTrain, rng, &mask), ArgumentError);
  CHECK_THROWS_AS(dropout(x, -0.1, Mode::kTrain, rng, &mask), ArgumentError);

  Tensor big({100000});
  for (double& v : big.values()) v = 1.0 + rng.uniform();
  const Tensor y = dropout(big, 0.5, Mode::kTrain, rng, &mask);
  std::size_t kept = 0;
  double in_sum = 0.0, out_sum = 0.0;
  for (std::size_t i = 0; i < big.size(); ++i) {
    kept += y[i] != 0.0;
    in_sum += big[i];
    out_sum += y[i];
  }
  const double frac = static_cast<double>(kept) / static_cast<double>(big.size());
  CHECK(frac >= 0.49);
  CHECK(frac <= 0.51);
  CHECK(std::abs(out_sum / in_sum - 1.0) < 0.02);
}

TEST_CASE("softmax_xent examples") {
  const Tensor eq({1, 10}, 0.37);
  const std::vector<int> label{3};
  const auto r = softmax_xent(eq, label);
  for (double p : r.probs.values()) CHECK(p == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(r.loss == doctest::Approx(std::log(10.0)).epsilon(1e-12));

  const auto big = softmax_xent(Tensor({1, 2}, {1000.0, 0.0}), std::vector<int>{0});
  CHECK(big.probs[0] == doctest::Approx(1.0));
  CHECK(big.probs[1] < 1e-300);
  CHECK(std::isfinite(big.loss));

  CHECK_THROWS_AS(softmax_xent(eq, std::vector<int>{10}), ArgumentError);
  CHECK_THROWS_AS(softmax_xent(eq, std::vector<int>{-1}), ArgumentError);
}

TEST_CASE("softmax rows sum to one for wide-ranging logits") {
  SeededRng rng(6);
  for (int t = 0; t < 200; ++t) {
    const Tensor logits = random_tensor({3, 1 + rng.below(12)}, rng, std::pow(10.0, rng.uniform(-3, 3)));
    const Tensor p = softmax_rows(logits);
    const std::size_t k = logits.dim(1);
    for (std::size_t n = 0; n < 3; ++n) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += p[n * k + j];
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("sgd clipping examples") {
  OptimizerConfig cfg;
  std::vector<Parameter> ps{param({2}, {1, 1})};
  ps[0].tensor.ensure_grad();
  ps[0].tensor.grad()[0] = 3;
  ps[0].tensor.grad()[1] = 4;
  auto s = sgd_step(ps, cfg);
  CHECK(s.scale == 1.0);
  CHECK(ps[0].tensor[0] == doctest::Approx(1 - 0.3).epsilon(1e-15));
  CHECK(ps[0].tensor[1] == doctest::Approx(1 - 0.4).epsilon(1e-15));

  ps[0].tensor.grad()[0] = 6;
  ps[0].tensor.grad()[1] = 8;
  s = sgd_step(ps, cfg);
  CHECK(s.raw_norm == doctest::Approx(10.0));
  CHECK(ps[0].tensor.grad()[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(ps[0].tensor.grad()[1] == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(ps[0].tensor[0] == doctest::Approx(0.7 - 0.3).epsilon(1e-14));
}

TEST_CASE("sgd dual-rate groups") {
  OptimizerConfig cfg;
  std::vector<Parameter> ps{param({1}, {0}), param({1}, {0})};
  ps[1].group = LrGroup::kSlow;
  for (auto& p : ps) {
    p.tensor.ensure_grad();
    p.tensor.grad()[0] = 0.5;
  }
  sgd_step(ps, cfg);
  CHECK(ps[0].tensor[0] / ps[1].tensor[0] == doctest::Approx(1e4).epsilon(1e-12));
}

TEST_CASE("sgd weight decay is added before clipping") {
  OptimizerConfig cfg;
  std::vector<Parameter> ps{param({1}, {10.0})};
  ps[0].weight_decay = 0.001;
  ps[0].tensor.ensure_grad();
  ps[0].tensor.grad()[0] = 1.0;
  sgd_step(ps, cfg);
  CHECK(ps[0].tensor[0] == doctest::Approx(10.0 - 0.1 * (1.0 + 0.01)).epsilon(1e-15));
}

TEST_CASE("sgd errors") {
  std::vector<Parameter> ps{param({1}, {0})};
  CHECK_THROWS_AS(sgd_step(ps, OptimizerConfig{}), StateError);
  OptimizerConfig bad;
  bad.clip_norm = 0.0;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  bad = OptimizerConfig{};
  bad.base_lr = -1.0;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("post-clip norm never exceeds the threshold") {
  SeededRng rng(8);
  OptimizerConfig cfg;
  for (int t = 0; t < 300; ++t) {
    std::vector<Parameter> ps;
    const std::size_t count = 1 + rng.below(4);
    for (std::size_t i = 0; i < count; ++i) {
      ps.push_back(Parameter{"p", random_tensor({1 + rng.below(20)}, rng)});
      ps.back().weight_decay = rng.below(2) ? 0.001 : 0.0;
      ps.back().tensor.ensure_grad();
      const double scale = std::pow(10.0, rng.uniform(-3, 3));
      for (double& g : ps.back().tensor.grad()) g = scale * rng.uniform(-1, 1);
    }
    sgd_step(ps, cfg);
    double sq = 0.0;
    for (const auto& p : ps)
      for (double g : p.tensor.grad()) sq += g * g;
    CHECK(std::sqrt(sq) <= cfg.clip_norm + 1e-9);
  }
}

TEST_CASE("identical seeds give bitwise-identical parameters") {
  auto train = [] {
    SeededRng rng(11);
    Tensor x = random_tensor({4, 1, 5, 5}, rng);
    Parameter k{"k", random_tensor({2, 1, 3, 3}, rng)};
    Parameter b{"b", Tensor({2})};
    std::vector<Parameter*> ps{&k, &b};
    for (int step = 0; step < 20; ++step) {
      const Tensor y = conv2d(x, k, b, Padding::kSame);
      zero_grads(ps);
      conv2d_backward(x, k, b, Padding::kSame, y, false);
      sgd_step(ps, OptimizerConfig{});
    }
    return k.tensor.values();
  };
  CHECK(train() == train());
}
