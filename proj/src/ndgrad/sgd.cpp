// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/ndgrad/sgd.hpp"

#include <cmath>

#include "fsa/common/errors.hpp"

namespace fsa::ndgrad {

void OptimizerConfig::validate() const {
  if (!(base_lr > 0.0)) throw ArgumentError("base_lr must be > 0");
  if (!(slow_lr >= 0.0)) throw ArgumentError("slow_lr must be >= 0");
  if (!(clip_norm > 0.0)) throw ArgumentError("clip_norm must be > 0");
  if (batch_size == 0) throw ArgumentError("batch_size must be > 0");
}

StepStats sgd_step(std::span<Parameter* const> params, const OptimizerConfig& config) {
  config.validate();
  for (const Parameter* p : params) {
    if (!p->tensor.has_grad()) throw StateError("parameter '" + p->name + "' has no gradient");
    if (p->weight_decay < 0.0) throw ArgumentError("negative weight decay on '" + p->name + "'");
  }

  // Decay is folded into the gradient first so clipping bounds the full update.
  double sq = 0.0;
  for (Parameter* p : params) {
    auto g = p->tensor.grad();
    auto v = p->tensor.data();
    const double wd = p->weight_decay;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (wd != 0.0) g[i] += wd * v[i];
      sq += g[i] * g[i];
    }
  }

  StepStats stats;
  stats.raw_norm = std::sqrt(sq);
  if (!std::isfinite(stats.raw_norm)) throw NumericError("non-finite gradient norm in sgd_step");
  if (stats.raw_norm > config.clip_norm) stats.scale = config.clip_norm / stats.raw_norm;

  double applied = 0.0;
  for (Parameter* p : params) {
    auto g = p->tensor.grad();
    auto v = p->tensor.data();
    const double lr = p->group == LrGroup::kSlow ? config.slow_lr : config.base_lr;
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] *= stats.scale;
      applied += g[i] * g[i];
      v[i] -= lr * g[i];
    }
  }
  stats.clipped_norm = std::sqrt(applied);
  return stats;
}

StepStats sgd_step(std::vector<Parameter>& params, const OptimizerConfig& config) {
  std::vector<Parameter*> ptrs;
  ptrs.reserve(params.size());
  for (Parameter& p : params) ptrs.push_back(&p);
  return sgd_step(ptrs, config);
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->tensor.zero_grad();
}

void zero_grads(std::vector<Parameter>& params) {
  for (Parameter& p : params) p.tensor.zero_grad();
}

}  // namespace fsa::ndgrad
