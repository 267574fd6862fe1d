// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fsa/ndgrad/parameter.hpp"

namespace fsa::ndgrad {

struct OptimizerConfig {
  double base_lr = 0.1;      // fast group
  double slow_lr = 0.00001;  // pre-trained layers during fine-tuning
  double clip_norm = 5.0;    // global L2 norm threshold
  std::size_t batch_size = 256;

  // base_lr > 0, slow_lr >= 0 (0 freezes the slow group), clip_norm > 0,
  // batch_size > 0. Throws ArgumentError otherwise.
  void validate() const;
};

struct StepStats {
  double raw_norm = 0.0;      // global norm after weight decay, before clipping
  double clipped_norm = 0.0;  // global norm of the gradients actually applied
  double scale = 1.0;
};

// Vanilla SGD with global-norm clipping.
//
// For every parameter g = grad + weight_decay * value. The global L2 norm over
// the concatenation of all g is computed once across both rate groups; if it
// exceeds clip_norm every g is scaled by clip_norm / norm. Each parameter is
// then moved by its group's rate. Throws StateError if a gradient is missing.
StepStats sgd_step(std::span<Parameter* const> params, const OptimizerConfig& config);
StepStats sgd_step(std::vector<Parameter>& params, const OptimizerConfig& config);

void zero_grads(std::span<Parameter* const> params);
void zero_grads(std::vector<Parameter>& params);

}  // namespace fsa::ndgrad
