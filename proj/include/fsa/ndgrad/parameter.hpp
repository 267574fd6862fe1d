// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "fsa/ndgrad/tensor.hpp"

namespace fsa::ndgrad {

// Which learning rate a parameter is updated with. Pre-trained layers are
// placed in kSlow during fine-tuning; everything else is kFast.
enum class LrGroup { kFast, kSlow };

struct Parameter {
  std::string name;
  Tensor tensor;
  LrGroup group = LrGroup::kFast;
  double weight_decay = 0.0;  // L2 factor, >= 0
};

}  // namespace fsa::ndgrad
