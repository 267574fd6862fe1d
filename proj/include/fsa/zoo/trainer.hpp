// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "fsa/frontend/clip.hpp"
#include "fsa/ndgrad/sgd.hpp"
#include "fsa/zoo/graph.hpp"

namespace fsa::zoo {

using frontend::LabeledClip;
using frontend::MelPatch;

struct SoftmaxTrainConfig {
  std::size_t epochs = 200;
  std::size_t patch_frames = 128;
  ndgrad::OptimizerConfig opt;
};

struct SoftmaxTrainResult {
  std::vector<double> epoch_loss;  // mean minibatch loss per epoch
  std::size_t steps = 0;
};

// One SGD step of mean cross-entropy over a minibatch of patches.
double softmax_step(ModelGraph& model, std::span<const MelPatch> batch,
                    const ndgrad::OptimizerConfig& opt, SeededRng& rng);

// Fixed-length training. Every epoch draws one random patch from every
// training clip, in shuffled order, and steps through them in minibatches of
// opt.batch_size.
SoftmaxTrainResult train_softmax(ModelGraph& model, std::span<const LabeledClip> train,
                                 const SoftmaxTrainConfig& cfg, SeededRng& rng,
                                 const frontend::ProvenanceAudit* audit = nullptr);

// [N, 1, bins, frames] batch from equally shaped patches.
Tensor patch_batch(std::span<const MelPatch> patches);

}  // namespace fsa::zoo
