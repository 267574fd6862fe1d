// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/zoo/trainer.hpp"

#include <numeric>

#include "fsa/common/errors.hpp"
#include "fsa/ndgrad/ops.hpp"

namespace fsa::zoo {

Tensor patch_batch(std::span<const MelPatch> patches) {
  std::vector<const Tensor*> ptrs;
  ptrs.reserve(patches.size());
  for (const auto& p : patches) ptrs.push_back(&p.values);
  return stack_batch(ptrs);
}

double softmax_step(ModelGraph& model, std::span<const MelPatch> batch,
                    const ndgrad::OptimizerConfig& opt, SeededRng& rng) {
  if (batch.empty()) throw ArgumentError("softmax_step: empty batch");
  std::vector<int> labels;
  labels.reserve(batch.size());
  for (const auto& p : batch) labels.push_back(p.label);
  model.zero_grad();
  const Tensor logits = model.forward(patch_batch(batch), ndgrad::Mode::kTrain, &rng);
  const auto res = ndgrad::softmax_xent(logits, labels);
  model.backward(ndgrad::softmax_xent_grad(res.probs, labels));
  auto params = model.parameters();
  ndgrad::sgd_step(params, opt);
  return res.loss;
}

SoftmaxTrainResult train_softmax(ModelGraph& model, std::span<const LabeledClip> train,
                                 const SoftmaxTrainConfig& cfg, SeededRng& rng,
                                 const frontend::ProvenanceAudit* audit) {
  cfg.opt.validate();
  if (train.empty()) throw ArgumentError("train_softmax: no training clips");
  SoftmaxTrainResult result;
  std::vector<std::size_t> order(train.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.opt.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.opt.batch_size);
      std::vector<MelPatch> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(frontend::sample_clip_patch(train[order[i]], cfg.patch_frames, rng));
        if (audit) audit->check(batch.back());
      }
      loss_sum += softmax_step(model, batch, cfg.opt, rng);
      ++batches;
      ++result.steps;
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  return result;
}

}  // namespace fsa::zoo
