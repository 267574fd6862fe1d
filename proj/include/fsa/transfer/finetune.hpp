// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

// Pretext pre-training of a vggish_like backbone and the two fine-tuning
// variants built on it: a softmax classifier head, and a linear embedding
// head trained episodically.
//
// In every fine-tuned graph the parameters restored from the checkpoint form
// the slow learning-rate group and the new head forms the fast group.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fsa/frontend/clip.hpp"
#include "fsa/protohead/plateau.hpp"
#include "fsa/transfer/checkpoint.hpp"
#include "fsa/zoo/builders.hpp"
#include "fsa/zoo/trainer.hpp"

namespace fsa::transfer {

using frontend::LabeledClip;

inline constexpr std::size_t kProtoEmbedDim = 10;
inline constexpr const char* kHeadLayer = "head";

// Backbone followed by a dense softmax layer over n_classes.
zoo::GraphDesc transfer_softmax_desc(const zoo::GraphDesc& backbone, std::size_t n_classes);
// Backbone followed by a dense linear embedding layer.
zoo::GraphDesc transfer_proto_desc(const zoo::GraphDesc& backbone,
                                   std::size_t embed_dim = kProtoEmbedDim);

// Builds `combined` with fresh head weights from `seed`, restores the
// checkpoint into it and assigns the rate groups: exactly the restored
// parameters are slow. Throws CheckpointError when the checkpoint does not
// hold a vggish_like backbone that fits.
ModelGraph attach_head(const Checkpoint& backbone, const zoo::GraphDesc& combined,
                       std::uint64_t seed);

// Backbone-only copy of a combined graph's first layers, under the backbone
// descriptor.
ModelGraph extract_backbone(const ModelGraph& combined, const zoo::GraphDesc& backbone);

struct PretrainConfig {
  zoo::VggishOptions backbone = zoo::VggishOptions::desk_scale();
  std::size_t epochs = 40;
  ndgrad::OptimizerConfig opt{.base_lr = 0.05, .slow_lr = 0.0, .clip_norm = 5.0, .batch_size = 32};
  std::uint64_t seed = 1;
  std::string note = "pretext pre-training on synthetic source classes";
};

struct PretrainResult {
  Checkpoint checkpoint;  // backbone only, arch vggish_like
  zoo::SoftmaxTrainResult train;
  double train_accuracy = 0.0;  // source clips, through prediction windows
};

// Trains backbone + softmax head on the source task and checkpoints the
// backbone. Source clips use the 64x96 preset.
PretrainResult pretext_pretrain(std::span<const LabeledClip> source, std::size_t n_classes,
                                const PretrainConfig& cfg);

struct FineTuneConfig {
  std::size_t epochs = 200;
  ndgrad::OptimizerConfig opt{.base_lr = 0.1, .slow_lr = 0.00001, .clip_norm = 5.0,
                              .batch_size = 256};
  std::uint64_t seed = 1;
};

struct SoftmaxFineTune {
  ModelGraph model;
  zoo::SoftmaxTrainResult train;
};

// Throws CheckpointError for a checkpoint that is not a compatible
// vggish_like backbone.
SoftmaxFineTune fine_tune_softmax(const Checkpoint& ckpt, std::span<const LabeledClip> train,
                                  std::size_t n_classes, const FineTuneConfig& cfg,
                                  const frontend::ProvenanceAudit* audit = nullptr);

struct ProtoFineTuneConfig {
  std::size_t embed_dim = kProtoEmbedDim;
  std::size_t shots = protohead::kSupportShots;
  protohead::ProtoTrainConfig train = default_train();
  std::uint64_t seed = 1;

  // Plateau training on 64x96 windows with the dual-rate optimizer.
  static protohead::ProtoTrainConfig default_train();
};

struct ProtoFineTune {
  ModelGraph model;
  protohead::SupportSet support;
  protohead::ProtoTrainResult train;
};

ProtoFineTune fine_tune_proto(const Checkpoint& ckpt, std::span<const LabeledClip> train,
                              std::size_t n_classes, const ProtoFineTuneConfig& cfg,
                              const frontend::ProvenanceAudit* audit = nullptr,
                              std::span<const LabeledClip> monitor = {});

}  // namespace fsa::transfer
