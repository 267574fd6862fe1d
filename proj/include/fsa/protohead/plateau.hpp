// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fsa/protohead/protonet.hpp"

namespace fsa::protohead {

// Stops once the best accuracy seen has not strictly improved for `patience`
// consecutive epochs. Epochs are numbered from 1.
class PlateauStopper {
 public:
  explicit PlateauStopper(std::size_t patience);

  // Records an epoch; returns true when training should stop after it.
  bool update(std::size_t epoch, double accuracy);
  double best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }

 private:
  std::size_t patience_;
  double best_ = -1.0;
  std::size_t best_epoch_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> test_acc;
};

struct ProtoTrainConfig {
  std::size_t patience = 200;
  std::size_t queries_per_class = kQueriesPerClass;
  // Safety cap; reaching it is reported, not silent.
  std::size_t max_epochs = 20000;
  std::size_t patch_frames = 128;
  std::size_t predict_hop = 43;
  DistanceConfig distance;
  ndgrad::OptimizerConfig opt;
};

struct ProtoTrainResult {
  std::vector<EpochRecord> trace;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  double best_train_acc = 0.0;
  bool hit_max_epochs = false;
  PrototypeSet prototypes;  // from the final parameters
};

// Full-train-set accuracy of the current embedding, clip by clip through the
// prediction windows.
double proto_accuracy(const ModelGraph& embed, const PrototypeSet& protos,
                      std::span<const LabeledClip> clips, std::size_t window, std::size_t hop);

// Episodic training with the train-accuracy plateau stop. Each epoch is one
// step on a batch of queries_per_class random patches per class. `monitor`
// clips, when given, are scored every epoch for the trace only; they never
// influence training or stopping.
ProtoTrainResult train_until_plateau(ModelGraph& embed, std::span<const LabeledClip> train,
                                     const SupportSet& support, const ProtoTrainConfig& cfg,
                                     SeededRng& rng,
                                     const frontend::ProvenanceAudit* audit = nullptr,
                                     std::span<const LabeledClip> monitor = {});

// CSV with header epoch,train_acc,test_acc (test_acc empty when absent).
void write_trace_csv(std::ostream& out, std::span<const EpochRecord> trace);

}  // namespace fsa::protohead
