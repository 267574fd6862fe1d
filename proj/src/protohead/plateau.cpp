// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/protohead/plateau.hpp"

#include <cstdio>
#include <ostream>

#include "fsa/common/errors.hpp"
#include "fsa/zoo/predict.hpp"

namespace fsa::protohead {

PlateauStopper::PlateauStopper(std::size_t patience) : patience_(patience) {
  if (patience == 0) throw ArgumentError("plateau patience must be >= 1");
}

bool PlateauStopper::update(std::size_t epoch, double accuracy) {
  if (accuracy > best_) {
    best_ = accuracy;
    best_epoch_ = epoch;
  }
  return epoch - best_epoch_ >= patience_;
}

double proto_accuracy(const ModelGraph& embed, const PrototypeSet& protos,
                      std::span<const LabeledClip> clips, std::size_t window, std::size_t hop) {
  const auto posts = zoo::clip_posteriors(
      embed, clips, window, hop,
      [&](std::span<const double> row) { return classify_embedding(row, protos); });
  return zoo::accuracy(posts, clips);
}

ProtoTrainResult train_until_plateau(ModelGraph& embed, std::span<const LabeledClip> train,
                                     const SupportSet& support, const ProtoTrainConfig& cfg,
                                     SeededRng& rng, const frontend::ProvenanceAudit* audit,
                                     std::span<const LabeledClip> monitor) {
  cfg.opt.validate();
  support.validate();
  if (cfg.queries_per_class == 0) throw ArgumentError("queries_per_class must be >= 1");
  const std::size_t k = support.n_classes();
  std::vector<std::vector<const LabeledClip*>> groups(k);
  for (const auto& c : train) {
    if (c.label < 0 || static_cast<std::size_t>(c.label) >= k) {
      throw DataError("clip " + c.clip_id + " has an out-of-range label");
    }
    groups[static_cast<std::size_t>(c.label)].push_back(&c);
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (groups[c].empty()) throw DataError("no training clips for class " + std::to_string(c));
  }
  if (audit) {
    for (const auto& id : support.source_clip_ids()) audit->check(id);
  }

  PlateauStopper stopper(cfg.patience);
  ProtoTrainResult result;
  std::vector<MelPatch> queries;
  for (std::size_t epoch = 1;; ++epoch) {
    queries.clear();
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < cfg.queries_per_class; ++j) {
        const LabeledClip& clip = *groups[c][rng.below(groups[c].size())];
        queries.push_back(frontend::sample_clip_patch(clip, cfg.patch_frames, rng));
        if (audit) audit->check(queries.back());
      }
    }
    const StepResult step = proto_train_step(embed, support, queries, cfg.opt, cfg.distance, rng);
    const PrototypeSet protos = compute_prototypes(support, embed, cfg.distance);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = step.loss;
    rec.train_acc = proto_accuracy(embed, protos, train, cfg.patch_frames, cfg.predict_hop);
    if (!monitor.empty()) {
      rec.test_acc = proto_accuracy(embed, protos, monitor, cfg.patch_frames, cfg.predict_hop);
    }
    result.trace.push_back(rec);
    const bool stop = stopper.update(epoch, rec.train_acc);
    if (stop || epoch >= cfg.max_epochs) {
      result.hit_max_epochs = !stop;
      result.epochs = epoch;
      result.prototypes = protos;
      break;
    }
  }
  result.best_epoch = stopper.best_epoch();
  result.best_train_acc = stopper.best();
  return result;
}

void write_trace_csv(std::ostream& out, std::span<const EpochRecord> trace) {
  out << "epoch,train_acc,test_acc\n";
  char buf[64];
  for (const auto& r : trace) {
    out << r.epoch << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.train_acc);
    out << buf << ',';
    if (r.test_acc) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.test_acc);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace fsa::protohead
