// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/frontend/clip.hpp"

#include "fsa/common/errors.hpp"

namespace fsa::frontend {

Tensor model_input(const Tensor& mel, CompressionKind compression) {
  if (compression == CompressionKind::kLogLearn) return mel.reshaped(mel.shape());
  return compress(mel, LogCompression::log_eps());
}

MelPatch sample_clip_patch(const LabeledClip& clip, std::size_t frames, SeededRng& rng) {
  MelPatch p = sample_patch(clip.spec, frames, rng);
  p.label = clip.label;
  p.clip_id = clip.clip_id;
  return p;
}

std::vector<std::vector<const LabeledClip*>> group_by_label(const std::vector<LabeledClip>& clips,
                                                            std::size_t n_classes) {
  std::vector<std::vector<const LabeledClip*>> groups(n_classes);
  for (const auto& c : clips) {
    if (c.label < 0 || static_cast<std::size_t>(c.label) >= n_classes) {
      throw DataError("clip " + c.clip_id + " has label " + std::to_string(c.label) +
                      " outside [0, " + std::to_string(n_classes) + ")");
    }
    groups[static_cast<std::size_t>(c.label)].push_back(&c);
  }
  return groups;
}

ProvenanceAudit::ProvenanceAudit(const std::vector<LabeledClip>& held_out) {
  for (const auto& c : held_out) forbidden_.insert(c.clip_id);
}

void ProvenanceAudit::check(const std::string& clip_id) const {
  ++checked_;
  if (forbidden_.contains(clip_id)) {
    throw StateError("held-out clip " + clip_id + " reached a training step");
  }
}

}  // namespace fsa::frontend
