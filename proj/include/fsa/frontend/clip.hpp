// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "fsa/frontend/compression.hpp"
#include "fsa/frontend/patch.hpp"

namespace fsa::frontend {

// A whole clip in model-input form: the repeat-padded spectrogram a model
// reads windows and patches from.
struct LabeledClip {
  std::string clip_id;
  int label = -1;
  Tensor spec;  // [bins, frames], frames >= patch width
};

// Converts a clip mel spectrogram to model input. log_eps models read
// compressed values; log_learn models compress inside the graph and read raw
// energies.
Tensor model_input(const Tensor& mel, CompressionKind compression);

// Draws a random patch of `frames` columns from a clip, carrying its label
// and clip id.
MelPatch sample_clip_patch(const LabeledClip& clip, std::size_t frames, SeededRng& rng);

// Clips grouped by label; throws DataError if a label is outside [0, n_classes).
std::vector<std::vector<const LabeledClip*>> group_by_label(const std::vector<LabeledClip>& clips,
                                                            std::size_t n_classes);

// Guards training against evaluation data: any patch whose clip id belongs
// to the held-out set is rejected.
class ProvenanceAudit {
 public:
  ProvenanceAudit() = default;
  explicit ProvenanceAudit(const std::vector<LabeledClip>& held_out);

  void forbid(const std::string& clip_id) { forbidden_.insert(clip_id); }
  // Throws StateError naming the clip.
  void check(const std::string& clip_id) const;
  void check(const MelPatch& patch) const { check(patch.clip_id); }
  std::size_t checked() const { return checked_; }

 private:
  std::unordered_set<std::string> forbidden_;
  mutable std::size_t checked_ = 0;
};

}  // namespace fsa::frontend
