// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "fsa/frontend/clip.hpp"
#include "fsa/frontend/wav.hpp"
#include "fsa/labctl/manifest.hpp"

namespace fsa::labctl {

using frontend::LabeledClip;
using ndgrad::Tensor;

struct AudioClip {
  std::string clip_id;
  int label = -1;
  int fold = 0;
  frontend::Waveform wave;
};

// Decodes every manifest entry, in manifest order.
std::vector<AudioClip> load_audio(const DatasetManifest& m);

// Model-ready spectrograms for one frontend preset, in input order.
std::vector<LabeledClip> model_clips(std::span<const AudioClip> clips,
                                     const frontend::FrontendPreset& preset,
                                     frontend::CompressionKind compression);

// 120-dimensional MFCC summary per clip, computed at 44.1 kHz with the
// 128-band preset's STFT. Clips too short for the delta window are tiled.
std::vector<Tensor> mfcc_features(std::span<const AudioClip> clips);

}  // namespace fsa::labctl
