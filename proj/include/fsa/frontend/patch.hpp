// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fsa/common/rng.hpp"
#include "fsa/frontend/spectrogram.hpp"
#include "fsa/frontend/wav.hpp"

namespace fsa::frontend {

// A fixed-size spectrogram window plus where it came from.
struct MelPatch {
  Tensor values;  // [bins, frames]
  int label = -1;
  std::string clip_id;
  std::size_t offset_frames = 0;

  std::size_t bins() const { return values.dim(0); }
  std::size_t frames() const { return values.dim(1); }
  // Throws DimensionError unless the patch is 128x128 or 64x96 and finite.
  void check_preset() const;
};

// Tiles columns so that output column j = input column (j mod frames). Returns
// the input unchanged when it already has >= target_frames columns.
Tensor repeat_pad(const Tensor& spec, std::size_t target_frames);

Tensor slice_frames(const Tensor& spec, std::size_t offset, std::size_t count);

// Uniformly random contiguous window of target_frames columns.
MelPatch sample_patch(const Tensor& spec, std::size_t target_frames, SeededRng& rng);

// Maps one [bins, window_frames] window to a class posterior.
using ClassifierFn = std::function<std::vector<double>(const Tensor& window)>;

// Number of windows windowed_predict evaluates for a spectrogram width.
std::size_t window_count(std::size_t frames, std::size_t window_frames, std::size_t hop_frames);

// Arithmetic mean of equally sized posteriors.
std::vector<double> mean_posterior(const std::vector<std::vector<double>>& per_window);

// Runs `model` on windows starting at 0, hop, 2*hop, ... that fit inside the
// spectrogram and returns the arithmetic mean of their posteriors.
std::vector<double> windowed_predict(const Tensor& spec, const ClassifierFn& model,
                                     std::size_t window_frames, std::size_t hop_frames);

// Clip-level pipeline for a preset: resample, STFT, mel projection. The result
// is trimmed to the last whole prediction window and repeat-padded up to the
// patch width, so it is always >= patch_frames wide. Values are mel energies;
// compression is applied separately.
Tensor clip_mel(const Waveform& wave, const FrontendPreset& preset);

// Frames kept after trimming a spectrogram of `frames` columns to whole
// prediction windows.
std::size_t trimmed_frames(std::size_t frames, const FrontendPreset& preset);

}  // namespace fsa::frontend
