// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

// Synthetic stand-in for the real datasets. Each class is a fixed timbre: a
// harmonic stack with its own partial amplitudes, a resonant noise band and
// an amplitude-modulation rate. Clips vary pitch, gain, duration and noise.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fsa/labctl/dataset.hpp"

namespace fsa::labctl {

struct SynthConfig {
  std::size_t classes = 5;
  std::size_t clips_per_class = 40;
  std::uint64_t seed = 1;
  std::size_t folds = 3;
  int sample_rate = 44100;
  double min_seconds = 1.0;
  double max_seconds = 4.0;
  // Scales the per-clip randomization of the class recipe (partial
  // amplitudes, noise band, modulation). 0 renders every clip of a class
  // from the same recipe; larger values make classes overlap.
  double jitter = 0.25;
  // Class-independent background: every clip gets an interfering sound
  // rendered from a random recipe outside the class set, at an RMS of
  // `clutter` times the foreground (scaled by a random factor in [0.5, 1.5]).
  // 0 disables it.
  double clutter = 0.0;
  // Ratio between a class's mid pitch and either end of its pitch range.
  double pitch_spread = 1.26;

  // Throws ArgumentError unless classes >= 2, folds >= 1, clips_per_class >=
  // folds, 0 < min_seconds < 3 <= max_seconds, jitter >= 0, clutter >= 0
  // and pitch_spread >= 1.
  void validate() const;
};

struct ClassRecipe {
  std::vector<double> partials;  // relative amplitude of harmonic h+1
  double noise_center_hz = 0.0;
  double noise_q = 1.0;
  double noise_mix = 0.0;  // noise share of the signal, [0, 1)
  double am_rate_hz = 0.0;
  double am_depth = 0.0;
  double f0_lo = 0.0, f0_hi = 0.0;  // pitch range, Hz
};

// Pitch range is [mid / pitch_spread, mid * pitch_spread] around a class mid.
ClassRecipe class_recipe(std::uint64_t seed, std::size_t class_index, double pitch_spread = 1.26);

// All clips of a synthetic dataset, rendered in memory and already quantized
// to 16 bits, so they match what the WAV files decode to. Clip j of every
// class lands in fold 1 + j mod folds, and clip 0 of every class is shorter
// than 3 s.
std::vector<AudioClip> synth_clips(const SynthConfig& cfg);

std::vector<std::string> synth_class_names(std::size_t classes);

// Writes audio/<clip_id>.wav and manifest.csv under out_dir and returns the
// manifest. Output bytes depend only on the config.
DatasetManifest synth_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace fsa::labctl
