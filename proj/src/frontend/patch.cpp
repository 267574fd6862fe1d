// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/frontend/patch.hpp"

#include <cmath>
#include <string>

#include "fsa/common/errors.hpp"

namespace fsa::frontend {

void MelPatch::check_preset() const {
  const bool ok = values.rank() == 2 &&
                  ((bins() == kPatch128.n_mels && frames() == kPatch128.patch_frames) ||
                   (bins() == kTransfer64.n_mels && frames() == kTransfer64.patch_frames));
  if (!ok) {
    throw DimensionError("patch " + ndgrad::shape_str(values.shape()) +
                         " matches neither 128x128 nor 64x96");
  }
  values.check_finite("MelPatch " + clip_id);
}

Tensor repeat_pad(const Tensor& spec, std::size_t target_frames) {
  if (spec.rank() != 2 || spec.empty()) throw ArgumentError("repeat_pad: empty spectrogram");
  const std::size_t bins = spec.dim(0), frames = spec.dim(1);
  if (frames >= target_frames) return spec;
  Tensor out({bins, target_frames});
  for (std::size_t b = 0; b < bins; ++b) {
    for (std::size_t j = 0; j < target_frames; ++j) {
      out[b * target_frames + j] = spec[b * frames + j % frames];
    }
  }
  return out;
}

Tensor slice_frames(const Tensor& spec, std::size_t offset, std::size_t count) {
  const std::size_t bins = spec.dim(0), frames = spec.dim(1);
  if (offset + count > frames) {
    throw ArgumentError("slice_frames: window [" + std::to_string(offset) + ", " +
                        std::to_string(offset + count) + ") exceeds " + std::to_string(frames) +
                        " frames");
  }
  Tensor out({bins, count});
  for (std::size_t b = 0; b < bins; ++b) {
    const double* src = spec.raw() + b * frames + offset;
    std::copy(src, src + count, out.raw() + b * count);
  }
  return out;
}

MelPatch sample_patch(const Tensor& spec, std::size_t target_frames, SeededRng& rng) {
  if (spec.rank() != 2 || spec.dim(1) < target_frames) {
    throw ArgumentError("sample_patch: spectrogram narrower than " +
                        std::to_string(target_frames) + " frames; repeat-pad first");
  }
  const std::size_t span = spec.dim(1) - target_frames + 1;
  MelPatch p;
  p.offset_frames = span == 1 ? 0 : static_cast<std::size_t>(rng.below(span));
  p.values = slice_frames(spec, p.offset_frames, target_frames);
  return p;
}

std::size_t window_count(std::size_t frames, std::size_t window_frames, std::size_t hop_frames) {
  if (frames < window_frames) return 0;
  return (frames - window_frames) / hop_frames + 1;
}

std::vector<double> windowed_predict(const Tensor& spec, const ClassifierFn& model,
                                     std::size_t window_frames, std::size_t hop_frames) {
  if (hop_frames == 0) throw ArgumentError("windowed_predict: hop of 0 frames");
  const std::size_t windows = window_count(spec.dim(1), window_frames, hop_frames);
  if (windows == 0) {
    throw ArgumentError("windowed_predict: spectrogram narrower than the window; repeat-pad first");
  }
  std::vector<std::vector<double>> per_window;
  per_window.reserve(windows);
  for (std::size_t w = 0; w < windows; ++w) {
    per_window.push_back(model(slice_frames(spec, w * hop_frames, window_frames)));
  }
  return mean_posterior(per_window);
}

std::vector<double> mean_posterior(const std::vector<std::vector<double>>& per_window) {
  if (per_window.empty()) throw ArgumentError("mean_posterior: no windows");
  std::vector<double> mean(per_window.front().size(), 0.0);
  for (const auto& p : per_window) {
    if (p.size() != mean.size()) throw DimensionError("mean_posterior: posterior size changed");
    for (std::size_t k = 0; k < p.size(); ++k) mean[k] += p[k];
  }
  for (double& v : mean) v /= static_cast<double>(per_window.size());
  return mean;
}

std::size_t trimmed_frames(std::size_t frames, const FrontendPreset& preset) {
  if (frames <= preset.patch_frames) return frames;
  return preset.patch_frames +
         preset.predict_hop * ((frames - preset.patch_frames) / preset.predict_hop);
}

Tensor clip_mel(const Waveform& wave, const FrontendPreset& preset) {
  if (wave.samples.empty()) throw ArgumentError("clip_mel: empty waveform");
  Waveform w = resample_linear(wave, preset.stft.sample_rate);
  if (w.samples.size() < preset.stft.window_size) {
    // Shorter than one analysis window: tile the signal itself.
    std::vector<double> tiled(preset.stft.window_size);
    for (std::size_t i = 0; i < tiled.size(); ++i) tiled[i] = w.samples[i % w.samples.size()];
    w.samples = std::move(tiled);
  }
  Tensor mel = mel_project(stft_power(w.samples, preset.stft), preset.n_mels, preset.stft);
  const std::size_t keep = trimmed_frames(mel.dim(1), preset);
  if (keep < mel.dim(1)) mel = slice_frames(mel, 0, keep);
  return repeat_pad(mel, preset.patch_frames);
}

}  // namespace fsa::frontend
