// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/labctl/dataset.hpp"

#include <cstddef>
#include <exception>

#include "fsa/frontend/mfcc.hpp"
#include "fsa/frontend/patch.hpp"

namespace fsa::labctl {

namespace {

// Runs body(i) for i in [0, n) across threads and rethrows the first failure
// (by index) on the calling thread.
template <class F>
void parallel_for(std::size_t n, F body) {
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

std::vector<AudioClip> load_audio(const DatasetManifest& m) {
  std::vector<AudioClip> out(m.entries.size());
  parallel_for(out.size(), [&](std::size_t i) {
    const auto& e = m.entries[i];
    out[i] = {e.clip_id, e.label, e.fold, frontend::read_wav(m.resolve(e))};
  });
  return out;
}

std::vector<LabeledClip> model_clips(std::span<const AudioClip> clips,
                                     const frontend::FrontendPreset& preset,
                                     frontend::CompressionKind compression) {
  std::vector<LabeledClip> out(clips.size());
  parallel_for(out.size(), [&](std::size_t i) {
    const auto& c = clips[i];
    out[i] = {c.clip_id, c.label,
              frontend::model_input(frontend::clip_mel(c.wave, preset), compression)};
  });
  return out;
}

std::vector<Tensor> mfcc_features(std::span<const AudioClip> clips) {
  const auto& cfg = frontend::kPatch128.stft;
  const std::size_t min_samples = cfg.window_size + (2 * frontend::kDeltaHalfWidth) * cfg.hop_size;
  std::vector<Tensor> out(clips.size());
  parallel_for(out.size(), [&](std::size_t i) {
    frontend::Waveform w = clips[i].wave;
    if (w.sample_rate != cfg.sample_rate) w = frontend::resample_linear(w, cfg.sample_rate);
    if (w.samples.empty()) w.samples.assign(1, 0.0);
    const std::vector<double> base = w.samples;
    while (w.samples.size() < min_samples) w.samples.insert(w.samples.end(), base.begin(), base.end());
    out[i] = frontend::mfcc_vector(w.samples, cfg);
  });
  return out;
}

}  // namespace fsa::labctl
