// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>
#include <span>
#include <string_view>

#include "fsa/ndgrad/tensor.hpp"

namespace fsa::frontend {

using ndgrad::Tensor;

struct StftConfig {
  std::size_t window_size = 1024;
  std::size_t hop_size = 1024;
  int sample_rate = 44100;

  std::size_t freq_bins() const { return window_size / 2 + 1; }
  // Throws ArgumentError unless window_size >= hop_size >= 1 and rate > 0.
  void validate() const;
};

// The two input formats used by the models.
enum class PresetId : std::uint32_t { kPatch128 = 1, kTransfer64 = 2 };

struct FrontendPreset {
  PresetId id;
  StftConfig stft;
  std::size_t n_mels;
  std::size_t patch_frames;    // model input width
  std::size_t predict_hop;     // frames between prediction windows (1 s)
};

// 128 bins x 128 frames (3 s) at 44.1 kHz, window = hop = 1024.
inline constexpr FrontendPreset kPatch128{PresetId::kPatch128, {1024, 1024, 44100}, 128, 128, 43};
// 64 bins x 96 frames (1 s) at 16 kHz, window 400, hop 160.
inline constexpr FrontendPreset kTransfer64{PresetId::kTransfer64, {400, 160, 16000}, 64, 96, 96};

const FrontendPreset& preset_by_id(PresetId id);
std::string_view preset_name(PresetId id);

std::size_t stft_frame_count(std::size_t samples, const StftConfig& cfg);

// Hann-windowed |X|^2, shape [freq_bins, frames] with
// frames = floor((len - window) / hop) + 1. Throws ArgumentError if the wave
// is shorter than one window.
Tensor stft_power(std::span<const double> wave, const StftConfig& cfg);

// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular HTK-mel filterbank spanning 0..fs/2 as a [n_mels, freq_bins]
// matrix. Triangles are sampled at the bin centre frequencies; a band too
// narrow to contain any bin centre gets weight 1 on the bin nearest its centre
// so that every band sees some energy.
Tensor mel_filterbank(std::size_t n_mels, const StftConfig& cfg);

// [freq_bins, frames] power -> [n_mels, frames] mel energies.
Tensor mel_project(const Tensor& power, std::size_t n_mels, const StftConfig& cfg);
Tensor apply_filterbank(const Tensor& filterbank, const Tensor& power);

}  // namespace fsa::frontend
