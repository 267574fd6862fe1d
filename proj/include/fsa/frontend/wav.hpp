// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fsa::frontend {

struct Waveform {
  std::vector<double> samples;  // mono, nominally in [-1, 1]
  int sample_rate = 0;

  double seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// Reads RIFF/WAVE with 16-bit PCM or 32-bit IEEE float samples. Multi-channel
// input is downmixed by averaging. Throws FormatError on anything else.
Waveform read_wav(const std::filesystem::path& path);
Waveform decode_wav(std::span<const std::uint8_t> bytes);

// 16-bit PCM mono, samples clamped to [-1, 1]. Output bytes are a pure
// function of the input.
std::vector<std::uint8_t> encode_wav16(const Waveform& wave);
void write_wav16(const std::filesystem::path& path, const Waveform& wave);

// Linear-interpolation resampler.
Waveform resample_linear(const Waveform& wave, int target_rate);

}  // namespace fsa::frontend
