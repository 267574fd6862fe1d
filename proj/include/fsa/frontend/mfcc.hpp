// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "fsa/frontend/spectrogram.hpp"

namespace fsa::frontend {

inline constexpr std::size_t kMfccBands = 40;
inline constexpr std::size_t kMfccCoefficients = 20;
inline constexpr std::size_t kDeltaHalfWidth = 4;  // 9-frame regression window
inline constexpr std::size_t kMfccVectorSize = 6 * kMfccCoefficients;

// Orthonormal DCT-II of each column of a [bands, frames] matrix, keeping the
// first n_coeffs rows.
Tensor dct2_columns(const Tensor& x, std::size_t n_coeffs);

// Regression deltas along time, edge frames replicated:
// d_t = sum_{n=1..N} n (c_{t+n} - c_{t-n}) / (2 sum n^2).
Tensor deltas(const Tensor& feats, std::size_t half_width = kDeltaHalfWidth);

// Per-frame MFCC matrix [20, frames] from a waveform (40-band log-mel).
Tensor mfcc_frames(std::span<const double> wave, const StftConfig& cfg);

// 120-dimensional clip summary: means over time of [mfcc, delta, delta2]
// (60 values) followed by their standard deviations (60 values). Throws
// ArgumentError when the wave yields fewer than 9 frames.
Tensor mfcc_vector(std::span<const double> wave, const StftConfig& cfg);

}  // namespace fsa::frontend
