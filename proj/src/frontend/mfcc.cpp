// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/frontend/mfcc.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "fsa/common/errors.hpp"
#include "fsa/frontend/compression.hpp"

namespace fsa::frontend {

Tensor dct2_columns(const Tensor& x, std::size_t n_coeffs) {
  const std::size_t bands = x.dim(0), frames = x.dim(1);
  if (n_coeffs > bands) throw ArgumentError("dct2_columns: more coefficients than bands");
  Tensor out({n_coeffs, frames});
  const double m = static_cast<double>(bands);
  for (std::size_t k = 0; k < n_coeffs; ++k) {
    const double norm = k == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
    for (std::size_t b = 0; b < bands; ++b) {
      const double w =
          norm * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * b + 1.0) / (2.0 * m));
      const double* src = x.raw() + b * frames;
      double* dst = out.raw() + k * frames;
      for (std::size_t t = 0; t < frames; ++t) dst[t] += w * src[t];
    }
  }
  return out;
}

Tensor deltas(const Tensor& feats, std::size_t half_width) {
  const std::size_t rows = feats.dim(0), frames = feats.dim(1);
  double denom = 0.0;
  for (std::size_t n = 1; n <= half_width; ++n) denom += static_cast<double>(n * n);
  denom *= 2.0;
  Tensor out(feats.shape());
  const auto last = static_cast<std::ptrdiff_t>(frames) - 1;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* c = feats.raw() + r * frames;
    for (std::size_t t = 0; t < frames; ++t) {
      double acc = 0.0;
      for (std::size_t n = 1; n <= half_width; ++n) {
        const auto ahead = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(t + n), last);
        const auto behind = std::max<std::ptrdiff_t>(
            static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(n), 0);
        acc += static_cast<double>(n) * (c[ahead] - c[behind]);
      }
      out[r * frames + t] = acc / denom;
    }
  }
  return out;
}

Tensor mfcc_frames(std::span<const double> wave, const StftConfig& cfg) {
  const Tensor mel = mel_project(stft_power(wave, cfg), kMfccBands, cfg);
  return dct2_columns(compress(mel, LogCompression::log_eps()), kMfccCoefficients);
}

Tensor mfcc_vector(std::span<const double> wave, const StftConfig& cfg) {
  cfg.validate();
  const std::size_t frames = stft_frame_count(wave.size(), cfg);
  if (frames < 2 * kDeltaHalfWidth + 1) {
    throw ArgumentError("mfcc_vector: " + std::to_string(frames) +
                        " frames; at least 9 are needed for deltas");
  }
  const Tensor c = mfcc_frames(wave, cfg);
  const Tensor d = deltas(c);
  const Tensor dd = deltas(d);
  const Tensor* blocks[3] = {&c, &d, &dd};

  Tensor out({kMfccVectorSize});
  const double n = static_cast<double>(frames);
  for (std::size_t blk = 0; blk < 3; ++blk) {
    for (std::size_t k = 0; k < kMfccCoefficients; ++k) {
      const double* row = blocks[blk]->raw() + k * frames;
      double mean = 0.0;
      for (std::size_t t = 0; t < frames; ++t) mean += row[t];
      mean /= n;
      double var = 0.0;
      for (std::size_t t = 0; t < frames; ++t) var += (row[t] - mean) * (row[t] - mean);
      const std::size_t idx = blk * kMfccCoefficients + k;
      out[idx] = mean;
      out[3 * kMfccCoefficients + idx] = std::sqrt(var / n);
    }
  }
  out.check_finite("mfcc_vector");
  return out;
}

}  // namespace fsa::frontend
