// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/frontend/spectrogram.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include "fsa/common/errors.hpp"

namespace fsa::frontend {
namespace {

// FFTW planning is not thread-safe; execution on an existing plan is.
// FFTW_ESTIMATE keeps the chosen algorithm, and so the rounding, fixed.
class RealFftPlans {
 public:
  static RealFftPlans& instance() {
    static RealFftPlans plans;
    return plans;
  }

  fftw_plan get(std::size_t n) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    std::vector<double> in(n);
    std::vector<fftw_complex> out(n / 2 + 1);
    fftw_plan p = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(),
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(n, p);
    return p;
  }

  ~RealFftPlans() {
    for (auto& [n, p] : plans_) fftw_destroy_plan(p);
  }

 private:
  std::mutex mu_;
  std::map<std::size_t, fftw_plan> plans_;
};

}  // namespace

void StftConfig::validate() const {
  if (hop_size < 1 || window_size < hop_size || sample_rate <= 0) {
    throw ArgumentError("invalid STFT config: window " + std::to_string(window_size) + ", hop " +
                        std::to_string(hop_size) + ", rate " + std::to_string(sample_rate));
  }
}

const FrontendPreset& preset_by_id(PresetId id) {
  switch (id) {
    case PresetId::kPatch128:
      return kPatch128;
    case PresetId::kTransfer64:
      return kTransfer64;
  }
  throw ArgumentError("unknown frontend preset " + std::to_string(static_cast<int>(id)));
}

std::string_view preset_name(PresetId id) {
  return id == PresetId::kPatch128 ? "patch128" : "transfer64";
}

std::size_t stft_frame_count(std::size_t samples, const StftConfig& cfg) {
  if (samples < cfg.window_size) return 0;
  return (samples - cfg.window_size) / cfg.hop_size + 1;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  }
  return w;
}

Tensor stft_power(std::span<const double> wave, const StftConfig& cfg) {
  cfg.validate();
  if (wave.size() < cfg.window_size) {
    throw ArgumentError("stft_power: " + std::to_string(wave.size()) +
                        " samples is shorter than the " + std::to_string(cfg.window_size) +
                        "-sample window; repeat-pad first");
  }
  const std::size_t n = cfg.window_size;
  const std::size_t bins = cfg.freq_bins();
  const std::size_t frames = stft_frame_count(wave.size(), cfg);
  const std::vector<double> window = hann_window(n);
  fftw_plan plan = RealFftPlans::instance().get(n);

  Tensor power({bins, frames});
  std::vector<double> buf(n);
  std::vector<fftw_complex> spec(bins);
  for (std::size_t f = 0; f < frames; ++f) {
    const double* src = wave.data() + f * cfg.hop_size;
    for (std::size_t i = 0; i < n; ++i) buf[i] = src[i] * window[i];
    fftw_execute_dft_r2c(plan, buf.data(), spec.data());
    for (std::size_t k = 0; k < bins; ++k) {
      power[k * frames + f] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
    }
  }
  power.check_finite("stft_power");
  return power;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Tensor mel_filterbank(std::size_t n_mels, const StftConfig& cfg) {
  cfg.validate();
  const std::size_t bins = cfg.freq_bins();
  if (n_mels < 1) throw ArgumentError("mel_filterbank: n_mels must be >= 1");
  if (n_mels > bins) {
    throw ArgumentError("mel_filterbank: " + std::to_string(n_mels) + " mel bands exceed " +
                        std::to_string(bins) + " frequency bins");
  }
  const double nyquist = cfg.sample_rate / 2.0;
  const double mel_max = hz_to_mel(nyquist);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  const double bin_hz = static_cast<double>(cfg.sample_rate) / static_cast<double>(cfg.window_size);

  Tensor fb({n_mels, bins});
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], centre = edges[m + 1], hi = edges[m + 2];
    bool any = false;
    for (std::size_t b = 0; b < bins; ++b) {
      const double f = static_cast<double>(b) * bin_hz;
      double w = 0.0;
      if (f > lo && f <= centre) {
        w = (f - lo) / (centre - lo);
      } else if (f > centre && f < hi) {
        w = (hi - f) / (hi - centre);
      }
      if (w > 0.0) {
        fb[m * bins + b] = w;
        any = true;
      }
    }
    if (!any) {
      const auto nearest = static_cast<std::size_t>(std::lround(centre / bin_hz));
      fb[m * bins + std::min(nearest, bins - 1)] = 1.0;
    }
  }
  return fb;
}

Tensor apply_filterbank(const Tensor& filterbank, const Tensor& power) {
  const std::size_t n_mels = filterbank.dim(0), bins = filterbank.dim(1);
  if (power.rank() != 2 || power.dim(0) != bins) {
    throw DimensionError("mel_project: power " + ndgrad::shape_str(power.shape()) +
                                 " vs filterbank " + ndgrad::shape_str(filterbank.shape()));
  }
  const std::size_t frames = power.dim(1);
  Tensor mel({n_mels, frames});
  for (std::size_t m = 0; m < n_mels; ++m) {
    double* out = mel.raw() + m * frames;
    for (std::size_t b = 0; b < bins; ++b) {
      const double w = filterbank[m * bins + b];
      if (w == 0.0) continue;
      const double* row = power.raw() + b * frames;
      for (std::size_t f = 0; f < frames; ++f) out[f] += w * row[f];
    }
  }
  return mel;
}

Tensor mel_project(const Tensor& power, std::size_t n_mels, const StftConfig& cfg) {
  return apply_filterbank(mel_filterbank(n_mels, cfg), power);
}

}  // namespace fsa::frontend
