// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/labctl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "fsa/common/errors.hpp"
#include "fsa/common/rng.hpp"

namespace fsa::labctl {

namespace {

constexpr std::size_t kPartials = 10;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double log_uniform(SeededRng& rng, double lo, double hi) {
  return lo * std::exp(rng.uniform() * std::log(hi / lo));
}

double rms(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(std::max<std::size_t>(1, x.size())));
}

// RBJ constant-peak band-pass biquad over white noise.
std::vector<double> band_noise(std::size_t n, double center, double q, int rate, SeededRng& rng) {
  const double w0 = kTwoPi * center / rate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  std::vector<double> y(n);
  double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    const double v = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = v;
    y[i] = v;
  }
  return y;
}

// Unit-RMS rendering of one recipe.
std::vector<double> render(const ClassRecipe& r, std::size_t n, double jitter, int rate,
                           SeededRng& rng) {
  const double f0 = log_uniform(rng, r.f0_lo, r.f0_hi);

  std::vector<double> harm(n, 0.0);
  for (std::size_t h = 0; h < r.partials.size(); ++h) {
    const double f = f0 * static_cast<double>(h + 1);
    if (f >= 0.45 * rate) break;
    const double amp = r.partials[h] * std::exp(jitter * rng.normal());
    const double phase = kTwoPi * rng.uniform();
    const double step = kTwoPi * f / rate;
    // sin(phase + step*i) by the Chebyshev recurrence s_{i+1} = 2cos(step)s_i - s_{i-1}.
    const double k = 2.0 * std::cos(step);
    double prev = std::sin(phase - step), cur = std::sin(phase);
    for (std::size_t i = 0; i < n; ++i) {
      harm[i] += amp * cur;
      const double next = k * cur - prev;
      prev = cur;
      cur = next;
    }
  }
  const double center = std::min(r.noise_center_hz * std::exp(0.5 * jitter * rng.normal()), 0.4 * rate);
  std::vector<double> noise = band_noise(n, center, r.noise_q, rate, rng);
  const double am_rate = r.am_rate_hz * std::exp(0.5 * jitter * rng.normal());
  const double am_phase = kTwoPi * rng.uniform();

  const double hr = rms(harm), nr = rms(noise);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    double v = (1.0 - r.noise_mix) * (hr > 0 ? harm[i] / hr : 0.0) +
               r.noise_mix * (nr > 0 ? noise[i] / nr : 0.0);
    v *= 1.0 - r.am_depth * 0.5 * (1.0 + std::sin(am_phase + kTwoPi * am_rate * t));
    out[i] = v;
  }
  const double total = rms(out);
  if (total > 0)
    for (auto& v : out) v /= total;
  return out;
}

// Edge ramps, peak normalization to `gain` and 16-bit quantization.
frontend::Waveform finish(std::vector<double> x, double gain, int rate) {
  const std::size_t n = x.size();
  const double ramp = 0.01 * rate;
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double edge = std::min<double>(static_cast<double>(i), static_cast<double>(n - 1 - i));
    if (edge < ramp) x[i] *= edge / ramp;
    peak = std::max(peak, std::abs(x[i]));
  }
  frontend::Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = peak > 0 ? gain * x[i] / peak : 0.0;
    const double q = std::clamp(static_cast<double>(std::lround(s * 32768.0)), -32768.0, 32767.0);
    w.samples[i] = q / 32768.0;
  }
  return w;
}

// Background recipes come from a range of class indices no dataset uses.
constexpr std::uint64_t kBackgroundBase = 1u << 20;

}  // namespace

void SynthConfig::validate() const {
  if (classes < 2) throw ArgumentError("synth: need at least 2 classes");
  if (folds < 1) throw ArgumentError("synth: need at least 1 fold");
  if (clips_per_class < folds) throw ArgumentError("synth: clips_per_class must be >= folds");
  if (!(min_seconds > 0.0 && min_seconds < 3.0 && max_seconds >= 3.0))
    throw ArgumentError("synth: durations must satisfy 0 < min < 3 <= max");
  if (sample_rate < 8000) throw ArgumentError("synth: sample rate below 8 kHz");
  if (!(jitter >= 0.0)) throw ArgumentError("synth: jitter must be >= 0");
  if (!(clutter >= 0.0)) throw ArgumentError("synth: clutter must be >= 0");
  if (!(pitch_spread >= 1.0)) throw ArgumentError("synth: pitch_spread must be >= 1");
}

ClassRecipe class_recipe(std::uint64_t seed, std::size_t class_index, double pitch_spread) {
  if (!(pitch_spread >= 1.0)) throw ArgumentError("synth: pitch_spread must be >= 1");
  SeededRng rng(derive_seed(seed, {0x5EC1BEULL, class_index}));
  ClassRecipe r;
  const double tilt = rng.uniform(0.0, 1.5);
  r.partials.resize(kPartials);
  for (std::size_t h = 0; h < kPartials; ++h) {
    const double u = rng.uniform();
    r.partials[h] = u * u * std::pow(static_cast<double>(h + 1), -tilt);
  }
  r.partials[0] = std::max(r.partials[0], 0.2);
  r.noise_center_hz = log_uniform(rng, 250.0, 6000.0);
  r.noise_q = rng.uniform(2.0, 8.0);
  r.noise_mix = rng.uniform(0.2, 0.6);
  r.am_rate_hz = log_uniform(rng, 0.5, 8.0);
  r.am_depth = rng.uniform(0.0, 0.7);
  const double mid = log_uniform(rng, 110.0, 700.0);
  r.f0_lo = mid / pitch_spread;
  r.f0_hi = mid * pitch_spread;
  return r;
}

std::vector<std::string> synth_class_names(std::size_t classes) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "class%02zu", c);
    names.emplace_back(buf);
  }
  return names;
}

std::vector<AudioClip> synth_clips(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<ClassRecipe> recipes;
  for (std::size_t c = 0; c < cfg.classes; ++c)
    recipes.push_back(class_recipe(cfg.seed, c, cfg.pitch_spread));
  std::vector<AudioClip> clips(cfg.classes * cfg.clips_per_class);
  // Every clip draws from its own seeded stream, so the schedule cannot
  // change the output.
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(clips.size()); ++i) {
    const std::size_t c = static_cast<std::size_t>(i) / cfg.clips_per_class;
    const std::size_t j = static_cast<std::size_t>(i) % cfg.clips_per_class;
    SeededRng rng(derive_seed(cfg.seed, {c, j}));
    const double hi = j == 0 ? std::min(cfg.max_seconds, 2.5) : cfg.max_seconds;
    const double seconds = rng.uniform(cfg.min_seconds, std::max(cfg.min_seconds, hi));
    AudioClip& clip = clips[static_cast<std::size_t>(i)];
    char buf[48];
    std::snprintf(buf, sizeof buf, "c%02zu_%03zu", c, j);
    clip.clip_id = buf;
    clip.label = static_cast<int>(c);
    clip.fold = 1 + static_cast<int>(j % cfg.folds);
    const auto n = static_cast<std::size_t>(std::llround(seconds * cfg.sample_rate));
    const double gain = rng.uniform(0.25, 0.9);
    std::vector<double> x = render(recipes[c], n, cfg.jitter, cfg.sample_rate, rng);
    if (cfg.clutter > 0.0) {
      const ClassRecipe bg =
          class_recipe(cfg.seed, kBackgroundBase + rng.below(kBackgroundBase), cfg.pitch_spread);
      const std::vector<double> b = render(bg, n, cfg.jitter, cfg.sample_rate, rng);
      const double level = cfg.clutter * rng.uniform(0.5, 1.5);
      for (std::size_t k = 0; k < n; ++k) x[k] += level * b[k];
    }
    clip.wave = finish(std::move(x), gain, cfg.sample_rate);
  }
  return clips;
}

DatasetManifest synth_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  const auto clips = synth_clips(cfg);
  std::filesystem::create_directories(out_dir / "audio");
  DatasetManifest m;
  m.layout = Layout::kFolded;
  m.root = out_dir;
  m.class_names = synth_class_names(cfg.classes);
  for (const auto& c : clips) {
    const std::string rel = "audio/" + c.clip_id + ".wav";
    frontend::write_wav16(out_dir / rel, c.wave);
    m.entries.push_back({c.clip_id, rel, c.label, c.fold, c.wave.seconds()});
  }
  write_manifest(m, out_dir / "manifest.csv");
  return m;
}

}  // namespace fsa::labctl
