// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/frontend/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "fsa/common/errors.hpp"

namespace fsa::frontend {
namespace {

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}
std::uint16_t le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}
void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

Waveform decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t len = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) {
      // Streaming writers leave 0 or 0xFFFFFFFF in the data length.
      const bool placeholder = len == 0 || len == 0xFFFFFFFFu;
      if (std::memcmp(chunk, "data", 4) != 0 || !placeholder) {
        throw FormatError("truncated WAV chunk");
      }
    }
    std::size_t avail = std::min<std::size_t>(len, bytes.size() - body);
    if (len == 0 && std::memcmp(chunk, "data", 4) == 0) avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw FormatError("short fmt chunk");
      format = le16(chunk + 8);
      channels = le16(chunk + 10);
      rate = le32(chunk + 12);
      bits = le16(chunk + 22);
      if (format == kFormatExtensible && avail >= 26) format = le16(chunk + 32);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = avail;
      if (len == 0 || len == 0xFFFFFFFFu) break;
    }
    pos = body + len + (len & 1u);
  }
  if (!data || channels == 0 || rate == 0) throw FormatError("WAV missing fmt or data chunk");

  std::size_t sample_bytes;
  if (format == kFormatPcm && bits == 16) {
    sample_bytes = 2;
  } else if (format == kFormatFloat && bits == 32) {
    sample_bytes = 4;
  } else {
    throw FormatError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                      std::to_string(bits) + " bits)");
  }
  const std::size_t frames = data_len / (sample_bytes * channels);
  Waveform wave;
  wave.sample_rate = static_cast<int>(rate);
  wave.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data + (f * channels + c) * sample_bytes;
      if (sample_bytes == 2) {
        acc += static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else {
        acc += static_cast<double>(std::bit_cast<float>(le32(p)));
      }
    }
    wave.samples[f] = acc / channels;
  }
  return wave;
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav16(const Waveform& wave) {
  const auto data_len = static_cast<std::uint32_t>(wave.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(wave.sample_rate));
  put32(out, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, data_len);
  for (double s : wave.samples) {
    // Inverse of the decode scale, so decode -> encode reproduces the bytes.
    const long v = std::lround(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto q = static_cast<std::int16_t>(std::clamp(v, -32768L, 32767L));
    put16(out, static_cast<std::uint16_t>(q));
  }
  return out;
}

void write_wav16(const std::filesystem::path& path, const Waveform& wave) {
  const auto bytes = encode_wav16(wave);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Waveform resample_linear(const Waveform& wave, int target_rate) {
  if (target_rate <= 0) throw ArgumentError("target sample rate must be positive");
  if (wave.sample_rate == target_rate || wave.samples.empty()) {
    Waveform w = wave;
    w.sample_rate = target_rate;
    return w;
  }
  const double ratio = static_cast<double>(wave.sample_rate) / target_rate;
  const auto out_len = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(wave.samples.size()) / ratio)));
  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double t = i * ratio;
    const auto j = static_cast<std::size_t>(t);
    const double frac = t - static_cast<double>(j);
    const double a = wave.samples[j];
    const double b = j + 1 < wave.samples.size() ? wave.samples[j + 1] : a;
    out.samples[i] = a + frac * (b - a);
  }
  return out;
}

}  // namespace fsa::frontend
