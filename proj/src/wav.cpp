// src/wav.cpp

// Copyright 2026  The svc Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "svc/audio.hpp"
#include "svc/errors.hpp"

namespace svc {

namespace {

static_assert(std::endian::native == std::endian::little,
              "WAV reader assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::vector<char>& buf, std::size_t pos) {
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  return v;
}

template <typename T>
void write_le(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

std::string describe_format(std::uint16_t tag, std::uint16_t bits) {
  std::string name;
  switch (tag) {
    case kFormatPcm: name = "PCM"; break;
    case kFormatFloat: name = "IEEE float"; break;
    default: name = "format tag " + std::to_string(tag); break;
  }
  return name + " " + std::to_string(bits) + "-bit";
}

}  // namespace

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open WAV file: " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(is)),
                        std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file: " + path.string());
  }

  std::uint16_t format_tag = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  bool have_fmt = false;
  std::size_t data_pos = 0, data_len = 0;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id(buf.data() + pos, 4);
    const std::uint32_t len = read_le<std::uint32_t>(buf, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (len < 16 || body + len > buf.size())
        throw FormatError("truncated fmt chunk: " + path.string());
      format_tag = read_le<std::uint16_t>(buf, body);
      channels = read_le<std::uint16_t>(buf, body + 2);
      sample_rate = read_le<std::uint32_t>(buf, body + 4);
      bits = read_le<std::uint16_t>(buf, body + 14);
      if (format_tag == kFormatExtensible) {
        if (len < 40) throw FormatError("truncated extensible fmt chunk: " + path.string());
        // First two bytes of the subformat GUID carry the real tag.
        format_tag = read_le<std::uint16_t>(buf, body + 24);
      }
      have_fmt = true;
    } else if (id == "data") {
      data_pos = body;
      data_len = std::min<std::size_t>(len, buf.size() - body);
      have_data = true;
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt || !have_data)
    throw FormatError("missing fmt or data chunk: " + path.string());
  if (channels == 0 || sample_rate == 0)
    throw FormatError("invalid channel count or sample rate: " + path.string());

  const bool pcm16 = format_tag == kFormatPcm && bits == 16;
  const bool float32 = format_tag == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw FormatError("unsupported WAV encoding " + describe_format(format_tag, bits) +
                      " in " + path.string() + " (expected PCM 16-bit or IEEE float 32-bit)");
  }

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t frames = data_len / frame_bytes;

  AudioClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t at = data_pos + f * frame_bytes + c * bytes_per_sample;
      if (pcm16) {
        acc += read_le<std::int16_t>(buf, at) / 32768.0;
      } else {
        acc += read_le<float>(buf, at);
      }
    }
    clip.samples[f] = static_cast<float>(std::clamp(acc / channels, -1.0, 1.0));
  }
  return clip;
}

void save_wav(const AudioClip& clip, const std::filesystem::path& path,
              WavEncoding encoding) {
  if (clip.sample_rate <= 0) throw ArgumentError("sample rate must be positive");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write WAV file: " + path.string());

  const std::uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const std::uint16_t tag = encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.size() * (bits / 8));

  os.write("RIFF", 4);
  write_le<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_le<std::uint32_t>(os, 16);
  write_le<std::uint16_t>(os, tag);
  write_le<std::uint16_t>(os, 1);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(clip.sample_rate));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(clip.sample_rate) * (bits / 8));
  write_le<std::uint16_t>(os, bits / 8);
  write_le<std::uint16_t>(os, bits);
  os.write("data", 4);
  write_le<std::uint32_t>(os, data_bytes);
  for (float s : clip.samples) {
    if (encoding == WavEncoding::kPcm16) {
      const double scaled = std::round(static_cast<double>(s) * 32768.0);
      write_le<std::int16_t>(os, static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0)));
    } else {
      write_le<float>(os, s);
    }
  }
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace svc
