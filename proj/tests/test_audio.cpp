// tests/test_audio.cpp

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

#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <random>

#include "svc/audio.hpp"
#include "svc/errors.hpp"
#include "test_util.hpp"

namespace svc {
namespace {

// Independent companding formulas.
int oracle_encode(double x) {
  const double y = (x < 0 ? -1.0 : 1.0) * std::log1p(255.0 * std::abs(x)) / std::log(256.0);
  return std::clamp(static_cast<int>(std::floor((y + 1.0) / 2.0 * 255.0 + 0.5)), 0, 255);
}

double oracle_decode(int code) {
  const double y = 2.0 * code / 255.0 - 1.0;
  return (y < 0 ? -1.0 : 1.0) * (std::pow(256.0, std::abs(y)) - 1.0) / 255.0;
}

// Amplitude at which the code switches from c - 1 to c.
double bin_edge(int c) {
  const double y = 2.0 * (c - 0.5) / 255.0 - 1.0;
  return (y < 0 ? -1.0 : 1.0) * (std::pow(256.0, std::abs(y)) - 1.0) / 255.0;
}

double bin_width(int code) {
  const double lo = code == 0 ? -1.0 : bin_edge(code);
  const double hi = code == 255 ? 1.0 : bin_edge(code + 1);
  return hi - lo;
}

void write_raw_wav(const std::filesystem::path& path, std::uint16_t format, std::uint16_t channels,
                   std::uint32_t rate, std::uint16_t bits, const std::vector<char>& data) {
  std::ofstream os(path, std::ios::binary);
  auto u32 = [&](std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&](std::uint16_t v) { os.write(reinterpret_cast<const char*>(&v), 2); };
  os.write("RIFF", 4);
  u32(static_cast<std::uint32_t>(36 + data.size()));
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  u32(16);
  u16(format);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  os.write("data", 4);
  u32(static_cast<std::uint32_t>(data.size()));
  os.write(data.data(), static_cast<std::streamsize>(data.size()));
}

template <typename V>
std::vector<char> bytes_of(const std::vector<V>& v) {
  std::vector<char> out(v.size() * sizeof(V));
  std::memcpy(out.data(), v.data(), out.size());
  return out;
}

}  // namespace

TEST_SUITE("audio") {

TEST_CASE("mu-law fixed points") {
  CHECK(mulaw_encode_sample(1.0) == 255);
  CHECK(mulaw_encode_sample(-1.0) == 0);
  CHECK(mulaw_encode_sample(0.0) == oracle_encode(0.0));
  CHECK(mulaw_encode_sample(0.0) == 128);
  CHECK(mulaw_decode_sample(0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(mulaw_decode_sample(255) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mu-law matches the formula for every code and random inputs") {
  for (int c = 0; c < 256; ++c) CHECK(mulaw_decode_sample(c) == doctest::Approx(oracle_decode(c)).epsilon(1e-12));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double x = u(rng);
    REQUIRE(mulaw_encode_sample(x) == oracle_encode(x));
  }
}

TEST_CASE("mu-law round trip stays within the bin width") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  AudioClip clip;
  clip.samples.resize(10000);
  for (auto& s : clip.samples) s = u(rng);
  clip.samples[0] = -1.0f;
  clip.samples[1] = 0.0f;
  clip.samples[2] = 1.0f;
  const MuLawStream codes = mulaw_encode(clip);
  const AudioClip back = mulaw_decode(codes);
  REQUIRE(back.size() == clip.size());
  for (std::size_t i = 0; i < clip.size(); ++i) {
    const int c = codes.codes[i];
    REQUIRE(std::abs(back.samples[i] - clip.samples[i]) <= bin_width(c) + 1e-7);
  }
}

TEST_CASE("mu-law is monotone across all bin edges") {
  int prev = mulaw_encode_sample(-1.0);
  for (int c = 1; c < 256; ++c) {
    const double e = bin_edge(c);
    const int below = mulaw_encode_sample(std::nextafter(e, -2.0) - 1e-12);
    const int above = mulaw_encode_sample(std::nextafter(e, 2.0) + 1e-12);
    CHECK(below <= above);
    CHECK(below >= prev);
    CHECK(above == c);
    prev = above;
  }
}

TEST_CASE("mu-law rejects out-of-range input") {
  AudioClip c;
  c.samples = {0.0f, 1.5f};
  CHECK_THROWS_AS(mulaw_encode(c), DomainError);
  const MuLawStream s = mulaw_encode_clamped(c);
  CHECK(s.codes[1] == 255);
}

TEST_CASE("augmentation modes are involutions and compose") {
  AudioClip c;
  c.samples = {0.5f, -0.25f, 0.1f};
  CHECK(augment(c, AugmentMode::kInvert).samples == std::vector<float>{-0.5f, 0.25f, -0.1f});
  CHECK(augment(c, AugmentMode::kReverse).samples == std::vector<float>{0.1f, -0.25f, 0.5f});
  CHECK(augment(augment(c, AugmentMode::kReverse), AugmentMode::kReverse).samples == c.samples);
  CHECK(augment(augment(c, AugmentMode::kInvert), AugmentMode::kInvert).samples == c.samples);
  CHECK(augment(c, AugmentMode::kReverseInvert).samples ==
        augment(augment(c, AugmentMode::kReverse), AugmentMode::kInvert).samples);
  const auto a = augment(c, AugmentMode::kReverse).samples;
  const auto b = augment(c, AugmentMode::kInvert).samples;
  const auto d = augment(c, AugmentMode::kReverseInvert).samples;
  CHECK(a != c.samples);
  CHECK(b != c.samples);
  CHECK(d != c.samples);
  CHECK(a != b);
  CHECK(a != d);
  CHECK(b != d);
}

TEST_CASE("load_wav decodes PCM-16 by dividing by 32768") {
  test::TempDir dir("wav");
  write_raw_wav(dir / "one.wav", 1, 1, 16000, 16, bytes_of(std::vector<std::int16_t>{16384, -32768, 0}));
  const AudioClip c = load_wav(dir / "one.wav");
  REQUIRE(c.size() == 3);
  CHECK(c.samples[0] == 0.5f);
  CHECK(c.samples[1] == -1.0f);
  CHECK(c.sample_rate == 16000);
}

TEST_CASE("load_wav silence, stereo cancellation and float32") {
  test::TempDir dir("wav");
  write_raw_wav(dir / "silence.wav", 1, 1, 16000, 16, bytes_of(std::vector<std::int16_t>(16000, 0)));
  const AudioClip s = load_wav(dir / "silence.wav");
  CHECK(s.size() == 16000);
  CHECK(std::all_of(s.samples.begin(), s.samples.end(), [](float v) { return v == 0.0f; }));

  std::vector<std::int16_t> stereo;
  for (int i = 0; i < 100; ++i) {
    const auto v = static_cast<std::int16_t>(300 * i - 15000);
    stereo.push_back(v);
    stereo.push_back(static_cast<std::int16_t>(-v));
  }
  write_raw_wav(dir / "stereo.wav", 1, 2, 16000, 16, bytes_of(stereo));
  const AudioClip m = load_wav(dir / "stereo.wav");
  CHECK(m.size() == 100);
  CHECK(std::all_of(m.samples.begin(), m.samples.end(), [](float v) { return v == 0.0f; }));

  write_raw_wav(dir / "float.wav", 3, 1, 22050, 32, bytes_of(std::vector<float>{0.25f, -0.75f}));
  const AudioClip f = load_wav(dir / "float.wav");
  CHECK(f.sample_rate == 22050);
  CHECK(f.samples == std::vector<float>{0.25f, -0.75f});
}

TEST_CASE("load_wav errors") {
  test::TempDir dir("wav");
  CHECK_THROWS_AS(load_wav(dir / "missing.wav"), IoError);
  write_raw_wav(dir / "alaw.wav", 6, 1, 8000, 8, std::vector<char>(10, 0));
  try {
    load_wav(dir / "alaw.wav");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("format tag 6") != std::string::npos);
  }
  std::ofstream(dir / "junk.wav") << "not a wav file at all";
  CHECK_THROWS_AS(load_wav(dir / "junk.wav"), FormatError);
}

TEST_CASE("save_wav round trips") {
  test::TempDir dir("wav");
  const AudioClip c = test::sine(300.0, 0.1, 0.7);
  save_wav(c, dir / "f.wav", WavEncoding::kFloat32);
  CHECK(load_wav(dir / "f.wav").samples == c.samples);
  save_wav(c, dir / "p.wav", WavEncoding::kPcm16);
  const AudioClip p = load_wav(dir / "p.wav");
  REQUIRE(p.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(p.samples[i] - c.samples[i]) <= 1.0 / 32768.0);
}

TEST_CASE("resample identity, length and spectral peak") {
  const AudioClip c = test::sine(440.0, 0.5);
  CHECK(resample(c, 16000).samples == c.samples);

  AudioClip hi = test::sine(1000.0, 1.0, 0.5, 32000);
  CHECK(resample(hi, 16000).size() == 16000);
  CHECK_THROWS_AS(resample(hi, 0), ArgumentError);

  const AudioClip src = test::sine(440.0, 1.0, 0.8, 48000);
  const AudioClip out = resample(src, 16000);
  REQUIRE(out.size() == 16000);
  CHECK(out.sample_rate == 16000);
  // Naive DFT magnitude over 1 s gives 1 Hz bins.
  int best = 0;
  double best_mag = -1.0;
  for (int k = 1; k < 2000; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t n = 0; n < out.size(); ++n)
      acc += static_cast<double>(out.samples[n]) * std::polar(1.0, -2.0 * M_PI * k * static_cast<double>(n) / 16000.0);
    if (std::abs(acc) > best_mag) {
      best_mag = std::abs(acc);
      best = k;
    }
  }
  CHECK(std::abs(best - 440) <= 1);
}

TEST_CASE("resample preserves duration and clamps") {
  AudioClip c = test::sine(200.0, 0.3, 1.0, 44100);
  const AudioClip out = resample(c, 16000);
  CHECK(std::abs(out.duration_seconds() - c.duration_seconds()) <= 1.0 / 16000.0);
  for (float v : out.samples) CHECK(std::abs(v) <= 1.0f);
}

}  // TEST_SUITE

}  // namespace svc
