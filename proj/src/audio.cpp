// src/audio.cpp

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
#include <cmath>
#include <numbers>

#include "svc/audio.hpp"
#include "svc/errors.hpp"

namespace svc {

namespace {

// Half-width of the interpolation kernel, in zero crossings of the sinc at the
// output cutoff.
constexpr int kSincZeros = 24;
constexpr double kKaiserBeta = 8.6;

double kaiser(double x) {
  // x in [-1, 1]
  const double arg = std::max(0.0, 1.0 - x * x);
  return std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(arg)) /
         std::cyl_bessel_i(0.0, kKaiserBeta);
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

void clamp_samples(std::span<float> samples) {
  for (float& s : samples) s = std::clamp(s, -1.0f, 1.0f);
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw ArgumentError("resample: target rate must be positive");
  if (clip.sample_rate <= 0) throw ArgumentError("resample: source rate must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
  const auto out_len = static_cast<std::size_t>(std::llround(clip.size() * ratio));
  const double cutoff = std::min(1.0, ratio);
  const double half_width = kSincZeros / cutoff;
  const auto in_len = static_cast<std::ptrdiff_t>(clip.size());

  AudioClip out;
  out.sample_rate = target_rate;
  out.singer_id = clip.singer_id;
  out.samples.resize(out_len);
  for (std::size_t n = 0; n < out_len; ++n) {
    const double t = n / ratio;
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(t - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(in_len - 1, static_cast<std::ptrdiff_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      const double d = t - static_cast<double>(k);
      acc += clip.samples[k] * cutoff * sinc(cutoff * d) * kaiser(d / half_width);
    }
    out.samples[n] = static_cast<float>(std::clamp(acc, -1.0, 1.0));
  }
  return out;
}

int mulaw_encode_sample(double x, int mu) {
  const double mag = std::log1p(mu * std::abs(x)) / std::log1p(static_cast<double>(mu));
  const double y = x < 0 ? -mag : mag;
  const double code = std::floor((y + 1.0) / 2.0 * mu + 0.5);
  return static_cast<int>(std::clamp(code, 0.0, static_cast<double>(mu)));
}

double mulaw_decode_sample(int code, int mu) {
  const double y = 2.0 * code / mu - 1.0;
  const double mag = (std::pow(1.0 + mu, std::abs(y)) - 1.0) / mu;
  return y < 0 ? -mag : mag;
}

MuLawStream mulaw_encode(const AudioClip& clip, int mu) {
  if (mu <= 0 || mu > 255) throw ArgumentError("mu must be in [1, 255]");
  MuLawStream out;
  out.sample_rate = clip.sample_rate;
  out.codes.resize(clip.size());
  for (std::size_t i = 0; i < clip.size(); ++i) {
    const float x = clip.samples[i];
    if (!(x >= -1.0f && x <= 1.0f)) {
      throw DomainError("mulaw_encode: sample " + std::to_string(i) + " = " +
                        std::to_string(x) + " outside [-1, 1]");
    }
    out.codes[i] = static_cast<std::uint8_t>(mulaw_encode_sample(x, mu));
  }
  return out;
}

MuLawStream mulaw_encode_clamped(const AudioClip& clip, int mu) {
  AudioClip clamped = clip;
  for (float& s : clamped.samples) {
    s = std::isfinite(s) ? std::clamp(s, -1.0f, 1.0f) : 0.0f;
  }
  return mulaw_encode(clamped, mu);
}

AudioClip mulaw_decode(const MuLawStream& stream, int mu) {
  if (mu <= 0 || mu > 255) throw ArgumentError("mu must be in [1, 255]");
  AudioClip out;
  out.sample_rate = stream.sample_rate;
  out.samples.resize(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const int code = stream.codes[i];
    if (code > mu) {
      throw DomainError("mulaw_decode: code " + std::to_string(code) + " exceeds mu = " +
                        std::to_string(mu));
    }
    out.samples[i] = static_cast<float>(mulaw_decode_sample(code, mu));
  }
  return out;
}

AudioClip augment(const AudioClip& clip, AugmentMode mode) {
  AudioClip out = clip;
  if (mode == AugmentMode::kReverse || mode == AugmentMode::kReverseInvert) {
    std::reverse(out.samples.begin(), out.samples.end());
  }
  if (mode == AugmentMode::kInvert || mode == AugmentMode::kReverseInvert) {
    for (float& s : out.samples) s = -s;
  }
  return out;
}

}  // namespace svc
