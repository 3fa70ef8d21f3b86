// src/pitch.cpp

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
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "svc/errors.hpp"
#include "svc/pitch.hpp"

namespace svc {

std::size_t PitchContour::voiced_count() const {
  return static_cast<std::size_t>(std::count(voiced.begin(), voiced.end(), std::uint8_t{1}));
}

PitchContour PitchContour::from_hz(std::vector<double> hz, int hop, int sample_rate,
                                   double f_min, double f_max) {
  PitchContour c;
  c.voiced.resize(hz.size());
  for (std::size_t i = 0; i < hz.size(); ++i) {
    if (hz[i] < 0) throw ArgumentError("negative f0 at frame " + std::to_string(i));
    c.voiced[i] = hz[i] > 0 ? 1 : 0;
  }
  c.values = std::move(hz);
  c.hop = hop;
  c.sample_rate = sample_rate;
  c.f_min = f_min;
  c.f_max = f_max;
  return c;
}

PitchContour PitchContour::from_normalized(std::vector<double> values, int hop,
                                           int sample_rate) {
  PitchContour c;
  c.voiced.assign(values.size(), 1);
  c.values = std::move(values);
  c.hop = hop;
  c.sample_rate = sample_rate;
  c.normalized = true;
  return c;
}

namespace {

// Cumulative mean normalized difference of one analysis window, for lags
// [0, max_lag]. Entry 0 is 1 by definition.
void normalized_difference(const float* x, int integration, int max_lag,
                           std::vector<double>& out) {
  out.assign(max_lag + 1, 1.0);
  double running = 0.0;
  for (int lag = 1; lag <= max_lag; ++lag) {
    double d = 0.0;
    for (int j = 0; j < integration; ++j) {
      const double diff = static_cast<double>(x[j]) - x[j + lag];
      d += diff * diff;
    }
    running += d;
    out[lag] = running > 0.0 ? d * lag / running : 1.0;
  }
}

}  // namespace

PitchContour extract_pitch(const AudioClip& clip, const PitchTrackerOptions& opts) {
  if (opts.hop < 1) throw ArgumentError("extract_pitch: hop must be >= 1");
  if (!(opts.f_min > 0 && opts.f_min < opts.f_max))
    throw ArgumentError("extract_pitch: need 0 < f_min < f_max");
  if (clip.sample_rate != kDefaultSampleRate)
    throw ArgumentError("extract_pitch: expected 16000 Hz input, got " +
                        std::to_string(clip.sample_rate));
  const int window = opts.window;
  if (clip.size() < static_cast<std::size_t>(window)) {
    throw InsufficientInputError("extract_pitch: clip of " + std::to_string(clip.size()) +
                                 " samples is shorter than the " + std::to_string(window) +
                                 "-sample analysis window");
  }

  const int sr = clip.sample_rate;
  const int max_lag = std::min(window / 2, static_cast<int>(std::floor(sr / opts.f_min)));
  const int min_lag = std::max(2, static_cast<int>(std::ceil(sr / opts.f_max)));
  const int integration = window - max_lag;
  const auto length = static_cast<std::ptrdiff_t>(clip.size());
  const std::size_t frames = (clip.size() + opts.hop - 1) / opts.hop;

  std::vector<double> hz(frames, 0.0);
  std::vector<double> cmnd;
  for (std::size_t f = 0; f < frames; ++f) {
    const std::ptrdiff_t centre = static_cast<std::ptrdiff_t>(f) * opts.hop + opts.hop / 2;
    const std::ptrdiff_t start = std::clamp<std::ptrdiff_t>(centre - window / 2, 0, length - window);
    const float* x = clip.samples.data() + start;

    double energy = 0.0;
    for (int j = 0; j < window; ++j) energy += static_cast<double>(x[j]) * x[j];
    if (energy < 1e-10 * window) continue;

    normalized_difference(x, integration, max_lag, cmnd);

    int lag = -1;
    for (int t = min_lag; t <= max_lag; ++t) {
      if (cmnd[t] < opts.dip_threshold) {
        while (t + 1 <= max_lag && cmnd[t + 1] < cmnd[t]) ++t;
        lag = t;
        break;
      }
    }
    if (lag < 0) {
      lag = static_cast<int>(std::min_element(cmnd.begin() + min_lag, cmnd.end()) - cmnd.begin());
    }
    const double periodicity = 1.0 - cmnd[lag];
    if (periodicity < opts.voicing_threshold) continue;

    double refined = lag;
    if (lag > 1 && lag < max_lag) {
      const double a = cmnd[lag - 1], b = cmnd[lag], c = cmnd[lag + 1];
      const double denom = a - 2.0 * b + c;
      if (denom > 0.0) refined = lag + 0.5 * (a - c) / denom;
    }
    hz[f] = std::clamp(sr / refined, opts.f_min, opts.f_max);
  }
  return PitchContour::from_hz(std::move(hz), opts.hop, sr, opts.f_min, opts.f_max);
}

PitchContour extract_pitch(const AudioClip& clip, int hop, double f_min, double f_max) {
  PitchTrackerOptions opts;
  opts.hop = hop;
  opts.f_min = f_min;
  opts.f_max = f_max;
  return extract_pitch(clip, opts);
}

PitchContour normalize_pitch(const PitchContour& contour, double f_min, double f_max) {
  if (!(f_min > 0 && f_min < f_max)) throw ArgumentError("normalize_pitch: need 0 < f_min < f_max");
  if (contour.normalized) throw ArgumentError("normalize_pitch: contour already normalized");
  PitchContour out = contour;
  out.normalized = true;
  out.f_min = f_min;
  out.f_max = f_max;
  const double lo = std::log(f_min), span = std::log(f_max) - lo;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.values[i] = out.voiced[i] ? std::clamp((std::log(contour.values[i]) - lo) / span, 0.0, 1.0)
                                  : 0.0;
  }
  return out;
}

PitchContour denormalize_pitch(const PitchContour& contour) {
  if (!contour.normalized) throw ArgumentError("denormalize_pitch: contour is not normalized");
  PitchContour out = contour;
  out.normalized = false;
  const double lo = std::log(contour.f_min), span = std::log(contour.f_max) - lo;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.values[i] = out.voiced[i] ? std::exp(lo + contour.values[i] * span) : 0.0;
  }
  return out;
}

PitchContour scale_pitch(const PitchContour& contour, double factor) {
  if (!(factor > 0)) throw ArgumentError("scale_pitch: factor must be positive");
  if (contour.normalized) throw ArgumentError("scale_pitch: expects Hz values, got a normalized contour");
  PitchContour out = contour;
  if (factor == 1.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.voiced[i]) out.values[i] = std::clamp(out.values[i] * factor, out.f_min, out.f_max);
  }
  return out;
}

std::vector<double> upsample_linear(const PitchContour& contour, std::size_t target_length) {
  const std::size_t n = contour.size();
  if (n < 2) throw InsufficientInputError("upsample_linear: need at least 2 frames");
  if (target_length < n)
    throw ArgumentError("upsample_linear: target length " + std::to_string(target_length) +
                        " is shorter than the contour (" + std::to_string(n) + ")");
  std::vector<double> out(target_length);
  const std::size_t denom = target_length - 1;
  for (std::size_t i = 0; i < target_length; ++i) {
    // Exact rational position i * (n - 1) / (target_length - 1).
    const std::size_t num = i * (n - 1);
    const std::size_t idx = num / denom;
    const std::size_t rem = num % denom;
    if (rem == 0) {
      out[i] = contour.values[idx];
    } else {
      const double frac = static_cast<double>(rem) / static_cast<double>(denom);
      out[i] = contour.values[idx] + frac * (contour.values[idx + 1] - contour.values[idx]);
    }
  }
  return out;
}

std::vector<double> downsample_to_latent(const PitchContour& contour, int latent_stride) {
  if (latent_stride <= 0 || contour.hop <= 0 || latent_stride % contour.hop != 0) {
    throw ArgumentError("downsample_to_latent: latent stride " + std::to_string(latent_stride) +
                        " is not a multiple of the pitch hop " + std::to_string(contour.hop));
  }
  if (!contour.normalized) throw ArgumentError("downsample_to_latent: contour must be normalized");
  const std::size_t per = static_cast<std::size_t>(latent_stride / contour.hop);
  const std::size_t frames = (contour.size() + per - 1) / per;
  std::vector<double> out(frames, 0.0);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t lo = f * per, hi = std::min(contour.size(), lo + per);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += contour.values[i];
    out[f] = acc / static_cast<double>(hi - lo);
  }
  return out;
}

PitchContour slice_contour(const PitchContour& contour, std::size_t first, std::size_t count) {
  PitchContour out = contour;
  const std::size_t lo = std::min(first, contour.size());
  const std::size_t hi = std::min(contour.size(), lo + count);
  out.values.assign(contour.values.begin() + lo, contour.values.begin() + hi);
  out.voiced.assign(contour.voiced.begin() + lo, contour.voiced.begin() + hi);
  return out;
}

double median_voiced_hz(const PitchContour& contour) {
  const PitchContour hz = contour.normalized ? denormalize_pitch(contour) : contour;
  std::vector<double> v;
  for (std::size_t i = 0; i < hz.size(); ++i)
    if (hz.voiced[i]) v.push_back(hz.values[i]);
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + v.size() / 2;
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

void write_contour_csv(const PitchContour& contour, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write contour CSV: " + path.string());
  const PitchContour hz = contour.normalized ? denormalize_pitch(contour) : contour;
  const PitchContour norm =
      contour.normalized ? contour : normalize_pitch(contour, contour.f_min, contour.f_max);
  os << "frame_index,f0_hz,normalized_value\n" << std::setprecision(10);
  for (std::size_t i = 0; i < contour.size(); ++i) {
    os << i << ',' << hz.values[i] << ',' << norm.values[i] << '\n';
  }
}

PitchContour read_contour_csv(const std::filesystem::path& path, int hop, int sample_rate) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read contour CSV: " + path.string());
  std::string line;
  std::getline(is, line);
  std::vector<double> hz;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string idx, f0;
    if (!std::getline(row, idx, ',') || !std::getline(row, f0, ','))
      throw FormatError("malformed contour row in " + path.string() + ": " + line);
    hz.push_back(std::stod(f0));
  }
  return PitchContour::from_hz(std::move(hz), hop, sample_rate);
}

}  // namespace svc
