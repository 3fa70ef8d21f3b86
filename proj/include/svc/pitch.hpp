// include/svc/pitch.hpp

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

#ifndef SVC_PITCH_HPP_
#define SVC_PITCH_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "svc/audio.hpp"

namespace svc {

inline constexpr int kPitchHop = 100;
inline constexpr double kPitchFMin = 50.0;
inline constexpr double kPitchFMax = 1100.0;
inline constexpr int kPitchWindow = 1024;

/// Frame-rate f0 track. Frame i covers samples [i * hop, (i + 1) * hop).
/// Before normalization `values` holds Hz (0 for unvoiced frames); after
/// normalization it holds log-scaled values in [0, 1]. `voiced` is kept in
/// both states so that normalization can be undone.
struct PitchContour {
  std::vector<double> values;
  std::vector<std::uint8_t> voiced;
  int hop = kPitchHop;
  int sample_rate = kDefaultSampleRate;
  bool normalized = false;
  double f_min = kPitchFMin;
  double f_max = kPitchFMax;

  std::size_t size() const { return values.size(); }
  std::size_t voiced_count() const;

  /// Builds an unnormalized contour from Hz values; 0 marks unvoiced frames.
  static PitchContour from_hz(std::vector<double> hz, int hop = kPitchHop,
                              int sample_rate = kDefaultSampleRate,
                              double f_min = kPitchFMin, double f_max = kPitchFMax);
  /// Builds a normalized contour; every frame is treated as voiced.
  static PitchContour from_normalized(std::vector<double> values, int hop = kPitchHop,
                                      int sample_rate = kDefaultSampleRate);
};

struct PitchTrackerOptions {
  int hop = kPitchHop;
  double f_min = kPitchFMin;
  double f_max = kPitchFMax;
  int window = kPitchWindow;
  /// Cumulative-mean-normalized difference below which the first dip is taken.
  double dip_threshold = 0.15;
  /// Frames whose periodicity (1 - normalized difference at the chosen lag)
  /// falls below this are unvoiced.
  double voicing_threshold = 0.3;
};

/// YIN-style tracker. One estimate per hop; the analysis window is centred on
/// the middle of the hop and shifted inward at the clip edges.
PitchContour extract_pitch(const AudioClip& clip, const PitchTrackerOptions& opts = {});
PitchContour extract_pitch(const AudioClip& clip, int hop, double f_min = kPitchFMin,
                           double f_max = kPitchFMax);

/// Log-scale mapping of voiced frames onto [0, 1]; unvoiced frames become 0.
PitchContour normalize_pitch(const PitchContour& contour, double f_min = kPitchFMin,
                             double f_max = kPitchFMax);
PitchContour denormalize_pitch(const PitchContour& contour);

PitchContour scale_pitch(const PitchContour& contour, double factor);

/// Piecewise-linear resampling of the contour values onto `target_length`
/// evenly spaced positions; first and last values are reproduced exactly.
std::vector<double> upsample_linear(const PitchContour& contour, std::size_t target_length);

/// Regression targets at latent rate: mean of each window of
/// latent_stride / hop normalized frames (the final window may be partial).
std::vector<double> downsample_to_latent(const PitchContour& contour, int latent_stride = 800);

/// Frames [first, first + count) clipped to the contour.
PitchContour slice_contour(const PitchContour& contour, std::size_t first, std::size_t count);

double median_voiced_hz(const PitchContour& contour);

/// CSV with header frame_index,f0_hz,normalized_value.
void write_contour_csv(const PitchContour& contour, const std::filesystem::path& path);
PitchContour read_contour_csv(const std::filesystem::path& path, int hop = kPitchHop,
                              int sample_rate = kDefaultSampleRate);

}  // namespace svc

#endif  // SVC_PITCH_HPP_
