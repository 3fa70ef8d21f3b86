// include/svc/audio.hpp

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

#ifndef SVC_AUDIO_HPP_
#define SVC_AUDIO_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace svc {

inline constexpr int kDefaultSampleRate = 16000;
inline constexpr int kMuLawMu = 255;
inline constexpr int kSilenceCode = 128;

/// Mono waveform. Samples are kept in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = kDefaultSampleRate;
  std::optional<int> singer_id;

  std::size_t size() const { return samples.size(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// 8-bit companded codes, one per sample of the source clip.
struct MuLawStream {
  std::vector<std::uint8_t> codes;
  int sample_rate = kDefaultSampleRate;

  std::size_t size() const { return codes.size(); }
};

enum class WavEncoding { kPcm16, kFloat32 };

/// Reads a RIFF/WAVE file (PCM-16 or IEEE float-32, including the
/// WAVE_FORMAT_EXTENSIBLE wrapper). Channels are averaged to mono.
AudioClip load_wav(const std::filesystem::path& path);

/// Writes a mono clip. PCM-16 output rounds to nearest and saturates.
void save_wav(const AudioClip& clip, const std::filesystem::path& path,
              WavEncoding encoding = WavEncoding::kPcm16);

/// Windowed-sinc resampling. Output length is
/// round(input_length * target_rate / input_rate); output is clamped to [-1, 1].
AudioClip resample(const AudioClip& clip, int target_rate);

/// Throws DomainError if any sample is outside [-1, 1].
MuLawStream mulaw_encode(const AudioClip& clip, int mu = kMuLawMu);
MuLawStream mulaw_encode_clamped(const AudioClip& clip, int mu = kMuLawMu);
AudioClip mulaw_decode(const MuLawStream& stream, int mu = kMuLawMu);

// Scalar forms used by the model code.
int mulaw_encode_sample(double x, int mu = kMuLawMu);
double mulaw_decode_sample(int code, int mu = kMuLawMu);

enum class AugmentMode { kReverse, kInvert, kReverseInvert };

AudioClip augment(const AudioClip& clip, AugmentMode mode);

/// Clamps every sample into [-1, 1] in place.
void clamp_samples(std::span<float> samples);

}  // namespace svc

#endif  // SVC_AUDIO_HPP_
