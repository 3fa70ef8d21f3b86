// include/svc/evaluation.hpp

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

#ifndef SVC_EVALUATION_HPP_
#define SVC_EVALUATION_HPP_

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svc/audio.hpp"
#include "svc/dataset.hpp"
#include "svc/model.hpp"
#include "svc/pitch.hpp"

namespace svc {

inline constexpr int kNccMaxLag = 5;
inline constexpr std::size_t kNccMinOverlap = 10;

/// Normalized cross-correlation of two Hz contours over frames voiced in
/// both, maximised over lags in [-max_lag, max_lag] (b shifted against a),
/// without mean removal, clamped to [0, 1]. Lags with fewer than
/// `min_overlap` jointly voiced frames are not considered; if none qualifies
/// InsufficientOverlapError is thrown.
double ncc(const PitchContour& a, const PitchContour& b, int max_lag = kNccMaxLag,
           std::size_t min_overlap = kNccMinOverlap);

enum class EvalMode { kReconstruction, kConversion };

struct NccPair {
  std::string clip_id;
  int source_singer = 0;
  int target_singer = 0;
  std::optional<double> ncc;  // empty when the pair could not be scored
  std::string note;           // reason for a missing score
};

struct NccReport {
  EvalMode mode = EvalMode::kReconstruction;
  std::vector<NccPair> pairs;

  std::size_t scored() const;
  /// Arithmetic mean over scored pairs; empty when no pair was scored.
  std::optional<double> aggregate() const;

  /// Rows clip_id,source_singer,target_singer,ncc,note and a final
  /// "mean" footer row.
  void write_csv(const std::filesystem::path& path) const;
  std::string summary_json() const;
};

/// Anything that turns a source clip into a clip sung by `target_singer`,
/// following the source pitch multiplied by `pitch_factor`.
class ConversionSystem {
 public:
  virtual ~ConversionSystem() = default;
  virtual int n_singers() const = 0;
  /// `source_pitch` is the tracker contour (Hz) of `source`.
  virtual AudioClip convert(const AudioClip& source, const PitchContour& source_pitch, int target_singer,
                            double pitch_factor) const = 0;
};

/// encode -> scale_pitch -> build_condition -> generate -> mulaw_decode.
class ModelSystem final : public ConversionSystem {
 public:
  explicit ModelSystem(const ModelBundle& bundle, std::uint64_t seed = 0, Sampling sampling = Sampling::kArgmax)
      : bundle_(bundle), seed_(seed), sampling_(sampling) {}
  int n_singers() const override { return bundle_.config().n_singers; }
  AudioClip convert(const AudioClip& source, const PitchContour& source_pitch, int target_singer,
                    double pitch_factor) const override;

 private:
  const ModelBundle& bundle_;
  std::uint64_t seed_;
  Sampling sampling_;
};

/// Returns its input unchanged; the upper bound of every NCC score.
class IdentitySystem final : public ConversionSystem {
 public:
  explicit IdentitySystem(int n_singers) : n_(n_singers) {}
  int n_singers() const override { return n_; }
  AudioClip convert(const AudioClip& source, const PitchContour&, int, double) const override { return source; }

 private:
  int n_;
};

/// Converts `source` for `target_singer`; throws ArgumentError with the
/// valid id range for a bad singer and for pitch_factor <= 0.
AudioClip convert_clip(const ConversionSystem& system, const AudioClip& source, int target_singer,
                       double pitch_factor = 1.0);

struct EvalOptions {
  int jobs = 1;
};

/// Each clip re-rendered with its own singer id.
NccReport eval_reconstruction(const ConversionSystem& system, const Corpus& corpus, const EvalOptions& opts = {});
/// Each clip rendered with every other singer id.
NccReport eval_conversion(const ConversionSystem& system, const Corpus& corpus, const EvalOptions& opts = {});

inline constexpr double kDefaultSweepFactors[] = {0.7, 1.0, 1.3};

struct SweepRow {
  double factor = 1.0;
  PitchContour input;   // tracker contour of the source, Hz
  PitchContour scaled;  // input * factor, clamped to the tracker range
  PitchContour output;  // tracker contour of the generated audio
  AudioClip audio;
  std::optional<double> ncc;  // NCC(scaled, output)
  double median_output_hz = 0.0;
};

/// One conversion per factor. With a non-empty `out_dir` writes
/// sweep_<factor>.csv (frame,input_f0,scaled_f0,output_f0) per factor.
std::vector<SweepRow> pitch_sweep(const ConversionSystem& system, const AudioClip& clip, int target_singer,
                                  std::span<const double> factors = kDefaultSweepFactors,
                                  const std::filesystem::path& out_dir = {}, const EvalOptions& opts = {});

std::string sweep_csv_name(double factor);

// Probes: small classifiers and regressors trained from scratch on frozen
// features, used to measure what information a representation carries.

struct ProbeOptions {
  int hidden = 64;
  int steps = 10000;
  int batch = 64;
  double lr = 3e-3;
  double test_fraction = 0.3;
  std::uint64_t seed = 1;
};

/// Rows of `features` are examples. Features are rescaled by a single global
/// factor fitted on the training rows.
double probe_accuracy(const FloatMatrix& features, std::span<const int> labels, int n_classes,
                      const ProbeOptions& opts = {});
double probe_mse(const FloatMatrix& features, std::span<const double> targets, const ProbeOptions& opts = {});

/// Log power of DFT bins [first_bin, first_bin + bins) of each
/// non-overlapping `frame`-sample window (the last window zero-padded).
FloatMatrix spectral_features(const AudioClip& clip, int frame = 800, int first_bin = 1, int bins = 160);

struct ProbeSet {
  FloatMatrix latent;    // encoder output frames
  FloatMatrix spectral;  // spectral_features of the same windows
  std::vector<int> singer;
  std::vector<double> pitch;  // normalized pitch averaged over the window
};

/// Latent-rate probe examples from every clip, keeping windows whose pitch
/// frames are all voiced.
ProbeSet build_probe_set(const ModelBundle& bundle, const Corpus& corpus);

struct ProbeReport {
  double latent_singer_accuracy = 0;
  double spectral_singer_accuracy = 0;
  double latent_pitch_mse = 0;
  double spectral_pitch_mse = 0;
  std::size_t examples = 0;
};

ProbeReport run_probes(const ModelBundle& bundle, const Corpus& corpus, const ProbeOptions& opts = {});

}  // namespace svc

#endif  // SVC_EVALUATION_HPP_
