// include/svc/dataset.hpp

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

#ifndef SVC_DATASET_HPP_
#define SVC_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svc/audio.hpp"
#include "svc/pitch.hpp"

namespace svc {

enum class Provenance { kReal, kSynthetic };

struct CorpusClip {
  AudioClip audio;  // 16 kHz mono; audio.singer_id mirrors `singer`
  int singer = 0;
  std::string clip_id;
  std::filesystem::path source;        // empty for in-memory clips
  std::optional<PitchContour> truth;   // ground-truth Hz contour, synthetic only
};

struct Corpus {
  std::vector<CorpusClip> clips;
  std::vector<std::string> singer_names;  // index = singer id
  Provenance provenance = Provenance::kReal;

  int n_singers() const { return static_cast<int>(singer_names.size()); }
  /// Throws ConsistencyError unless ids are dense and every clip's id is valid.
  void validate() const;
  std::vector<std::size_t> clips_of(int singer) const;
};

enum class Layout {
  kNus48e,  // <root>/<SINGER>/sing/*.wav ("read" recordings are ignored)
  kFlat,    // <root>/<singer>/*.wav
};

struct IngestOptions {
  Layout layout = Layout::kFlat;
  /// When non-empty only these singer directories are kept.
  std::vector<std::string> include_singers;
  std::vector<std::string> exclude_singers;
};

struct SkipEntry {
  std::filesystem::path path;
  std::string reason;
};

struct IngestResult {
  Corpus corpus;
  std::vector<SkipEntry> skipped;
};

/// Singer directories of the male half of NUS-48E.
std::vector<std::string> nus48e_male_singers();

/// Enumerates WAVs in lexicographic path order, assigns dense singer ids in
/// sorted directory order, and resamples to 16 kHz mono. Unreadable files go
/// to the skip report; an empty result throws InsufficientInputError.
IngestResult ingest_directory(const std::filesystem::path& root, const IngestOptions& opts = {});

struct Note {
  double f0_hz = 0.0;  // 0 renders a rest
  double duration_s = 0.0;
};

struct SynthSpec {
  int n_singers = 2;
  /// Harmonic amplitude profile per singer; entry k weights harmonic k + 1.
  std::vector<std::vector<double>> harmonics;
  double vibrato_rate_hz = 5.5;
  double vibrato_depth_cents = 0.0;
  /// Every melody is rendered once by every singer.
  std::vector<std::vector<Note>> melodies;
  double noise_floor = 0.0;
  double amplitude = 0.5;
  /// Log-frequency glide at the start of a note that follows a voiced note.
  double portamento_s = 0.03;
  int sample_rate = kDefaultSampleRate;
  std::uint64_t seed = 1;

  /// Throws ArgumentError naming the offending field.
  void validate() const;
};

std::string synth_spec_to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const std::string& text);
SynthSpec load_synth_spec(const std::filesystem::path& path);

/// Renders each melody with each singer's harmonic profile; harmonics at or
/// above Nyquist are dropped sample by sample. Clip truth contours hold the
/// instantaneous f0 at the centre of each 100-sample hop. Output is a pure
/// function of the spec.
Corpus synthesize_corpus(const SynthSpec& spec);

/// Writes <singer>/<clip>.wav (16-bit PCM) with a <clip>.pitch.csv beside it
/// when the clip has a truth contour, plus manifest.json.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Reads a directory written by write_corpus (verifying the sha256 of every
/// file) or, without a manifest, ingests it with the flat layout.
Corpus load_corpus(const std::filesystem::path& dir);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Tracker contours (Hz) for every clip.
std::vector<PitchContour> extract_corpus_pitch(const Corpus& corpus);

struct SegmentRef {
  std::size_t clip = 0;
  std::size_t start = 0;  // multiple of the pitch hop
};

struct SegmentPlan {
  std::vector<SegmentRef> refs;
  std::size_t length = 0;
  std::size_t skipped_clips = 0;  // clips shorter than `length`
};

struct Segment {
  std::size_t clip = 0;
  std::size_t start = 0;
  AudioClip audio;
  PitchContour pitch;  // frames [start / 100, ceil((start + length) / 100))
  int singer = 0;
};

/// Sliding windows at starts 0, hop, 2 hop, ...; hop must be a positive
/// multiple of the pitch hop.
SegmentPlan plan_segments(const Corpus& corpus, std::size_t length, std::size_t hop);

/// Epoch order of a plan: a deterministic shuffle keyed by (seed, epoch).
std::vector<SegmentRef> epoch_order(const SegmentPlan& plan, std::uint64_t seed, std::uint64_t epoch);

/// Cuts one segment; `contours` holds one contour per corpus clip.
Segment materialize(const Corpus& corpus, std::span<const PitchContour> contours,
                    const SegmentRef& ref, std::size_t length);

/// Endless iterator over shuffled segments, one epoch after another.
class SegmentStream {
 public:
  SegmentStream(const Corpus& corpus, std::vector<PitchContour> contours, std::size_t length,
                std::size_t hop, std::uint64_t seed);

  Segment next();
  std::uint64_t epoch() const { return epoch_; }
  std::size_t segments_per_epoch() const { return plan_.refs.size(); }
  std::size_t skipped_clips() const { return plan_.skipped_clips; }

 private:
  const Corpus& corpus_;
  std::vector<PitchContour> contours_;
  SegmentPlan plan_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::size_t pos_ = 0;
  std::vector<SegmentRef> order_;
};

/// One shuffled epoch, materialized.
std::vector<Segment> segment(const Corpus& corpus, std::span<const PitchContour> contours,
                             std::size_t length, std::size_t hop, std::uint64_t epoch_seed,
                             std::size_t* skipped_clips = nullptr);

}  // namespace svc

#endif  // SVC_DATASET_HPP_
