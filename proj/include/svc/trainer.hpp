// include/svc/trainer.hpp

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

#ifndef SVC_TRAINER_HPP_
#define SVC_TRAINER_HPP_

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>

#include "svc/dataset.hpp"
#include "svc/training.hpp"

namespace svc {

/// Segment pool for one run: the corpus plus its augmented copies, a tracker
/// contour per clip, and the candidate segment starts.
class TrainingData {
 public:
  TrainingData(const Corpus& corpus, const Schedule& schedule);

  /// Items step * batch_size ... (step + 1) * batch_size - 1 of the endless
  /// epoch-shuffled sequence; a pure function of (seed, step).
  Batch batch_at(long long step) const;
  /// `count` independently drawn segments, for backtranslation.
  std::vector<TrainingExample> sample(std::size_t count, std::uint64_t seed) const;

  TrainingExample example(const SegmentRef& ref) const;
  const Corpus& clips() const { return clips_; }
  std::size_t segments_per_epoch() const { return plan_.refs.size(); }
  std::size_t skipped_clips() const { return plan_.skipped_clips; }

 private:
  const std::vector<SegmentRef>& order(std::uint64_t epoch) const;

  Corpus clips_;
  std::vector<PitchContour> contours_;
  SegmentPlan plan_;
  int batch_size_;
  std::uint64_t seed_;
  mutable std::map<std::uint64_t, std::vector<SegmentRef>> orders_;
};

/// Segment to training item: mu-law targets and the normalized contour.
TrainingExample make_example(const AudioClip& audio, const PitchContour& hz_contour, int singer);

struct TrainOptions {
  /// Run directory; empty keeps everything in memory.
  std::filesystem::path run_dir;
  /// Checkpoint to continue from; its train state is read from the file
  /// with the same stem and a .state extension.
  std::optional<std::filesystem::path> resume_from;
  /// Progress lines; also copied to <run_dir>/train.log.
  std::ostream* log = nullptr;
  long long log_every = 100;
  std::function<void(const LossRecord&)> on_step;
};

struct TrainResult {
  ModelBundle bundle;
  TrainState state;
  std::optional<std::filesystem::path> final_checkpoint;
};

/// Full recipe: alternating adversarial steps with periodic backtranslation
/// rounds after the warm-up. With a run directory the resolved config is
/// written before the first step, and checkpoints
/// checkpoints/step_<NNNNNNNN>.{ckpt,state} plus metrics.csv are refreshed
/// every checkpoint_every steps and at the end.
TrainResult train(const RunConfig& config, const Corpus& corpus, const TrainOptions& opts = {});

std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, long long step);
std::filesystem::path state_path_for(const std::filesystem::path& checkpoint);

}  // namespace svc

#endif  // SVC_TRAINER_HPP_
