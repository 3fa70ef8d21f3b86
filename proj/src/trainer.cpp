// src/trainer.cpp

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

#include "svc/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "svc/config.hpp"
#include "svc/errors.hpp"
#include "svc/rng.hpp"

namespace svc {

namespace fs = std::filesystem;

TrainingExample make_example(const AudioClip& audio, const PitchContour& hz_contour, int singer) {
  TrainingExample ex;
  ex.encoder_input = audio.samples;
  ex.targets = mulaw_encode_clamped(audio);
  ex.pitch = normalize_pitch(hz_contour);
  ex.singer = singer;
  return ex;
}

namespace {

// Original, reversed, inverted and reversed-inverted copies. Reversal needs
// a fresh pitch track (frame centres move); inversion leaves pitch unchanged.
void augment_corpus(const Corpus& in, Corpus& out, std::vector<PitchContour>& contours) {
  out.singer_names = in.singer_names;
  out.provenance = in.provenance;
  std::vector<PitchContour> base = extract_corpus_pitch(in);
  for (std::size_t i = 0; i < in.clips.size(); ++i) {
    const CorpusClip& c = in.clips[i];
    CorpusClip rev = c;
    rev.audio = augment(c.audio, AugmentMode::kReverse);
    rev.clip_id += "#rev";
    rev.truth.reset();
    const PitchContour rev_pitch = extract_pitch(rev.audio);

    CorpusClip inv = c;
    inv.audio = augment(c.audio, AugmentMode::kInvert);
    inv.clip_id += "#inv";
    inv.truth.reset();

    CorpusClip rinv = rev;
    rinv.audio = augment(c.audio, AugmentMode::kReverseInvert);
    rinv.clip_id = c.clip_id + "#revinv";

    out.clips.push_back(c);
    contours.push_back(base[i]);
    out.clips.push_back(std::move(rev));
    contours.push_back(rev_pitch);
    out.clips.push_back(std::move(inv));
    contours.push_back(base[i]);
    out.clips.push_back(std::move(rinv));
    contours.push_back(rev_pitch);
  }
}

}  // namespace

TrainingData::TrainingData(const Corpus& corpus, const Schedule& schedule)
    : batch_size_(schedule.batch_size), seed_(schedule.seed) {
  corpus.validate();
  if (schedule.augment) {
    augment_corpus(corpus, clips_, contours_);
  } else {
    clips_ = corpus;
    contours_ = extract_corpus_pitch(corpus);
  }
  plan_ = plan_segments(clips_, static_cast<std::size_t>(schedule.segment_length),
                        static_cast<std::size_t>(schedule.segment_hop));
  if (plan_.refs.empty()) {
    throw InsufficientInputError("no clip holds a full training segment of " +
                                 std::to_string(schedule.segment_length) + " samples");
  }
}

const std::vector<SegmentRef>& TrainingData::order(std::uint64_t epoch) const {
  auto it = orders_.find(epoch);
  if (it == orders_.end()) {
    if (orders_.size() > 4) orders_.erase(orders_.begin());
    it = orders_.emplace(epoch, epoch_order(plan_, seed_, epoch)).first;
  }
  return it->second;
}

TrainingExample TrainingData::example(const SegmentRef& ref) const {
  const Segment seg = materialize(clips_, contours_, ref, plan_.length);
  return make_example(seg.audio, seg.pitch, seg.singer);
}

Batch TrainingData::batch_at(long long step) const {
  const std::uint64_t n = plan_.refs.size();
  Batch b;
  for (int j = 0; j < batch_size_; ++j) {
    const std::uint64_t i = static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(batch_size_) +
                            static_cast<std::uint64_t>(j);
    b.items.push_back(example(order(i / n)[i % n]));
  }
  return b;
}

std::vector<TrainingExample> TrainingData::sample(std::size_t count, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::vector<TrainingExample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(example(plan_.refs[uniform_index(rng, plan_.refs.size())]));
  return out;
}

fs::path checkpoint_path(const fs::path& run_dir, long long step) {
  char name[64];
  std::snprintf(name, sizeof(name), "step_%08lld.ckpt", step);
  return run_dir / "checkpoints" / name;
}

fs::path state_path_for(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p.replace_extension(".state");
  return p;
}

namespace {

class Logger {
 public:
  Logger(std::ostream* out, const fs::path& run_dir) : out_(out) {
    if (!run_dir.empty()) file_.open(run_dir / "train.log", std::ios::app);
  }
  void line(const std::string& s) {
    if (out_ != nullptr) *out_ << s << std::endl;
    if (file_) file_ << s << '\n' << std::flush;
  }

 private:
  std::ostream* out_;
  std::ofstream file_;
};

std::string fmt_record(const LossRecord& r, double seconds) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "step %lld lr %.3g L_recon %.4f L_s %.4f L_p %.5f L_total %.4f L_ad %.5f (%.2fs)", r.step,
                r.lr, r.recon, r.singer, r.pitch, r.total, r.adversary, seconds);
  return buf;
}

void save_all(const ModelBundle& bundle, const TrainState& state, const fs::path& run_dir) {
  const fs::path ckpt = checkpoint_path(run_dir, state.step);
  checkpoint_save(bundle, ckpt);
  save_train_state(state, state_path_for(ckpt));
  write_metrics_csv(state.loss_log, run_dir / "metrics.csv");
}

}  // namespace

TrainResult train(const RunConfig& config, const Corpus& corpus, const TrainOptions& opts) {
  config.validate();
  if (corpus.n_singers() != config.model.n_singers) {
    throw ArgumentError("corpus has " + std::to_string(corpus.n_singers()) + " singers, config field 'n_singers' is " +
                        std::to_string(config.model.n_singers));
  }
  const Schedule& sch = config.schedule;
  const bool files = !opts.run_dir.empty();
  if (files) {
    fs::create_directories(opts.run_dir / "checkpoints");
    save_run_config(config, opts.run_dir / "config.json");
  }
  Logger log(opts.log, files ? opts.run_dir : fs::path());

  TrainResult result{ModelBundle(config.model, sch.seed), TrainState::from_schedule(sch), std::nullopt};
  if (opts.resume_from) {
    result.bundle = checkpoint_load(*opts.resume_from);
    if (!(result.bundle.config() == config.model))
      throw ArgumentError("checkpoint model config differs from the run config: " + opts.resume_from->string());
    result.state = load_train_state(state_path_for(*opts.resume_from));
    log.line("resumed from " + opts.resume_from->string() + " at step " + std::to_string(result.state.step));
  }
  ModelBundle& bundle = result.bundle;
  TrainState& state = result.state;

  const TrainingData data(corpus, sch);
  log.line("segments per epoch: " + std::to_string(data.segments_per_epoch()) +
           ", clips too short: " + std::to_string(data.skipped_clips()));

  const ad::AdamOptions adam{sch.adam_beta1, sch.adam_beta2, sch.adam_eps};
  const long long warmup = sch.resolved_warmup();
  const BacktranslationOptions bt{sch.backtranslation_count, sch.backtranslation_inner_steps};

  auto last = std::chrono::steady_clock::now();
  while (state.step < sch.total_steps) {
    const long long step = state.step;
    StepReport report;
    try {
      report = alternating_step(bundle, state, data.batch_at(step), config.weights, adam);
    } catch (const NumericalError& e) {
      log.line(std::string("aborting: ") + e.what());
      if (files) write_metrics_csv(state.loss_log, opts.run_dir / "metrics.csv");
      throw;
    }
    if (opts.on_step) opts.on_step(report.record);
    if (opts.log_every > 0 && (step % opts.log_every == 0 || state.step == sch.total_steps)) {
      const auto now = std::chrono::steady_clock::now();
      log.line(fmt_record(report.record, std::chrono::duration<double>(now - last).count()));
      last = now;
    }

    if (sch.backtranslation && config.model.n_singers >= 2 && state.step > warmup &&
        state.step % sch.backtranslation_every == 0) {
      const std::uint64_t seed = derive_rng(sch.seed, static_cast<std::uint64_t>(state.step), 4)();
      const auto pool = data.sample(static_cast<std::size_t>(bt.count), seed);
      const BacktranslationReport r = backtranslate_round(bundle, state, pool, bt, seed ^ 0x9e3779b97f4a7c15ull, adam);
      log.line("backtranslation at step " + std::to_string(state.step) + ": " + std::to_string(r.generated) +
               " segments, " + std::to_string(r.steps) + " updates, mean L_recon " + std::to_string(r.mean_recon));
    }

    if (files && sch.checkpoint_every > 0 && state.step % sch.checkpoint_every == 0 &&
        state.step < sch.total_steps) {
      save_all(bundle, state, opts.run_dir);
    }
  }

  if (files) {
    save_all(bundle, state, opts.run_dir);
    result.final_checkpoint = checkpoint_path(opts.run_dir, state.step);
    log.line("final checkpoint " + result.final_checkpoint->string());
  }
  return result;
}

}  // namespace svc
