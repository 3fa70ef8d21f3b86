// src/evaluation.cpp

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

#include "svc/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "svc/errors.hpp"

namespace svc {

double ncc(const PitchContour& a, const PitchContour& b, int max_lag, std::size_t min_overlap) {
  if (a.size() == 0 || b.size() == 0) throw ArgumentError("ncc: empty contour");
  if (a.normalized || b.normalized) throw ArgumentError("ncc: expects Hz contours");
  if (max_lag < 0) throw ArgumentError("ncc: max_lag must be >= 0");
  const auto na = static_cast<long>(a.size());
  const auto nb = static_cast<long>(b.size());
  bool any = false;
  double best = 0.0;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    std::size_t n = 0;
    for (long t = std::max(0L, -static_cast<long>(lag)); t < na && t + lag < nb; ++t) {
      const auto u = static_cast<std::size_t>(t);
      const auto v = static_cast<std::size_t>(t + lag);
      if (!a.voiced[u] || !b.voiced[v]) continue;
      ab += a.values[u] * b.values[v];
      aa += a.values[u] * a.values[u];
      bb += b.values[v] * b.values[v];
      ++n;
    }
    if (n < min_overlap || aa <= 0.0 || bb <= 0.0) continue;
    const double r = ab / std::sqrt(aa * bb);
    best = any ? std::max(best, r) : r;
    any = true;
  }
  if (!any) {
    throw InsufficientOverlapError("ncc: fewer than " + std::to_string(min_overlap) +
                                   " jointly voiced frames at every lag");
  }
  return std::clamp(best, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Report

std::size_t NccReport::scored() const {
  return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](const NccPair& p) { return p.ncc.has_value(); }));
}

std::optional<double> NccReport::aggregate() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const NccPair& p : pairs) {
    if (!p.ncc) continue;
    sum += *p.ncc;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

namespace {

const char* mode_name(EvalMode m) { return m == EvalMode::kReconstruction ? "reconstruction" : "conversion"; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void NccReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write report: " + path.string());
  os << "clip_id,source_singer,target_singer,ncc,note\n" << std::setprecision(10);
  for (const NccPair& p : pairs) {
    os << csv_field(p.clip_id) << ',' << p.source_singer << ',' << p.target_singer << ',';
    if (p.ncc) os << *p.ncc;
    os << ',' << csv_field(p.note) << '\n';
  }
  const auto agg = aggregate();
  os << "mean,,,";
  if (agg) os << *agg;
  os << ',' << (agg ? "" : "undefined: no scored pairs") << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

std::string NccReport::summary_json() const {
  nlohmann::json j{{"mode", mode_name(mode)}, {"pairs", pairs.size()}, {"scored", scored()}};
  const auto agg = aggregate();
  j["mean_ncc"] = agg ? nlohmann::json(*agg) : nlohmann::json(nullptr);
  j["missing"] = pairs.size() - scored();
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Conversion

AudioClip ModelSystem::convert(const AudioClip& source, const PitchContour& source_pitch, int target_singer,
                               double pitch_factor) const {
  const LatentSequence latent = encode(bundle_, source.samples);
  const PitchContour pitch = normalize_pitch(scale_pitch(source_pitch, pitch_factor));
  const ConditionSequence cond =
      build_condition(latent, pitch, lookup_embedding(bundle_, target_singer), source.size());
  AudioClip out = mulaw_decode(generate(bundle_, cond, seed_, sampling_));
  out.sample_rate = source.sample_rate;
  out.singer_id = target_singer;
  return out;
}

AudioClip convert_clip(const ConversionSystem& system, const AudioClip& source, int target_singer,
                       double pitch_factor) {
  if (target_singer < 0 || target_singer >= system.n_singers()) {
    throw ArgumentError("invalid target singer " + std::to_string(target_singer) +
                        "; valid ids: 0.." + std::to_string(system.n_singers() - 1));
  }
  if (!(pitch_factor > 0.0) || !std::isfinite(pitch_factor))
    throw ArgumentError("pitch scale must be a positive number");
  if (source.sample_rate != kDefaultSampleRate) {
    throw ArgumentError("source must be sampled at 16000 Hz, got " + std::to_string(source.sample_rate));
  }
  return system.convert(source, extract_pitch(source), target_singer, pitch_factor);
}

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception is
// rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  const auto workers = static_cast<std::size_t>(std::clamp(jobs, 1, 64));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct Job {
  std::size_t clip;
  int target;
};

NccReport run_eval(const ConversionSystem& system, const Corpus& corpus, EvalMode mode, const EvalOptions& opts) {
  if (corpus.n_singers() > system.n_singers()) {
    throw ArgumentError("corpus has " + std::to_string(corpus.n_singers()) + " singers but the system knows " +
                        std::to_string(system.n_singers()));
  }
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < corpus.clips.size(); ++c) {
    const int src = corpus.clips[c].singer;
    if (mode == EvalMode::kReconstruction) {
      jobs.push_back({c, src});
    } else {
      for (int t = 0; t < corpus.n_singers(); ++t)
        if (t != src) jobs.push_back({c, t});
    }
  }
  NccReport report;
  report.mode = mode;
  report.pairs.resize(jobs.size());
  parallel_for(jobs.size(), opts.jobs, [&](std::size_t i) {
    const CorpusClip& clip = corpus.clips[jobs[i].clip];
    NccPair& pair = report.pairs[i];
    pair.clip_id = clip.clip_id;
    pair.source_singer = clip.singer;
    pair.target_singer = jobs[i].target;
    try {
      const PitchContour in = extract_pitch(clip.audio);
      const AudioClip out = system.convert(clip.audio, in, jobs[i].target, 1.0);
      pair.ncc = ncc(in, extract_pitch(out));
    } catch (const InsufficientOverlapError& e) {
      pair.note = std::string("insufficient overlap: ") + e.what();
    } catch (const std::exception& e) {
      pair.note = std::string("generation failed: ") + e.what();
    }
  });
  return report;
}

}  // namespace

NccReport eval_reconstruction(const ConversionSystem& system, const Corpus& corpus, const EvalOptions& opts) {
  return run_eval(system, corpus, EvalMode::kReconstruction, opts);
}

NccReport eval_conversion(const ConversionSystem& system, const Corpus& corpus, const EvalOptions& opts) {
  if (corpus.n_singers() < 2) throw ArgumentError("conversion needs at least 2 singers");
  return run_eval(system, corpus, EvalMode::kConversion, opts);
}

// ---------------------------------------------------------------------------
// Pitch sweep

std::string sweep_csv_name(double factor) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "sweep_%.2f.csv", factor);
  return buf;
}

std::vector<SweepRow> pitch_sweep(const ConversionSystem& system, const AudioClip& clip, int target_singer,
                                  std::span<const double> factors, const std::filesystem::path& out_dir,
                                  const EvalOptions& opts) {
  if (factors.empty()) throw ArgumentError("pitch_sweep: no factors");
  for (double f : factors)
    if (!(f > 0.0)) throw ArgumentError("pitch_sweep: factors must be positive");
  const PitchContour input = extract_pitch(clip);
  std::vector<SweepRow> rows(factors.size());
  parallel_for(factors.size(), opts.jobs, [&](std::size_t i) {
    SweepRow& row = rows[i];
    row.factor = factors[i];
    row.input = input;
    row.scaled = scale_pitch(input, factors[i]);
    row.audio = convert_clip(system, clip, target_singer, factors[i]);
    row.output = extract_pitch(row.audio);
    row.median_output_hz = median_voiced_hz(row.output);
    try {
      row.ncc = ncc(row.scaled, row.output);
    } catch (const InsufficientOverlapError&) {
      row.ncc.reset();
    }
  });

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    for (const SweepRow& row : rows) {
      const auto path = out_dir / sweep_csv_name(row.factor);
      std::ofstream os(path);
      if (!os) throw IoError("cannot write " + path.string());
      os << "frame,input_f0,scaled_f0,output_f0\n" << std::setprecision(10);
      const std::size_t n = std::max(row.scaled.size(), row.output.size());
      for (std::size_t t = 0; t < n; ++t) {
        auto hz = [t](const PitchContour& c) { return t < c.size() && c.voiced[t] ? c.values[t] : 0.0; };
        os << t << ',' << hz(row.input) << ',' << hz(row.scaled) << ',' << hz(row.output) << '\n';
      }
    }
  }
  return rows;
}

}  // namespace svc
