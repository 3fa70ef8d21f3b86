// tools/svc_main.cpp

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

// Command-line entry point: synth, train, convert, eval, sweep and probe.
// Exit codes: 0 success, 1 runtime failure, 2 argument or validation error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "svc/config.hpp"
#include "svc/dataset.hpp"
#include "svc/errors.hpp"
#include "svc/evaluation.hpp"
#include "svc/trainer.hpp"

namespace fs = std::filesystem;
using namespace svc;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct SynthArgs {
  std::string spec, out;
};

struct TrainArgs {
  std::string config, corpus, out, resume;
  std::optional<std::uint64_t> seed;
  long long log_every = 100;
};

struct ConvertArgs {
  std::string checkpoint, input, out;
  int singer = 0;
  double pitch_scale = 1.0;
  std::uint64_t seed = 0;
  std::string sampling = "argmax";
};

struct EvalArgs {
  std::string checkpoint, corpus, out, mode = "both";
  std::uint64_t seed = 0;
  std::string sampling = "argmax";
  int jobs = 1;
};

struct SweepArgs {
  std::string checkpoint, input, out;
  int singer = 0;
  std::vector<double> factors{0.7, 1.0, 1.3};
  std::uint64_t seed = 0;
  std::string sampling = "argmax";
  int jobs = 1;
};

struct ProbeArgs {
  std::string checkpoint, corpus;
  std::uint64_t seed = 1;
};

Sampling parse_sampling(const std::string& s) {
  if (s == "argmax") return Sampling::kArgmax;
  if (s == "categorical") return Sampling::kCategorical;
  throw ArgumentError("--sampling must be argmax or categorical");
}

int run_synth(const SynthArgs& a) {
  const SynthSpec spec = load_synth_spec(a.spec);
  const Corpus corpus = synthesize_corpus(spec);
  write_corpus(corpus, a.out);
  std::cerr << "wrote " << corpus.clips.size() << " clips for " << corpus.n_singers() << " singers to " << a.out
            << "\n";
  return 0;
}

int run_train(const TrainArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  if (a.seed) cfg.schedule.seed = *a.seed;
  const Corpus corpus = load_corpus(a.corpus);
  TrainOptions opts;
  opts.run_dir = a.out;
  opts.log = &std::cerr;
  opts.log_every = a.log_every;
  if (!a.resume.empty()) opts.resume_from = fs::path(a.resume);
  const TrainResult r = train(cfg, corpus, opts);
  std::cerr << "done at step " << r.state.step << "\n";
  return 0;
}

int run_convert(const ConvertArgs& a) {
  if (!(a.pitch_scale > 0.0)) throw ArgumentError("--pitch-scale must be > 0");
  const ModelBundle bundle = checkpoint_load(a.checkpoint);
  const ModelSystem system(bundle, a.seed, parse_sampling(a.sampling));
  if (a.singer < 0 || a.singer >= system.n_singers()) {
    throw ArgumentError("invalid --target-singer " + std::to_string(a.singer) +
                        "; valid ids: 0.." + std::to_string(system.n_singers() - 1));
  }
  const AudioClip input = resample(load_wav(a.input), kDefaultSampleRate);
  const AudioClip out = convert_clip(system, input, a.singer, a.pitch_scale);
  save_wav(out, a.out);
  const PitchContour scaled = scale_pitch(extract_pitch(input), a.pitch_scale);
  try {
    std::printf("ncc %.6f\n", ncc(scaled, extract_pitch(out)));
  } catch (const InsufficientOverlapError& e) {
    std::printf("ncc undefined\n");
    std::cerr << "ncc: " << e.what() << "\n";
  }
  return 0;
}

int run_eval(const EvalArgs& a) {
  if (a.mode != "reconstruction" && a.mode != "conversion" && a.mode != "both")
    throw ArgumentError("--mode must be reconstruction, conversion or both");
  const ModelBundle bundle = checkpoint_load(a.checkpoint);
  const Corpus corpus = load_corpus(a.corpus);
  const ModelSystem system(bundle, a.seed, parse_sampling(a.sampling));
  fs::create_directories(a.out);
  const EvalOptions opts{a.jobs};
  auto emit = [&](const NccReport& r, const std::string& name) {
    r.write_csv(fs::path(a.out) / (name + ".csv"));
    std::ofstream(fs::path(a.out) / (name + ".json")) << r.summary_json() << '\n';
    const auto agg = r.aggregate();
    std::cerr << name << ": " << r.scored() << "/" << r.pairs.size() << " pairs scored, mean NCC "
              << (agg ? std::to_string(*agg) : std::string("undefined")) << "\n";
    return agg;
  };
  std::optional<double> rec, conv;
  if (a.mode != "conversion") rec = emit(eval_reconstruction(system, corpus, opts), "reconstruction");
  if (a.mode != "reconstruction") conv = emit(eval_conversion(system, corpus, opts), "conversion");
  if (rec && conv && *conv > *rec)
    std::cerr << "note: conversion NCC exceeds reconstruction NCC on this model\n";
  return 0;
}

int run_sweep(const SweepArgs& a) {
  const ModelBundle bundle = checkpoint_load(a.checkpoint);
  const ModelSystem system(bundle, a.seed, parse_sampling(a.sampling));
  const AudioClip input = resample(load_wav(a.input), kDefaultSampleRate);
  const auto rows = pitch_sweep(system, input, a.singer, a.factors, a.out, EvalOptions{a.jobs});
  for (const SweepRow& r : rows) {
    std::cerr << "factor " << r.factor << ": median output f0 " << r.median_output_hz << " Hz, ncc "
              << (r.ncc ? std::to_string(*r.ncc) : std::string("undefined")) << "\n";
    save_wav(r.audio, (fs::path(a.out) / sweep_csv_name(r.factor)).replace_extension(".wav"));
  }
  return 0;
}

int run_probe(const ProbeArgs& a) {
  const ModelBundle bundle = checkpoint_load(a.checkpoint);
  const Corpus corpus = load_corpus(a.corpus);
  ProbeOptions opts;
  opts.seed = a.seed;
  const ProbeReport r = run_probes(bundle, corpus, opts);
  std::printf("examples %zu\nlatent_singer_accuracy %.4f\nspectral_singer_accuracy %.4f\n"
              "latent_pitch_mse %.6g\nspectral_pitch_mse %.6g\n",
              r.examples, r.latent_singer_accuracy, r.spectral_singer_accuracy, r.latent_pitch_mse,
              r.spectral_pitch_mse);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Singing voice conversion toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Render a synthetic multi-singer corpus");
  c_synth->add_option("--spec", synth.spec, "Synthesis spec (JSON)")->required();
  c_synth->add_option("--out", synth.out, "Output corpus directory")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model on a corpus directory");
  c_train->add_option("--config", tr.config, "Run config (JSON)")->required();
  c_train->add_option("--corpus", tr.corpus, "Corpus directory")->required();
  c_train->add_option("--out", tr.out, "Run directory")->required();
  c_train->add_option("--resume", tr.resume, "Checkpoint to resume from");
  c_train->add_option("--seed", tr.seed, "Override the schedule seed");
  c_train->add_option("--log-every", tr.log_every, "Steps between progress lines");

  ConvertArgs cv;
  auto* c_convert = app.add_subcommand("convert", "Convert one WAV to a target singer");
  c_convert->add_option("--checkpoint", cv.checkpoint, "Model checkpoint")->required();
  c_convert->add_option("--input", cv.input, "Input WAV")->required();
  c_convert->add_option("--target-singer", cv.singer, "Target singer id")->required();
  c_convert->add_option("--pitch-scale", cv.pitch_scale, "Multiplier applied to the input pitch");
  c_convert->add_option("--out", cv.out, "Output WAV")->required();
  c_convert->add_option("--seed", cv.seed, "Sampling seed");
  c_convert->add_option("--sampling", cv.sampling, "argmax or categorical");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "NCC reconstruction/conversion report over a corpus");
  c_eval->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required();
  c_eval->add_option("--corpus", ev.corpus, "Corpus directory")->required();
  c_eval->add_option("--mode", ev.mode, "reconstruction, conversion or both");
  c_eval->add_option("--out", ev.out, "Report directory")->required();
  c_eval->add_option("--jobs", ev.jobs, "Worker threads");
  c_eval->add_option("--seed", ev.seed, "Sampling seed");
  c_eval->add_option("--sampling", ev.sampling, "argmax or categorical");

  SweepArgs sw;
  auto* c_sweep = app.add_subcommand("sweep", "Convert one WAV at several pitch factors");
  c_sweep->add_option("--checkpoint", sw.checkpoint, "Model checkpoint")->required();
  c_sweep->add_option("--input", sw.input, "Input WAV")->required();
  c_sweep->add_option("--singer", sw.singer, "Target singer id")->required();
  c_sweep->add_option("--factors", sw.factors, "Pitch factors")->delimiter(',');
  c_sweep->add_option("--out", sw.out, "Output directory")->required();
  c_sweep->add_option("--jobs", sw.jobs, "Worker threads");
  c_sweep->add_option("--seed", sw.seed, "Sampling seed");
  c_sweep->add_option("--sampling", sw.sampling, "argmax or categorical");

  ProbeArgs pr;
  auto* c_probe = app.add_subcommand("probe", "Probe frozen latents for singer and pitch information");
  c_probe->add_option("--checkpoint", pr.checkpoint, "Model checkpoint")->required();
  c_probe->add_option("--corpus", pr.corpus, "Corpus directory")->required();
  c_probe->add_option("--seed", pr.seed, "Probe seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (c_synth->parsed()) return run_synth(synth);
    if (c_train->parsed()) return run_train(tr);
    if (c_convert->parsed()) return run_convert(cv);
    if (c_eval->parsed()) return run_eval(ev);
    if (c_sweep->parsed()) return run_sweep(sw);
    if (c_probe->parsed()) return run_probe(pr);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
