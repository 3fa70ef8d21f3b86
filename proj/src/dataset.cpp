// src/dataset.cpp

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

#include "svc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "json_fields.hpp"
#include "svc/errors.hpp"
#include "svc/rng.hpp"

namespace svc {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Corpus

void Corpus::validate() const {
  std::vector<int> count(singer_names.size(), 0);
  for (const auto& c : clips) {
    if (c.singer < 0 || c.singer >= n_singers())
      throw ConsistencyError("clip '" + c.clip_id + "' has singer id " + std::to_string(c.singer) +
                             " outside [0, " + std::to_string(n_singers()) + ")");
    ++count[static_cast<std::size_t>(c.singer)];
  }
  for (std::size_t i = 0; i < count.size(); ++i)
    if (count[i] == 0) throw ConsistencyError("singer id " + std::to_string(i) + " has no clips");
}

std::vector<std::size_t> Corpus::clips_of(int singer) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < clips.size(); ++i)
    if (clips[i].singer == singer) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// Ingestion

std::vector<std::string> nus48e_male_singers() {
  return {"JLEE", "JTAN", "KENN", "SAMF", "VKOW", "ZHIY"};
}

namespace {

bool is_wav(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".wav";
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool want_dirs) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (want_dirs ? e.is_directory() : (e.is_regular_file() && is_wav(e.path()))) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

IngestResult ingest_directory(const fs::path& root, const IngestOptions& opts) {
  if (!fs::is_directory(root)) throw IoError("corpus directory not found: " + root.string());
  const std::set<std::string> include(opts.include_singers.begin(), opts.include_singers.end());
  const std::set<std::string> exclude(opts.exclude_singers.begin(), opts.exclude_singers.end());

  IngestResult result;
  result.corpus.provenance = Provenance::kReal;
  for (const fs::path& singer_dir : sorted_entries(root, true)) {
    const std::string name = singer_dir.filename().string();
    if (!include.empty() && !include.count(name)) continue;
    if (exclude.count(name)) continue;
    fs::path wav_dir = singer_dir;
    if (opts.layout == Layout::kNus48e) {
      wav_dir = singer_dir / "sing";
      if (!fs::is_directory(wav_dir)) {
        result.skipped.push_back({singer_dir, "no 'sing' subdirectory"});
        continue;
      }
    }
    const int id = result.corpus.n_singers();
    bool any = false;
    for (const fs::path& file : sorted_entries(wav_dir, false)) {
      try {
        AudioClip clip = resample(load_wav(file), kDefaultSampleRate);
        if (clip.samples.empty()) throw FormatError("no samples");
        clip.singer_id = id;
        CorpusClip cc;
        cc.audio = std::move(clip);
        cc.singer = id;
        cc.clip_id = name + "/" + file.stem().string();
        cc.source = file;
        result.corpus.clips.push_back(std::move(cc));
        any = true;
      } catch (const std::exception& e) {
        result.skipped.push_back({file, e.what()});
      }
    }
    if (any) result.corpus.singer_names.push_back(name);
  }
  if (result.corpus.clips.empty())
    throw InsufficientInputError("no readable WAV files under " + root.string());
  return result;
}

// ---------------------------------------------------------------------------
// Synthesis

void SynthSpec::validate() const {
  if (n_singers < 1) throw ArgumentError("synth field 'n_singers' must be >= 1");
  if (static_cast<int>(harmonics.size()) != n_singers)
    throw ArgumentError("synth field 'harmonics' must hold one profile per singer (" +
                        std::to_string(n_singers) + ")");
  for (std::size_t s = 0; s < harmonics.size(); ++s) {
    if (harmonics[s].empty()) throw ArgumentError("synth field 'harmonics' has an empty profile");
    double sum = 0.0;
    for (double a : harmonics[s]) {
      if (!(a >= 0.0) || !std::isfinite(a))
        throw ArgumentError("synth field 'harmonics' must be non-negative");
      sum += a;
    }
    if (sum <= 0.0) throw ArgumentError("synth field 'harmonics' has an all-zero profile");
    for (std::size_t t = 0; t < s; ++t)
      if (harmonics[s] == harmonics[t])
        throw ArgumentError("synth field 'harmonics': singers " + std::to_string(t) + " and " +
                            std::to_string(s) + " share a profile");
  }
  if (!(vibrato_rate_hz >= 0.0)) throw ArgumentError("synth field 'vibrato_rate_hz' must be >= 0");
  if (!(vibrato_depth_cents >= 0.0)) throw ArgumentError("synth field 'vibrato_depth_cents' must be >= 0");
  if (melodies.empty()) throw ArgumentError("synth field 'melodies' must not be empty");
  for (const auto& m : melodies) {
    if (m.empty()) throw ArgumentError("synth field 'melodies' has an empty melody");
    for (const Note& n : m) {
      if (!(n.duration_s > 0.0)) throw ArgumentError("synth field 'melodies': note duration must be positive");
      if (n.f0_hz != 0.0 && !(n.f0_hz > 0.0 && n.f0_hz < sample_rate / 2.0))
        throw ArgumentError("synth field 'melodies': note f0 must be 0 (rest) or in (0, Nyquist)");
    }
  }
  if (!(noise_floor >= 0.0)) throw ArgumentError("synth field 'noise_floor' must be >= 0");
  if (!(amplitude > 0.0 && amplitude <= 1.0)) throw ArgumentError("synth field 'amplitude' must be in (0, 1]");
  if (!(portamento_s >= 0.0)) throw ArgumentError("synth field 'portamento_s' must be >= 0");
  if (sample_rate != kDefaultSampleRate) throw ArgumentError("synth field 'sample_rate' must be 16000");
}

std::string synth_spec_to_json(const SynthSpec& s) {
  json melodies = json::array();
  for (const auto& m : s.melodies) {
    json notes = json::array();
    for (const Note& n : m) notes.push_back(json::array({n.f0_hz, n.duration_s}));
    melodies.push_back(notes);
  }
  return json{{"n_singers", s.n_singers},
              {"harmonics", s.harmonics},
              {"vibrato_rate_hz", s.vibrato_rate_hz},
              {"vibrato_depth_cents", s.vibrato_depth_cents},
              {"melodies", melodies},
              {"noise_floor", s.noise_floor},
              {"amplitude", s.amplitude},
              {"portamento_s", s.portamento_s},
              {"sample_rate", s.sample_rate},
              {"seed", s.seed}}
      .dump(2);
}

namespace {

std::vector<Note> parse_melody(const json& j) {
  if (!j.is_array()) throw ArgumentError("synth field 'melodies' must hold arrays of [f0_hz, duration_s]");
  std::vector<Note> out;
  for (const json& n : j) {
    if (!n.is_array() || n.size() != 2 || !n[0].is_number() || !n[1].is_number())
      throw ArgumentError("synth field 'melodies': each note must be [f0_hz, duration_s]");
    out.push_back({n[0].get<double>(), n[1].get<double>()});
  }
  return out;
}

}  // namespace

SynthSpec synth_spec_from_json(const std::string& text) {
  const json j = parse_json(text, "synth spec");
  SynthSpec s;
  FieldReader r(j, "");
  r.get("n_singers", s.n_singers);
  if (const json* h = r.array("harmonics")) {
    for (const json& prof : *h) {
      if (!prof.is_array()) throw ArgumentError("synth field 'harmonics' must be a list of lists");
      std::vector<double> v;
      for (const json& a : prof) {
        if (!a.is_number()) throw ArgumentError("synth field 'harmonics' must hold numbers");
        v.push_back(a.get<double>());
      }
      s.harmonics.push_back(std::move(v));
    }
  }
  r.get("vibrato_rate_hz", s.vibrato_rate_hz);
  r.get("vibrato_depth_cents", s.vibrato_depth_cents);
  if (const json* m = r.array("melody")) s.melodies.push_back(parse_melody(*m));
  if (const json* ms = r.array("melodies"))
    for (const json& m : *ms) s.melodies.push_back(parse_melody(m));
  r.get("noise_floor", s.noise_floor);
  r.get("amplitude", s.amplitude);
  r.get("portamento_s", s.portamento_s);
  r.get("sample_rate", s.sample_rate);
  r.get("seed", s.seed);
  r.finish();
  s.validate();
  return s;
}

SynthSpec load_synth_spec(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read synth spec: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return synth_spec_from_json(ss.str());
}

namespace {

// Instantaneous f0 (Hz, 0 for rests) of a melody at every sample, before
// vibrato.
std::vector<double> note_track(const std::vector<Note>& melody, const SynthSpec& spec) {
  std::vector<double> f;
  double prev = 0.0;
  const auto glide = static_cast<std::size_t>(std::lround(spec.portamento_s * spec.sample_rate));
  for (const Note& n : melody) {
    const auto len = static_cast<std::size_t>(std::lround(n.duration_s * spec.sample_rate));
    for (std::size_t i = 0; i < len; ++i) {
      double v = n.f0_hz;
      if (v > 0.0 && prev > 0.0 && i < glide) {
        const double a = static_cast<double>(i) / static_cast<double>(glide);
        v = std::exp((1.0 - a) * std::log(prev) + a * std::log(n.f0_hz));
      }
      f.push_back(v);
    }
    prev = n.f0_hz;
  }
  return f;
}

}  // namespace

Corpus synthesize_corpus(const SynthSpec& spec) {
  spec.validate();
  Corpus corpus;
  corpus.provenance = Provenance::kSynthetic;
  for (int s = 0; s < spec.n_singers; ++s) corpus.singer_names.push_back("singer" + std::to_string(s));

  const double sr = spec.sample_rate;
  const double nyquist = sr / 2.0;
  const std::size_t ramp = static_cast<std::size_t>(sr * 0.01);  // 10 ms onset/offset

  for (std::size_t m = 0; m < spec.melodies.size(); ++m) {
    const std::vector<double> base = note_track(spec.melodies[m], spec);
    // Vibrato phase is a function of the melody only, so every singer shares
    // the same f0 trajectory.
    std::mt19937_64 vib_rng = derive_rng(spec.seed, m, 0x7669);
    const double vib_phase = 2.0 * M_PI * uniform_unit(vib_rng);
    std::vector<double> f(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      const double t = static_cast<double>(i) / sr;
      const double cents = spec.vibrato_depth_cents * std::sin(2.0 * M_PI * spec.vibrato_rate_hz * t + vib_phase);
      f[i] = base[i] > 0.0 ? base[i] * std::exp2(cents / 1200.0) : 0.0;
    }

    std::vector<double> hz(static_cast<std::size_t>((f.size() + kPitchHop - 1) / kPitchHop));
    for (std::size_t k = 0; k < hz.size(); ++k) hz[k] = f[std::min(k * kPitchHop + kPitchHop / 2, f.size() - 1)];

    for (int s = 0; s < spec.n_singers; ++s) {
      const auto& amps = spec.harmonics[static_cast<std::size_t>(s)];
      double norm = 0.0;
      for (double a : amps) norm += a;
      std::mt19937_64 noise_rng = derive_rng(spec.seed, m, 0x6e00 + static_cast<std::uint64_t>(s));
      std::normal_distribution<double> gauss(0.0, 1.0);

      AudioClip clip;
      clip.sample_rate = spec.sample_rate;
      clip.singer_id = s;
      clip.samples.resize(f.size());
      double phase = 0.0;
      double env = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) {
        const double target = f[i] > 0.0 ? 1.0 : 0.0;
        if (env < target) env = std::min(target, env + 1.0 / ramp);
        else if (env > target) env = std::max(target, env - 1.0 / ramp);
        // Fade out over the last 10 ms of the clip.
        const double tail = std::min(1.0, static_cast<double>(f.size() - i) / ramp);
        double v = 0.0;
        if (f[i] > 0.0) {
          phase += 2.0 * M_PI * f[i] / sr;
          if (phase > 2.0 * M_PI) phase -= 2.0 * M_PI;
        }
        for (std::size_t k = 0; k < amps.size(); ++k) {
          const double order = static_cast<double>(k + 1);
          if (amps[k] == 0.0 || order * f[i] >= nyquist) continue;
          v += amps[k] * std::sin(order * phase);
        }
        // The noise draw happens for every sample so the stream stays aligned.
        const double n = gauss(noise_rng);
        v = spec.amplitude * std::min(env, tail) * v / norm;
        v += spec.noise_floor * n;
        clip.samples[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
      }

      CorpusClip cc;
      cc.audio = std::move(clip);
      cc.singer = s;
      cc.clip_id = "m" + std::to_string(m) + "_s" + std::to_string(s);
      cc.truth = PitchContour::from_hz(hz);
      corpus.clips.push_back(std::move(cc));
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Manifest

std::string sha256_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read file for hashing: " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw IoError("sha256 unavailable");
  }
  std::vector<char> buf(1 << 16);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (is.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

void write_corpus(const Corpus& corpus, const fs::path& dir) {
  corpus.validate();
  fs::create_directories(dir);
  json clips = json::array();
  for (const CorpusClip& c : corpus.clips) {
    const std::string singer = corpus.singer_names[static_cast<std::size_t>(c.singer)];
    std::string stem = c.clip_id;
    std::replace(stem.begin(), stem.end(), '/', '_');
    const fs::path rel_wav = fs::path(singer) / (stem + ".wav");
    fs::create_directories(dir / singer);
    save_wav(c.audio, dir / rel_wav, WavEncoding::kPcm16);
    json entry{{"path", rel_wav.generic_string()},
               {"singer", c.singer},
               {"clip_id", c.clip_id},
               {"duration_s", c.audio.duration_seconds()},
               {"sha256", sha256_file(dir / rel_wav)}};
    if (c.truth) {
      const fs::path rel_csv = fs::path(singer) / (stem + ".pitch.csv");
      write_contour_csv(*c.truth, dir / rel_csv);
      entry["pitch_csv"] = rel_csv.generic_string();
      entry["pitch_sha256"] = sha256_file(dir / rel_csv);
    }
    clips.push_back(std::move(entry));
  }
  const json manifest{{"provenance", corpus.provenance == Provenance::kSynthetic ? "synthetic" : "real"},
                      {"singers", corpus.singer_names},
                      {"clips", clips}};
  std::ofstream os(dir / "manifest.json");
  if (!os) throw IoError("cannot write manifest in " + dir.string());
  os << manifest.dump(2) << '\n';
}

Corpus load_corpus(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) {
    if (!fs::is_directory(dir)) throw IoError("corpus directory not found: " + dir.string());
    return ingest_directory(dir, {}).corpus;
  }
  std::ifstream is(mpath);
  std::stringstream ss;
  ss << is.rdbuf();
  json m;
  try {
    m = json::parse(ss.str());
    Corpus corpus;
    corpus.provenance = m.at("provenance").get<std::string>() == "synthetic" ? Provenance::kSynthetic
                                                                              : Provenance::kReal;
    corpus.singer_names = m.at("singers").get<std::vector<std::string>>();
    for (const json& e : m.at("clips")) {
      const fs::path wav = dir / e.at("path").get<std::string>();
      if (sha256_file(wav) != e.at("sha256").get<std::string>())
        throw CorruptionError("sha256 mismatch for " + wav.string());
      CorpusClip c;
      c.singer = e.at("singer").get<int>();
      c.clip_id = e.at("clip_id").get<std::string>();
      c.source = wav;
      c.audio = resample(load_wav(wav), kDefaultSampleRate);
      c.audio.singer_id = c.singer;
      if (e.contains("pitch_csv")) c.truth = read_contour_csv(dir / e.at("pitch_csv").get<std::string>());
      corpus.clips.push_back(std::move(c));
    }
    corpus.validate();
    return corpus;
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest " + mpath.string() + ": " + e.what());
  }
}

std::vector<PitchContour> extract_corpus_pitch(const Corpus& corpus) {
  std::vector<PitchContour> out;
  out.reserve(corpus.clips.size());
  for (const auto& c : corpus.clips) out.push_back(extract_pitch(c.audio));
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation

SegmentPlan plan_segments(const Corpus& corpus, std::size_t length, std::size_t hop) {
  if (length < 1) throw ArgumentError("segment length must be >= 1");
  if (hop == 0 || hop % kPitchHop != 0)
    throw ArgumentError("segment hop must be a positive multiple of " + std::to_string(kPitchHop));
  SegmentPlan plan;
  plan.length = length;
  for (std::size_t c = 0; c < corpus.clips.size(); ++c) {
    const std::size_t n = corpus.clips[c].audio.size();
    if (n < length) {
      ++plan.skipped_clips;
      continue;
    }
    for (std::size_t s = 0; s + length <= n; s += hop) plan.refs.push_back({c, s});
  }
  return plan;
}

std::vector<SegmentRef> epoch_order(const SegmentPlan& plan, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<SegmentRef> order = plan.refs;
  std::mt19937_64 rng = derive_rng(seed, epoch, 0x5e6);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  return order;
}

Segment materialize(const Corpus& corpus, std::span<const PitchContour> contours, const SegmentRef& ref,
                    std::size_t length) {
  if (ref.clip >= corpus.clips.size()) throw ArgumentError("segment clip index out of range");
  if (contours.size() != corpus.clips.size())
    throw ArgumentError("need one pitch contour per clip (" + std::to_string(corpus.clips.size()) +
                        "), got " + std::to_string(contours.size()));
  const CorpusClip& clip = corpus.clips[ref.clip];
  if (ref.start % kPitchHop != 0 || ref.start + length > clip.audio.size())
    throw ArgumentError("segment [" + std::to_string(ref.start) + ", +" + std::to_string(length) +
                        ") does not fit clip '" + clip.clip_id + "'");
  const PitchContour& pc = contours[ref.clip];
  if (pc.hop != kPitchHop) throw ArgumentError("segment contours must use the 100-sample hop");
  const std::size_t first = ref.start / kPitchHop;
  const std::size_t frames = (length + kPitchHop - 1) / kPitchHop;
  if (first + frames > pc.size())
    throw ConsistencyError("pitch contour of clip '" + clip.clip_id + "' is shorter than its audio");

  Segment seg;
  seg.clip = ref.clip;
  seg.start = ref.start;
  seg.singer = clip.singer;
  seg.audio.sample_rate = clip.audio.sample_rate;
  seg.audio.singer_id = clip.singer;
  seg.audio.samples.assign(clip.audio.samples.begin() + static_cast<std::ptrdiff_t>(ref.start),
                           clip.audio.samples.begin() + static_cast<std::ptrdiff_t>(ref.start + length));
  seg.pitch = slice_contour(pc, first, frames);
  return seg;
}

SegmentStream::SegmentStream(const Corpus& corpus, std::vector<PitchContour> contours, std::size_t length,
                             std::size_t hop, std::uint64_t seed)
    : corpus_(corpus), contours_(std::move(contours)), plan_(plan_segments(corpus, length, hop)), seed_(seed) {
  if (plan_.refs.empty()) throw InsufficientInputError("no clip is long enough for one segment");
  order_ = epoch_order(plan_, seed_, 0);
}

Segment SegmentStream::next() {
  if (pos_ == order_.size()) {
    ++epoch_;
    pos_ = 0;
    order_ = epoch_order(plan_, seed_, epoch_);
  }
  return materialize(corpus_, contours_, order_[pos_++], plan_.length);
}

std::vector<Segment> segment(const Corpus& corpus, std::span<const PitchContour> contours, std::size_t length,
                             std::size_t hop, std::uint64_t epoch_seed, std::size_t* skipped_clips) {
  const SegmentPlan plan = plan_segments(corpus, length, hop);
  if (skipped_clips != nullptr) *skipped_clips = plan.skipped_clips;
  std::vector<Segment> out;
  out.reserve(plan.refs.size());
  for (const SegmentRef& ref : epoch_order(plan, epoch_seed, 0)) out.push_back(materialize(corpus, contours, ref, length));
  return out;
}

}  // namespace svc
