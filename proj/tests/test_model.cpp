// tests/test_model.cpp

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

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "svc/errors.hpp"
#include "svc/model.hpp"
#include "test_util.hpp"

namespace svc {
namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.n_singers = 3;
  c.embed_dim = 4;
  c.latent_dim = 4;
  c.encoder_blocks = 1;
  c.encoder_layers_per_block = 3;
  c.decoder_blocks = 2;
  c.decoder_layers_per_block = 4;
  c.residual_channels = 8;
  c.skip_channels = 8;
  c.adversary_channels = 8;
  return c;
}

ConditionSequence condition_for(const ModelBundle& b, const AudioClip& clip, int singer) {
  const LatentSequence lat = encode(b, clip.samples);
  std::vector<double> p((clip.size() + 99) / 100);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = 0.4 + 0.2 * std::sin(0.1 * static_cast<double>(i));
  return build_condition(lat, PitchContour::from_normalized(p), lookup_embedding(b, singer), clip.size());
}

LatentSequence random_latent(Eigen::Index frames, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  LatentSequence l;
  l.frames.resize(frames, dim);
  for (Eigen::Index i = 0; i < l.frames.size(); ++i) l.frames.data()[i] = d(rng);
  return l;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("config defaults and receptive field") {
  ModelConfig c;
  c.validate();
  CHECK(c.receptive_field() == 4093);
  CHECK(c.encoder_dilations().size() == 30);
  CHECK(c.decoder_dilations().size() == 40);
  CHECK(c.decoder_dilations()[9] == 512);
  CHECK(c.decoder_dilations()[10] == 1);
  CHECK(c.condition_dim() == 64 + 1 + 32);
}

TEST_CASE("config validation names the field") {
  ModelConfig c;
  c.dropout_p = 1.0;
  try {
    c.validate();
    FAIL("expected ArgumentError");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("dropout_p") != std::string::npos);
  }
  c = ModelConfig{};
  c.residual_channels = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("residual_channels"), ArgumentError);
  c = ModelConfig{};
  c.pitch_gain = 0.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("pitch_gain"), ArgumentError);
}

TEST_CASE("parameter groups cover every parameter") {
  const ModelBundle b(small_config(), 1);
  int adversary = 0, other = 0;
  for (const auto& p : b.params()) {
    const ParamGroup g = param_group(p.name);
    (is_adversary(g) ? adversary : other)++;
  }
  CHECK(adversary == 12);
  CHECK(other > 0);
  CHECK(b.params().at("emb.table").value.rows() == 3);
  CHECK_THROWS(param_group("bogus.w"));
}

TEST_CASE("shape lattice") {
  const ModelBundle b(small_config(), 2);
  for (std::size_t len : {800u, 1600u, 16000u, 2401u}) {
    CAPTURE(len);
    const AudioClip clip = test::sine(220.0, static_cast<double>(len) / 16000.0);
    REQUIRE(clip.size() == len);
    const LatentSequence lat = encode(b, clip.samples);
    CHECK(lat.length() == static_cast<Eigen::Index>((len + 799) / 800));
    const ConditionSequence cond = condition_for(b, clip, 1);
    CHECK(cond.length() == static_cast<Eigen::Index>(len));
    CHECK(cond.values.cols() == 4 + 1 + 4);
    if (len <= 1600) {
      const FloatMatrix logits = decode_teacher_forced(b, mulaw_encode(clip), cond);
      CHECK(logits.rows() == static_cast<Eigen::Index>(len));
      CHECK(logits.cols() == 256);
    }
  }
  std::vector<float> shortw(799, 0.1f);
  CHECK_THROWS_AS(encode(b, shortw), InsufficientInputError);
}

TEST_CASE("all-zero waveform gives finite latents") {
  const ModelBundle b(small_config(), 3);
  std::vector<float> zeros(1600, 0.0f);
  const LatentSequence lat = encode(b, zeros);
  CHECK(lat.frames.allFinite());
}

TEST_CASE("condition layout") {
  const ModelBundle b(small_config(), 4);
  LatentSequence lat = random_latent(2, 4, 5);
  lat.stride = 800;
  const PitchContour flat = PitchContour::from_normalized(std::vector<double>(16, 0.5));
  const auto e0 = lookup_embedding(b, 0);
  const auto e1 = lookup_embedding(b, 1);
  const ConditionSequence c0 = build_condition(lat, flat, e0, 1600);
  const ConditionSequence c1 = build_condition(lat, flat, e1, 1600);
  for (Eigen::Index r : {0, 400, 799}) CHECK(c0.values.row(r).head(4) == lat.frames.row(0));
  for (Eigen::Index r : {800, 1200, 1599}) CHECK(c0.values.row(r).head(4) == lat.frames.row(1));
  for (Eigen::Index r = 0; r < 1600; ++r) REQUIRE(c0.values(r, 4) == 0.5f);
  // Different singers differ only in the embedding columns.
  CHECK(c0.values.leftCols(5) == c1.values.leftCols(5));
  CHECK(c0.values.rightCols(4) != c1.values.rightCols(4));
  for (int k = 0; k < 4; ++k) CHECK(c0.values(37, 5 + k) == e0[static_cast<std::size_t>(k)]);
}

TEST_CASE("embedding lookup and mixing") {
  const ModelBundle b(small_config(), 6);
  const auto v0 = lookup_embedding(b, 0);
  const auto& table = b.params().at("emb.table").value;
  for (int k = 0; k < 4; ++k) CHECK(v0[static_cast<std::size_t>(k)] == table(0, k));
  CHECK(lookup_embedding(b, 1) != v0);
  CHECK_THROWS_WITH_AS(lookup_embedding(b, 3), doctest::Contains("valid ids: 0..2"), ArgumentError);
  const auto v1 = lookup_embedding(b, 1);
  const auto half = mix_embeddings(v0, v1, 0.5);
  for (std::size_t k = 0; k < 4; ++k) CHECK(half[k] == doctest::Approx(0.5 * (v0[k] + v1[k])));
  CHECK(mix_embeddings(v0, v1, 1.0) == v0);
}

TEST_CASE("teacher-forced decoding is causal") {
  const ModelBundle b(small_config(), 7);
  const AudioClip clip = test::sine(330.0, 0.1);  // 1600 samples
  const ConditionSequence cond = condition_for(b, clip, 0);
  MuLawStream targets = mulaw_encode(clip);
  const FloatMatrix base = decode_teacher_forced(b, targets, cond);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t t = 1 + rng() % 1500;
    MuLawStream changed = targets;
    changed.codes[t] = static_cast<std::uint8_t>((changed.codes[t] + 97) % 256);
    const FloatMatrix out = decode_teacher_forced(b, changed, cond);
    CAPTURE(t);
    CHECK(out.topRows(static_cast<Eigen::Index>(t + 1)) == base.topRows(static_cast<Eigen::Index>(t + 1)));
    CHECK(out.row(static_cast<Eigen::Index>(t + 1)) != base.row(static_cast<Eigen::Index>(t + 1)));
  }
}

TEST_CASE("receptive field matches the dilation sum") {
  // The decoder input is shifted by one, so a target change at t reaches
  // logits t+1 .. t+RF and nothing later.
  ModelConfig c = small_config();
  const ModelBundle b(c, 9);
  const int rf = c.receptive_field();
  CHECK(rf == 1 + 2 * (1 + 2 + 4 + 8));
  const AudioClip clip = test::sine(180.0, 0.1);
  const ConditionSequence cond = condition_for(b, clip, 2);
  const MuLawStream targets = mulaw_encode(clip);
  MuLawStream changed = targets;
  const std::size_t t = 500;
  changed.codes[t] = static_cast<std::uint8_t>((changed.codes[t] + 64) % 256);
  const FloatMatrix a = decode_teacher_forced(b, targets, cond);
  const FloatMatrix d = decode_teacher_forced(b, changed, cond);
  CHECK(a.row(static_cast<Eigen::Index>(t + rf)) != d.row(static_cast<Eigen::Index>(t + rf)));
  CHECK(a.bottomRows(a.rows() - static_cast<Eigen::Index>(t + rf + 1)) ==
        d.bottomRows(d.rows() - static_cast<Eigen::Index>(t + rf + 1)));
}

TEST_CASE("incremental recursion reproduces teacher-forced logits") {
  const ModelBundle b(small_config(), 10);
  const AudioClip clip = test::sine(250.0, 0.1);
  const ConditionSequence cond = condition_for(b, clip, 1);
  const MuLawStream targets = mulaw_encode(clip);
  const FloatMatrix tf = decode_teacher_forced(b, targets, cond);
  const FloatMatrix inc = incremental_logits(b, cond, targets);
  REQUIRE(inc.rows() == tf.rows());
  CHECK((inc - tf).cwiseAbs().maxCoeff() <= 1e-4f);
}

TEST_CASE("pitch gain scales the pitch channel in both decoding paths") {
  ModelConfig cfg = small_config();
  const ModelBundle plain(cfg, 10);
  cfg.pitch_gain = 8.0;
  ModelBundle gained(cfg, 10);
  for (auto& p : gained.params()) p.value = plain.params().at(p.name).value;
  const AudioClip clip = test::sine(250.0, 0.1);
  const ConditionSequence cond = condition_for(plain, clip, 1);
  const MuLawStream targets = mulaw_encode(clip);
  const FloatMatrix tf = decode_teacher_forced(gained, targets, cond);
  CHECK((tf - decode_teacher_forced(plain, targets, cond)).cwiseAbs().maxCoeff() > 1e-3f);
  CHECK((incremental_logits(gained, cond, targets) - tf).cwiseAbs().maxCoeff() <= 1e-4f);

  // Same logits as an ungained model whose pitch input is pre-scaled.
  ConditionSequence scaled = cond;
  scaled.values.col(cfg.latent_dim) *= 8.0f;
  CHECK((decode_teacher_forced(plain, targets, scaled) - tf).cwiseAbs().maxCoeff() <= 1e-5f);
}

TEST_CASE("generation contracts") {
  const ModelBundle b(small_config(), 11);
  const AudioClip clip = test::sine(250.0, 0.1);
  const ConditionSequence full = condition_for(b, clip, 0);
  for (Eigen::Index len : {1, 800, 1600}) {
    ConditionSequence c = full;
    c.values = full.values.topRows(len);
    CHECK(generate(b, c, 0).size() == static_cast<std::size_t>(len));
  }
  const MuLawStream a = generate(b, full, 1, Sampling::kArgmax);
  const MuLawStream a2 = generate(b, full, 99, Sampling::kArgmax);
  CHECK(a.codes == a2.codes);
  const MuLawStream s1 = generate(b, full, 5, Sampling::kCategorical);
  const MuLawStream s2 = generate(b, full, 5, Sampling::kCategorical);
  const MuLawStream s3 = generate(b, full, 6, Sampling::kCategorical);
  CHECK(s1.codes == s2.codes);
  CHECK(s1.codes != s3.codes);
  // Step 0 sees only the silence input, as in teacher forcing.
  const FloatMatrix tf = decode_teacher_forced(b, a, full);
  Eigen::Index arg = 0;
  tf.row(0).maxCoeff(&arg);
  CHECK(a.codes[0] == static_cast<std::uint8_t>(arg));
  // Argmax generation equals the teacher-forced argmax over its own output.
  for (Eigen::Index t = 0; t < tf.rows(); ++t) {
    tf.row(t).maxCoeff(&arg);
    REQUIRE(a.codes[static_cast<std::size_t>(t)] == static_cast<std::uint8_t>(arg));
  }
}

TEST_CASE("adversary heads: shapes, eval determinism and time symmetry") {
  ModelBundle b(small_config(), 12);
  const LatentSequence lat = random_latent(40, 4, 13);
  CHECK(classify_singer(b, lat, false).size() == 3);
  CHECK(regress_pitch(b, lat, false).size() == 40);
  CHECK(classify_singer(b, lat, false) == classify_singer(b, lat, false));
  CHECK(regress_pitch(b, lat, false) == regress_pitch(b, lat, false));
  CHECK(classify_singer(b, lat, true, 1) != classify_singer(b, lat, true, 2));

  // With mirror-symmetric kernels, zero-padded same convolutions commute
  // with time reversal, so the time-mean logits are reversal invariant.
  for (const char* name : {"cls.conv1.w", "cls.conv2.w"}) {
    auto& w = b.params().at(name).value;
    const Eigen::Index in = w.rows() / 3;
    w.middleRows(2 * in, in) = w.topRows(in);
  }
  LatentSequence rev = lat;
  rev.frames = lat.frames.colwise().reverse();
  const auto fwd = classify_singer(b, lat, false);
  const auto bwd = classify_singer(b, rev, false);
  for (std::size_t k = 0; k < fwd.size(); ++k) CHECK(fwd[k] == doctest::Approx(bwd[k]).epsilon(1e-5));
}

TEST_CASE("pitch regressor is equivariant to block swaps away from edges") {
  const ModelBundle b(small_config(), 14);
  const LatentSequence lat = random_latent(40, 4, 15);
  LatentSequence swapped = lat;
  swapped.frames.topRows(20) = lat.frames.bottomRows(20);
  swapped.frames.bottomRows(20) = lat.frames.topRows(20);
  const auto y = regress_pitch(b, lat, false);
  const auto z = regress_pitch(b, swapped, false);
  // Two kernel-3 layers see 2 frames either side; skip that guard band.
  for (std::size_t t = 2; t < 18; ++t) {
    CHECK(z[t] == doctest::Approx(y[t + 20]).epsilon(1e-6));
    CHECK(z[t + 20] == doctest::Approx(y[t]).epsilon(1e-6));
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  test::TempDir dir("ckpt");
  const ModelBundle b(small_config(), 16);
  checkpoint_save(b, dir / "m.ckpt");
  const ModelBundle back = checkpoint_load(dir / "m.ckpt");
  CHECK(back.config() == b.config());
  REQUIRE(back.params().size() == b.params().size());
  for (const auto& p : b.params()) {
    const auto& q = back.params().at(p.name);
    REQUIRE(q.value.rows() == p.value.rows());
    CHECK(std::memcmp(q.value.data(), p.value.data(), sizeof(float) * static_cast<std::size_t>(p.value.size())) == 0);
  }
}

TEST_CASE("checkpoint version gate and corruption") {
  test::TempDir dir("ckpt");
  const ModelBundle b(small_config(), 17);
  checkpoint_save(b, dir / "m.ckpt");
  CHECK_THROWS_WITH_AS(checkpoint_load(dir / "m.ckpt", kCheckpointVersion + 1),
                       doctest::Contains("version 1 does not match reader version 2"), VersionError);

  // Truncated copy.
  std::ifstream is(dir / "m.ckpt", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(is)), {});
  std::ofstream(dir / "cut.ckpt", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  CHECK_THROWS_AS(checkpoint_load(dir / "cut.ckpt"), CorruptionError);

  // Config that disagrees with the stored tensor shapes.
  std::string edited = bytes;
  const auto pos = edited.find("\"residual_channels\": 8");
  REQUIRE(pos != std::string::npos);
  edited.replace(pos, 22, "\"residual_channels\": 9");
  std::ofstream(dir / "shape.ckpt", std::ios::binary).write(edited.data(), static_cast<std::streamsize>(edited.size()));
  CHECK_THROWS_AS(checkpoint_load(dir / "shape.ckpt"), CorruptionError);

  CHECK_THROWS_AS(checkpoint_load(dir / "missing.ckpt"), IoError);
}

}  // TEST_SUITE

}  // namespace svc
