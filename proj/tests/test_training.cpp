// tests/test_training.cpp

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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "svc/config.hpp"
#include "svc/errors.hpp"
#include "svc/trainer.hpp"
#include "test_util.hpp"

namespace svc {
namespace {

double ce_oracle(const FloatMatrix& logits, const MuLawStream& targets) {
  double sum = 0.0;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    double z = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) z += std::exp(static_cast<double>(logits(t, c)));
    sum += -std::log(std::exp(static_cast<double>(logits(t, targets.codes[static_cast<std::size_t>(t)]))) / z);
  }
  return sum / static_cast<double>(logits.rows());
}

std::map<std::string, FloatMatrix> values_of(const ModelBundle& b, bool adversaries) {
  std::map<std::string, FloatMatrix> out;
  for (const auto& p : b.params())
    if (is_adversary(param_group(p.name)) == adversaries) out[p.name] = p.value;
  return out;
}

bool bit_equal(const std::map<std::string, FloatMatrix>& a, const std::map<std::string, FloatMatrix>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, m] : a) {
    const FloatMatrix& n = b.at(name);
    if (m.rows() != n.rows() || m.cols() != n.cols()) return false;
    if (std::memcmp(m.data(), n.data(), sizeof(float) * static_cast<std::size_t>(m.size())) != 0) return false;
  }
  return true;
}

struct Toy {
  Corpus corpus = synthesize_corpus(test::toy_spec());
  RunConfig run = test::toy_run(10);
  TrainingData data{corpus, run.schedule};
};

const Toy& toy() {
  static const Toy t;
  return t;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("reconstruction cross-entropy") {
  FloatMatrix uniform = FloatMatrix::Constant(50, 256, 0.3f);
  MuLawStream t;
  t.codes.assign(50, 17);
  CHECK(recon_loss(uniform, t) == doctest::Approx(std::log(256.0)).epsilon(1e-9));

  FloatMatrix sharp = FloatMatrix::Zero(50, 256);
  for (Eigen::Index r = 0; r < 50; ++r) sharp(r, 17) = 80.0f;
  CHECK(recon_loss(sharp, t) < 1e-30);

  std::mt19937_64 rng(1);
  std::normal_distribution<float> n(0.0f, 2.0f);
  FloatMatrix rnd(64, 256);
  for (Eigen::Index i = 0; i < rnd.size(); ++i) rnd.data()[i] = n(rng);
  MuLawStream rt;
  for (int i = 0; i < 64; ++i) rt.codes.push_back(static_cast<std::uint8_t>(rng() % 256));
  CHECK(std::abs(recon_loss(rnd, rt) - ce_oracle(rnd, rt)) <= 1e-6);
  CHECK(recon_loss(rnd, rt) >= 0.0);

  t.codes.pop_back();
  CHECK_THROWS_AS(recon_loss(uniform, t), ArgumentError);
}

TEST_CASE("singer confusion loss") {
  const std::vector<float> flat(6, 1.5f);
  CHECK(singer_conf_loss(flat, 2) == doctest::Approx(std::log(6.0)).epsilon(1e-9));
  const std::vector<float> sure = {0.0f, 90.0f, 0.0f};
  CHECK(singer_conf_loss(sure, 1) < 1e-30);
  const std::vector<float> v = {0.3f, -1.2f, 2.0f, 0.7f};
  double z = 0.0;
  for (float x : v) z += std::exp(static_cast<double>(x));
  CHECK(std::abs(singer_conf_loss(v, 3) + std::log(std::exp(0.7) / z)) <= 1e-6);
  CHECK_THROWS_AS(singer_conf_loss(v, 4), ArgumentError);
  CHECK_THROWS_AS(singer_conf_loss(v, -1), ArgumentError);
}

TEST_CASE("pitch regression loss") {
  const std::vector<double> a = {0.1, 0.5, 0.9, 0.3};
  std::vector<double> b = a;
  CHECK(pitch_reg_loss(a, b) == 0.0);
  for (auto& x : b) x += 0.1;
  CHECK(pitch_reg_loss(b, a) == doctest::Approx(0.01).epsilon(1e-9));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(37), q(37);
  double oracle = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = u(rng);
    q[i] = u(rng);
    oracle += (p[i] - q[i]) * (p[i] - q[i]);
  }
  CHECK(std::abs(pitch_reg_loss(p, q) - oracle / 37.0) <= 1e-9);
  b.pop_back();
  CHECK_THROWS_AS(pitch_reg_loss(a, b), ArgumentError);
}

TEST_CASE("total and adversary losses") {
  const LossWeights w;
  CHECK(total_loss(5.0, 1.0, 2.0, w) == doctest::Approx(4.79).epsilon(1e-12));
  CHECK(adversary_loss(1.0, 2.0, w) == doctest::Approx(0.21).epsilon(1e-12));
  CHECK(adversary_loss(0.0, 0.0, w) == 0.0);
  const LossWeights off{0.0, 0.0};
  CHECK(total_loss(3.25, 7.0, 9.0, off) == 3.25);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int i = 0; i < 3; ++i) {
    const double r = u(rng), s = u(rng), p = u(rng);
    CHECK(total_loss(r + 1.0, s, p, w) - total_loss(r, s, p, w) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(total_loss(r, s + 1.0, p, w) - total_loss(r, s, p, w) == doctest::Approx(-w.lambda).epsilon(1e-9));
    CHECK(total_loss(r, s, p + 1.0, w) - total_loss(r, s, p, w) == doctest::Approx(-w.mu).epsilon(1e-9));
  }
}

TEST_CASE("total plus adversary reproduces recon exactly") {
  const LossWeights w;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ur(0.5, 6.0), us(0.0, 3.0), up(0.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    const double r = ur(rng), s = us(rng), p = up(rng);
    CAPTURE(r);
    CHECK(total_loss(r, s, p, w) + adversary_loss(s, p, w) == r);
  }
}

TEST_CASE("learning-rate schedule") {
  TrainState s = TrainState::from_schedule(Schedule{});
  CHECK(lr_at(s) == 1e-3);
  s.step = 999;
  CHECK(lr_at(s) == 1e-3);
  s.step = 1000;
  CHECK(lr_at(s) == doctest::Approx(0.98e-3).epsilon(1e-12));
  s.step = 2000;
  CHECK(lr_at(s) == doctest::Approx(0.9604e-3).epsilon(1e-12));
}

TEST_CASE("schedule validation") {
  Schedule s;
  s.segment_hop = 150;
  CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("segment_hop"), ArgumentError);
  s = Schedule{};
  s.decay = 1.5;
  CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("decay"), ArgumentError);
  CHECK(Schedule{}.resolved_warmup() == 20000);
  LossWeights w{-0.1, 0.1};
  CHECK_THROWS_AS(w.validate(), ArgumentError);
}

TEST_CASE("batch validation") {
  Batch b = toy().data.batch_at(0);
  CHECK(b.items.size() == 2);
  b.validate(2);
  b.items[0].singer = 2;
  CHECK_THROWS_AS(b.validate(2), ArgumentError);
  b.items[0].singer = 1;
  b.items[1].targets.codes.pop_back();
  CHECK_THROWS_AS(b.validate(2), ArgumentError);
}

TEST_CASE("phases update disjoint parameter groups") {
  const Toy& t = toy();
  ModelBundle b(t.run.model, 5);
  TrainState s = TrainState::from_schedule(t.run.schedule);
  const Batch batch = t.data.batch_at(0);
  const LossWeights w{0.5, 0.5};

  const auto model0 = values_of(b, false);
  const auto adv0 = values_of(b, true);
  adversary_phase(b, s, batch, w);
  CHECK(bit_equal(values_of(b, false), model0));
  CHECK_FALSE(bit_equal(values_of(b, true), adv0));

  const auto adv1 = values_of(b, true);
  model_phase(b, s, batch, w);
  CHECK(bit_equal(values_of(b, true), adv1));
  CHECK_FALSE(bit_equal(values_of(b, false), model0));

  // The full step advances the counter once and logs one record.
  alternating_step(b, s, batch, w);
  CHECK(s.step == 1);
  REQUIRE(s.loss_log.size() == 1);
  const LossRecord& r = s.loss_log[0];
  CHECK(r.step == 0);
  CHECK(r.total + r.adversary == r.recon);
}

TEST_CASE("phase 1 is skipped when both weights are zero") {
  const Toy& t = toy();
  ModelBundle b(t.run.model, 6);
  TrainState s = TrainState::from_schedule(t.run.schedule);
  const auto adv0 = values_of(b, true);
  alternating_step(b, s, t.data.batch_at(0), LossWeights{0.0, 0.0});
  CHECK(bit_equal(values_of(b, true), adv0));
}

TEST_CASE("each phase descends on its own objective at a small step") {
  const Toy& t = toy();
  ModelBundle b(t.run.model, 7);
  TrainState s = TrainState::from_schedule(t.run.schedule);
  s.base_lr = 1e-6;
  const LossWeights w{0.5, 0.5};
  for (long long k = 0; k < 10; ++k) {
    const Batch batch = t.data.batch_at(k);
    // The phases are evaluated with the same dropout masks before and after
    // the update because the step counter only moves between iterations.
    const double ad_before = adversary_phase(b, s, batch, w);
    ModelBundle probe = b;
    TrainState ps = s;
    const double ad_after = adversary_phase(probe, ps, batch, w);
    CHECK(ad_after <= ad_before);

    const PhaseLosses before = model_phase(b, s, batch, w);
    probe = b;
    ps = s;
    const PhaseLosses after = model_phase(probe, ps, batch, w);
    CHECK(after.total <= before.total);
    ++s.step;
  }
}

TEST_CASE("raising lambda raises the frozen classifier's loss on the latent") {
  const Toy& t = toy();
  const double lambdas[] = {0.0, 0.01, 0.1};
  // Eval-mode singer loss of the fixed classifier over batches 0..3.
  auto frozen_ls = [&](const ModelBundle& b) {
    double sum = 0.0;
    int n = 0;
    for (long long k = 0; k < 4; ++k) {
      for (const TrainingExample& ex : t.data.batch_at(k).items) {
        const std::vector<float> logits = classify_singer(b, encode(b, ex.encoder_input), false);
        sum += singer_conf_loss(logits, ex.singer);
        ++n;
      }
    }
    return sum / n;
  };
  std::vector<std::vector<double>> per_lambda(3);
  for (std::uint64_t seed : {1, 2, 3}) {
    const ModelBundle start(t.run.model, seed);
    for (int i = 0; i < 3; ++i) {
      ModelBundle b = start;
      TrainState s = TrainState::from_schedule(t.run.schedule);
      s.base_lr = 1e-4;
      for (long long k = 0; k < 5; ++k) {
        model_phase(b, s, t.data.batch_at(k), LossWeights{lambdas[i], 0.0});
        ++s.step;
      }
      per_lambda[static_cast<std::size_t>(i)].push_back(frozen_ls(b));
    }
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[1];
  };
  const double l0 = median(per_lambda[0]), l1 = median(per_lambda[1]), l2 = median(per_lambda[2]);
  CAPTURE(l0);
  CAPTURE(l1);
  CAPTURE(l2);
  CHECK(l0 <= l1);
  CHECK(l1 <= l2);
  CHECK(l0 < l2);
}

TEST_CASE("non-finite loss leaves every parameter untouched") {
  const Toy& t = toy();
  ModelBundle b(t.run.model, 8);
  TrainState s = TrainState::from_schedule(t.run.schedule);
  alternating_step(b, s, t.data.batch_at(0), LossWeights{});
  b.params().at("dec.out2.b").value(0, 3) = std::numeric_limits<float>::quiet_NaN();
  const auto model0 = values_of(b, false);
  const auto adv0 = values_of(b, true);
  const auto moments0 = s.moments.at("cls.fc.w").m;
  CHECK_THROWS_AS(alternating_step(b, s, t.data.batch_at(1), LossWeights{}), NumericalError);
  CHECK(bit_equal(values_of(b, false), model0));
  CHECK(bit_equal(values_of(b, true), adv0));
  CHECK(s.moments.at("cls.fc.w").m == moments0);
  CHECK(s.step == 1);
  CHECK(s.loss_log.size() == 1);
}

TEST_CASE("backtranslation leaves the adversaries alone") {
  const Toy& t = toy();
  ModelBundle b(t.run.model, 9);
  TrainState s = TrainState::from_schedule(t.run.schedule);
  const auto pool = t.data.sample(4, 11);
  const auto adv0 = values_of(b, true);
  const auto model0 = values_of(b, false);
  const BacktranslationReport r = backtranslate_round(b, s, pool, {4, 2}, 12);
  CHECK(r.generated == 4);
  CHECK(r.steps == 2);
  CHECK(std::isfinite(r.mean_recon));
  CHECK(bit_equal(values_of(b, true), adv0));
  CHECK_FALSE(bit_equal(values_of(b, false), model0));
  CHECK(s.step == 0);

  ModelBundle one(test::toy_model(1), 1);
  CHECK_THROWS_AS(backtranslate_round(one, s, pool, {4, 2}, 12), ArgumentError);
}

TEST_CASE("metrics and train state files round trip") {
  test::TempDir dir("train");
  std::vector<LossRecord> log;
  for (int i = 0; i < 5; ++i)
    log.push_back({i, 1e-3 / (i + 1), 5.5 - 0.1 * i, 0.69 + 1e-17 * i, 0.1 / 3.0, 5.3 - i / 7.0, 1.0 / 3.0});
  write_metrics_csv(log, dir / "m.csv");
  CHECK(read_metrics_csv(dir / "m.csv") == log);
  std::ifstream in(dir / "m.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "step,lr,L_recon,L_s,L_p,L_total,L_ad");

  const Toy& t = toy();
  ModelBundle b(t.run.model, 10);
  TrainState s = TrainState::from_schedule(t.run.schedule);
  alternating_step(b, s, t.data.batch_at(0), LossWeights{});
  save_train_state(s, dir / "s.state");
  const TrainState back = load_train_state(dir / "s.state");
  CHECK(back.step == s.step);
  CHECK(back.loss_log == s.loss_log);
  CHECK(back.moments.size() == s.moments.size());
  CHECK(back.moments.at("enc.in.w").v == s.moments.at("enc.in.w").v);

  std::ofstream(dir / "bad.state") << "SVCSTATE";
  CHECK_THROWS_AS(load_train_state(dir / "bad.state"), CorruptionError);
}

TEST_CASE("training on a toy corpus lowers the reconstruction loss") {
  const Toy& t = toy();
  RunConfig cfg = test::toy_run(150);
  cfg.schedule.base_lr = 3e-3;
  const TrainResult r = train(cfg, t.corpus);
  REQUIRE(r.state.loss_log.size() == 150);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 10; ++i) {
    first += r.state.loss_log[static_cast<std::size_t>(i)].recon;
    last += r.state.loss_log[r.state.loss_log.size() - 1 - static_cast<std::size_t>(i)].recon;
  }
  CHECK(last < first);
}

TEST_CASE("training is deterministic and resumable") {
  const Toy& t = toy();
  test::TempDir dir("train");
  RunConfig cfg = test::toy_run(12);
  cfg.schedule.checkpoint_every = 6;
  cfg.schedule.backtranslation = true;
  cfg.schedule.warmup_steps = 5;
  cfg.schedule.backtranslation_every = 4;
  cfg.schedule.backtranslation_count = 2;
  cfg.schedule.backtranslation_inner_steps = 1;

  TrainOptions o1;
  o1.run_dir = dir / "a";
  const TrainResult a = train(cfg, t.corpus, o1);
  TrainOptions o2;
  o2.run_dir = dir / "b";
  const TrainResult b = train(cfg, t.corpus, o2);
  CHECK(a.state.loss_log == b.state.loss_log);
  CHECK(std::filesystem::exists(dir / "a" / "config.json"));
  CHECK(std::filesystem::exists(checkpoint_path(dir / "a", 6)));
  CHECK(std::filesystem::exists(checkpoint_path(dir / "a", 12)));
  CHECK(read_metrics_csv(dir / "a" / "metrics.csv") == a.state.loss_log);

  TrainOptions o3;
  o3.run_dir = dir / "c";
  o3.resume_from = checkpoint_path(dir / "a", 6);
  const TrainResult c = train(cfg, t.corpus, o3);
  CHECK(c.state.loss_log == a.state.loss_log);
  for (const auto& p : a.bundle.params())
    CHECK(c.bundle.params().at(p.name).value == p.value);

  RunConfig other = cfg;
  other.model.latent_dim = 5;
  CHECK_THROWS_AS(train(other, t.corpus, o3), ArgumentError);
  RunConfig three = cfg;
  three.model.n_singers = 3;
  CHECK_THROWS_AS(train(three, t.corpus), ArgumentError);
}

TEST_CASE("run config JSON is strict and lossless") {
  RunConfig cfg = test::toy_run(123);
  cfg.weights.lambda = 0.02;
  cfg.schedule.base_lr = 1.0 / 3.0;
  const std::string text = run_config_to_json(cfg);
  CHECK(run_config_from_json(text) == cfg);

  std::string bad = text;
  bad.insert(bad.find("\"model\": {") + 10, "\"latnet_dim\": 3, ");
  CHECK_THROWS_WITH_AS(run_config_from_json(bad), doctest::Contains("model.latnet_dim"), ArgumentError);
  CHECK_THROWS_WITH_AS(run_config_from_json(R"({"schedule": {"batch_size": "four"}})"),
                       doctest::Contains("batch_size"), ArgumentError);
  CHECK_THROWS_WITH_AS(run_config_from_json(R"({"schedule": {"batch_size": 0}})"),
                       doctest::Contains("batch_size"), ArgumentError);
  CHECK_THROWS_AS(run_config_from_json("{not json"), ArgumentError);
  // Missing fields keep their defaults.
  CHECK(run_config_from_json("{}") == RunConfig{});
  CHECK(model_config_from_json(model_config_to_json(cfg.model)) == cfg.model);
}

}  // TEST_SUITE

}  // namespace svc
