// src/losses.cpp

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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "svc/errors.hpp"
#include "svc/rng.hpp"
#include "svc/training.hpp"

namespace svc {

// ---------------------------------------------------------------------------
// Config validation

void LossWeights::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ArgumentError("config field 'lambda' must be a finite value >= 0");
  if (!(mu >= 0.0) || !std::isfinite(mu))
    throw ArgumentError("config field 'mu' must be a finite value >= 0");
}

void Schedule::validate() const {
  if (total_steps < 0) throw ArgumentError("config field 'total_steps' must be >= 0");
  if (batch_size <= 0) throw ArgumentError("config field 'batch_size' must be positive");
  if (segment_length <= 0) throw ArgumentError("config field 'segment_length' must be positive");
  if (segment_hop <= 0 || segment_hop % kPitchHop != 0)
    throw ArgumentError("config field 'segment_hop' must be a positive multiple of 100");
  if (!(base_lr > 0.0)) throw ArgumentError("config field 'base_lr' must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ArgumentError("config field 'decay' must be in (0, 1]");
  if (decay_every <= 0) throw ArgumentError("config field 'decay_every' must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0))
    throw ArgumentError("config field 'adam_beta1' must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ArgumentError("config field 'adam_beta2' must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ArgumentError("config field 'adam_eps' must be positive");
  if (backtranslation_every <= 0)
    throw ArgumentError("config field 'backtranslation_every' must be positive");
  if (backtranslation_count <= 0)
    throw ArgumentError("config field 'backtranslation_count' must be positive");
  if (backtranslation_inner_steps <= 0)
    throw ArgumentError("config field 'backtranslation_inner_steps' must be positive");
  if (checkpoint_every < 0) throw ArgumentError("config field 'checkpoint_every' must be >= 0");
}

long long Schedule::resolved_warmup() const {
  return warmup_steps >= 0 ? warmup_steps : (2 * total_steps) / 3;
}

void RunConfig::validate() const {
  model.validate();
  weights.validate();
  schedule.validate();
  if (schedule.segment_length < model.latent_stride)
    throw ArgumentError("config field 'segment_length' must cover at least one latent frame");
}

TrainState TrainState::from_schedule(const Schedule& schedule) {
  TrainState s;
  s.base_lr = schedule.base_lr;
  s.decay = schedule.decay;
  s.decay_every = schedule.decay_every;
  s.rng_seed = schedule.seed;
  return s;
}

void Batch::validate(int n_singers) const {
  if (items.empty()) throw ArgumentError("batch is empty");
  const std::size_t len = items.front().targets.size();
  for (const auto& it : items) {
    if (it.targets.size() != len || it.encoder_input.size() != len)
      throw ArgumentError("batch segments differ in length");
    if (it.singer < 0 || it.singer >= n_singers)
      throw ArgumentError("batch singer id " + std::to_string(it.singer) + " out of range");
    if (!it.pitch.normalized) throw ArgumentError("batch pitch contours must be normalized");
  }
}

// ---------------------------------------------------------------------------
// Plain losses

double recon_loss(const FloatMatrix& logits, const MuLawStream& targets) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size())
    throw ArgumentError("recon_loss: " + std::to_string(logits.rows()) + " logit rows vs " +
                        std::to_string(targets.size()) + " targets");
  if (targets.size() == 0) throw ArgumentError("recon_loss: empty input");
  double total = 0.0;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double peak = logits.row(t).maxCoeff();
    double denom = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) denom += std::exp(logits(t, c) - peak);
    total += peak + std::log(denom) - logits(t, targets.codes[static_cast<std::size_t>(t)]);
  }
  return total / static_cast<double>(logits.rows());
}

double singer_conf_loss(std::span<const float> class_logits, int singer) {
  if (singer < 0 || static_cast<std::size_t>(singer) >= class_logits.size())
    throw ArgumentError("singer_conf_loss: singer id " + std::to_string(singer) + " out of range");
  double peak = class_logits[0];
  for (float v : class_logits) peak = std::max<double>(peak, v);
  double denom = 0.0;
  for (float v : class_logits) denom += std::exp(v - peak);
  return peak + std::log(denom) - class_logits[static_cast<std::size_t>(singer)];
}

double pitch_reg_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size())
    throw ArgumentError("pitch_reg_loss: length mismatch " + std::to_string(pred.size()) +
                        " vs " + std::to_string(target.size()));
  if (pred.empty()) throw ArgumentError("pitch_reg_loss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - target[i]) * (pred[i] - target[i]);
  return acc / static_cast<double>(pred.size());
}

// The reported adversary loss is rounded to a 2^-40 grid. For recon values
// below 2^12 that are at least half the adversary loss, recon - ad is then
// exact, so total + ad reproduces recon bit for bit.
double adversary_loss(double s_loss, double p_loss, const LossWeights& w) {
  constexpr double kGrid = 0x1p-40;
  return std::nearbyint((w.lambda * s_loss + w.mu * p_loss) / kGrid) * kGrid;
}

double total_loss(double recon, double s_loss, double p_loss, const LossWeights& w) {
  return recon - adversary_loss(s_loss, p_loss, w);
}

double lr_at(const TrainState& state) {
  const long long periods = state.step / state.decay_every;
  return state.base_lr * std::pow(state.decay, static_cast<double>(periods));
}

// ---------------------------------------------------------------------------
// Graph losses

template <typename T>
BatchLosses<T> batch_losses(const Network<T>& net, ad::Graph<T>& g, const Batch& batch,
                            bool with_decoder, bool train_mode, std::mt19937_64& rng) {
  using Mat = ad::Matrix<T>;
  const ModelConfig& cfg = net.config();
  std::vector<ad::Var> rec, sl, pl;
  for (const TrainingExample& it : batch.items) {
    const auto len = static_cast<Eigen::Index>(it.targets.size());
    Mat wave(len, 1);
    for (Eigen::Index i = 0; i < len; ++i) wave(i, 0) = static_cast<T>(it.encoder_input[i]);
    ad::Var latent = net.encoder(g, g.constant(std::move(wave)));

    const int singer[] = {it.singer};
    sl.push_back(g.softmax_cross_entropy(net.classifier(g, latent, train_mode, &rng), singer));

    const std::vector<double> targets = downsample_to_latent(it.pitch, cfg.latent_stride);
    if (static_cast<Eigen::Index>(targets.size()) != g.value(latent).rows()) {
      throw ConsistencyError("pitch targets cover " + std::to_string(targets.size()) +
                             " latent frames, encoder produced " +
                             std::to_string(g.value(latent).rows()));
    }
    const std::vector<T> tt(targets.begin(), targets.end());
    pl.push_back(g.mse(net.regressor(g, latent, train_mode, &rng), tt));

    if (with_decoder) {
      const std::vector<double> up = upsample_linear(it.pitch, it.targets.size());
      const std::vector<T> upt(up.begin(), up.end());
      ad::Var cond = net.condition(g, latent, upt, net.embedding(g, it.singer), len);
      const std::vector<float> shifted = shifted_decoder_input(it.targets);
      Mat in(len, 1);
      for (Eigen::Index i = 0; i < len; ++i) in(i, 0) = static_cast<T>(shifted[i]);
      ad::Var logits = net.decoder(g, g.constant(std::move(in)), cond);
      std::vector<int> codes(it.targets.codes.begin(), it.targets.codes.end());
      rec.push_back(g.softmax_cross_entropy(logits, codes));
    }
  }
  const std::vector<T> mean(batch.items.size(), T(1) / static_cast<T>(batch.items.size()));
  BatchLosses<T> out;
  out.singer = g.weighted_sum(sl, mean);
  out.pitch = g.weighted_sum(pl, mean);
  out.singer_value = g.scalar(out.singer);
  out.pitch_value = g.scalar(out.pitch);
  if (with_decoder) {
    out.recon = g.weighted_sum(rec, mean);
    out.recon_value = g.scalar(out.recon);
  }
  return out;
}

template BatchLosses<float> batch_losses<float>(const Network<float>&, ad::Graph<float>&,
                                                const Batch&, bool, bool, std::mt19937_64&);
template BatchLosses<double> batch_losses<double>(const Network<double>&, ad::Graph<double>&,
                                                  const Batch&, bool, bool, std::mt19937_64&);

// ---------------------------------------------------------------------------
// Optimisation steps

namespace {

struct Snapshot {
  std::map<std::string, FloatMatrix> values;
  std::map<std::string, ad::AdamMoments<float>> moments;
};

Snapshot take_snapshot(const ModelBundle& bundle, const TrainState& state, bool adversaries) {
  Snapshot s;
  for (const auto& p : bundle.params()) {
    if (is_adversary(param_group(p.name)) != adversaries) continue;
    s.values[p.name] = p.value;
    auto it = state.moments.find(p.name);
    if (it != state.moments.end()) s.moments[p.name] = it->second;
  }
  return s;
}

void restore_snapshot(ModelBundle& bundle, TrainState& state, const Snapshot& s) {
  for (auto& [name, value] : s.values) {
    bundle.params().at(name).value = value;
    auto it = s.moments.find(name);
    if (it != s.moments.end()) state.moments[name] = it->second;
    else state.moments.erase(name);
  }
}

void update_group(ModelBundle& bundle, TrainState& state, bool adversaries, double lr,
                  const ad::AdamOptions& adam) {
  for (auto& p : bundle.params()) {
    if (is_adversary(param_group(p.name)) != adversaries) continue;
    ad::adam_update(p, state.moments[p.name], lr, adam);
  }
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

double adversary_phase(ModelBundle& bundle, TrainState& state, const Batch& batch,
                       const LossWeights& w, const ad::AdamOptions& adam) {
  batch.validate(bundle.config().n_singers);
  w.validate();
  // With both weights at zero L_ad is identically zero; nothing to update.
  if (w.lambda == 0.0 && w.mu == 0.0) return 0.0;
  std::mt19937_64 rng = derive_rng(state.rng_seed, static_cast<std::uint64_t>(state.step), 1);
  ad::Graph<float> g;
  g.set_grad_filter([](const ad::Parameter<float>& p) { return is_adversary(param_group(p.name)); });
  auto losses = batch_losses(bundle, g, batch, /*with_decoder=*/false, /*train_mode=*/true, rng);
  const ad::Var terms[] = {losses.singer, losses.pitch};
  const float weights[] = {static_cast<float>(w.lambda), static_cast<float>(w.mu)};
  ad::Var l_ad = g.weighted_sum(terms, weights);
  const double value = g.scalar(l_ad);
  if (!finite(value)) {
    throw NumericalError("non-finite adversary loss at step " + std::to_string(state.step) +
                         " (L_s = " + std::to_string(losses.singer_value) +
                         ", L_p = " + std::to_string(losses.pitch_value) + ")");
  }
  g.backward(l_ad);
  bundle.params().zero_grad();
  g.accumulate_grads(bundle.params());
  update_group(bundle, state, /*adversaries=*/true, lr_at(state), adam);
  bundle.params().zero_grad();
  return value;
}

PhaseLosses model_phase(ModelBundle& bundle, TrainState& state, const Batch& batch,
                        const LossWeights& w, const ad::AdamOptions& adam) {
  batch.validate(bundle.config().n_singers);
  w.validate();
  std::mt19937_64 rng = derive_rng(state.rng_seed, static_cast<std::uint64_t>(state.step), 2);
  ad::Graph<float> g;
  g.set_grad_filter([](const ad::Parameter<float>& p) { return !is_adversary(param_group(p.name)); });
  auto losses = batch_losses(bundle, g, batch, /*with_decoder=*/true, /*train_mode=*/true, rng);
  const ad::Var terms[] = {losses.recon, losses.singer, losses.pitch};
  const float weights[] = {1.0f, -static_cast<float>(w.lambda), -static_cast<float>(w.mu)};
  ad::Var l_total = g.weighted_sum(terms, weights);
  PhaseLosses out{losses.recon_value, losses.singer_value, losses.pitch_value, g.scalar(l_total)};
  if (!finite(out.total) || !finite(out.recon)) {
    throw NumericalError("non-finite loss at step " + std::to_string(state.step) +
                         " (L_recon = " + std::to_string(out.recon) +
                         ", L_s = " + std::to_string(out.singer) +
                         ", L_p = " + std::to_string(out.pitch) + ")");
  }
  g.backward(l_total);
  bundle.params().zero_grad();
  g.accumulate_grads(bundle.params());
  update_group(bundle, state, /*adversaries=*/false, lr_at(state), adam);
  bundle.params().zero_grad();
  return out;
}

StepReport alternating_step(ModelBundle& bundle, TrainState& state, const Batch& batch,
                            const LossWeights& w, const ad::AdamOptions& adam) {
  batch.validate(bundle.config().n_singers);
  w.validate();
  const double lr = lr_at(state);
  const Snapshot before = take_snapshot(bundle, state, /*adversaries=*/true);
  adversary_phase(bundle, state, batch, w, adam);
  PhaseLosses losses;
  try {
    losses = model_phase(bundle, state, batch, w, adam);
  } catch (const NumericalError&) {
    restore_snapshot(bundle, state, before);
    throw;
  }

  StepReport report;
  LossRecord& r = report.record;
  r.step = state.step;
  r.lr = lr;
  r.recon = losses.recon;
  r.singer = losses.singer;
  r.pitch = losses.pitch;
  r.adversary = adversary_loss(r.singer, r.pitch, w);
  r.total = total_loss(r.recon, r.singer, r.pitch, w);
  ++state.step;
  state.loss_log.push_back(r);
  return report;
}

double reconstruction_step(ModelBundle& bundle, TrainState& state, const Batch& batch,
                           const ad::AdamOptions& adam) {
  batch.validate(bundle.config().n_singers);
  std::mt19937_64 rng = derive_rng(state.rng_seed, static_cast<std::uint64_t>(state.step), 3);
  ad::Graph<float> g;
  g.set_grad_filter([](const ad::Parameter<float>& p) { return !is_adversary(param_group(p.name)); });
  auto losses = batch_losses(bundle, g, batch, /*with_decoder=*/true, /*train_mode=*/true, rng);
  if (!finite(losses.recon_value))
    throw NumericalError("non-finite reconstruction loss during backtranslation");
  g.backward(losses.recon);
  bundle.params().zero_grad();
  g.accumulate_grads(bundle.params());
  update_group(bundle, state, /*adversaries=*/false, lr_at(state), adam);
  bundle.params().zero_grad();
  return losses.recon_value;
}

BacktranslationReport backtranslate_round(ModelBundle& bundle, TrainState& state,
                                          std::span<const TrainingExample> pool,
                                          const BacktranslationOptions& opts, std::uint64_t seed,
                                          const ad::AdamOptions& adam) {
  const int n = bundle.config().n_singers;
  if (n < 2) throw ArgumentError("backtranslation needs at least 2 singers");
  if (pool.empty()) throw ArgumentError("backtranslation: empty segment pool");
  if (opts.count <= 0 || opts.inner_steps <= 0)
    throw ArgumentError("backtranslation: count and inner_steps must be positive");

  std::mt19937_64 rng(seed);
  std::vector<TrainingExample> generated;
  generated.reserve(static_cast<std::size_t>(opts.count));
  for (int i = 0; i < opts.count; ++i) {
    const TrainingExample& src = pool[uniform_index(rng, pool.size())];
    const int a = src.singer;
    int b = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n - 1)));
    if (b >= a) ++b;
    const double w = uniform_unit(rng);
    const auto mixed = mix_embeddings(lookup_embedding(bundle, a), lookup_embedding(bundle, b), w);
    const LatentSequence latent = encode(bundle, src.encoder_input);
    const ConditionSequence cond = build_condition(latent, src.pitch, mixed, src.targets.size());
    const MuLawStream codes = generate(bundle, cond, 0, Sampling::kArgmax);

    TrainingExample ex;
    ex.encoder_input = mulaw_decode(codes).samples;
    ex.targets = src.targets;
    ex.pitch = src.pitch;
    ex.singer = a;
    generated.push_back(std::move(ex));
  }

  BacktranslationReport report;
  report.generated = opts.count;
  const std::size_t per_step =
      (generated.size() + static_cast<std::size_t>(opts.inner_steps) - 1) / opts.inner_steps;
  double acc = 0.0;
  for (int s = 0; s < opts.inner_steps; ++s) {
    Batch batch;
    for (std::size_t k = 0; k < per_step; ++k)
      batch.items.push_back(generated[(s * per_step + k) % generated.size()]);
    acc += reconstruction_step(bundle, state, batch, adam);
    ++report.steps;
  }
  report.mean_recon = acc / report.steps;
  return report;
}

// ---------------------------------------------------------------------------
// Persistence

void write_metrics_csv(std::span<const LossRecord> log, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write metrics CSV: " + path.string());
  os << "step,lr,L_recon,L_s,L_p,L_total,L_ad\n" << std::setprecision(17);
  for (const LossRecord& r : log) {
    os << r.step << ',' << r.lr << ',' << r.recon << ',' << r.singer << ',' << r.pitch << ','
       << r.total << ',' << r.adversary << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<LossRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read metrics CSV: " + path.string());
  std::string line;
  std::getline(is, line);
  std::vector<LossRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    LossRecord r;
    if (!(row >> r.step >> r.lr >> r.recon >> r.singer >> r.pitch >> r.total >> r.adversary))
      throw FormatError("malformed metrics row in " + path.string());
    out.push_back(r);
  }
  return out;
}

namespace {

constexpr char kStateMagic[8] = {'S', 'V', 'C', 'S', 'T', 'A', 'T', 'E'};
constexpr std::uint32_t kStateVersion = 1;

template <typename V>
void put(std::ostream& os, const V& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& is, const std::filesystem::path& path) {
  V v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(V)))
    throw CorruptionError("truncated train state: " + path.string());
  return v;
}

void put_matrix(std::ostream& os, const FloatMatrix& m) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(m.rows()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(m.cols()));
  os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
}

FloatMatrix get_matrix(std::istream& is, const std::filesystem::path& path) {
  const auto rows = get<std::uint32_t>(is, path);
  const auto cols = get<std::uint32_t>(is, path);
  if (static_cast<std::uint64_t>(rows) * cols > (1ull << 32))
    throw CorruptionError("implausible matrix size in train state: " + path.string());
  FloatMatrix m(rows, cols);
  if (!is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float))))
    throw CorruptionError("truncated train state: " + path.string());
  return m;
}

}  // namespace

void save_train_state(const TrainState& state, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write train state: " + path.string());
  os.write(kStateMagic, sizeof(kStateMagic));
  put(os, kStateVersion);
  put<std::int64_t>(os, state.step);
  put(os, state.base_lr);
  put(os, state.decay);
  put<std::int64_t>(os, state.decay_every);
  put<std::uint64_t>(os, state.rng_seed);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(state.moments.size()));
  for (const auto& [name, m] : state.moments) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::int64_t>(os, m.t);
    put_matrix(os, m.m);
    put_matrix(os, m.v);
  }
  put<std::uint64_t>(os, state.loss_log.size());
  for (const LossRecord& r : state.loss_log) {
    put<std::int64_t>(os, r.step);
    for (double v : {r.lr, r.recon, r.singer, r.pitch, r.total, r.adversary}) put(os, v);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

TrainState load_train_state(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read train state: " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kStateMagic, 8) != 0)
    throw CorruptionError("not a train state file: " + path.string());
  const auto version = get<std::uint32_t>(is, path);
  if (version != kStateVersion) {
    throw VersionError("train state version " + std::to_string(version) +
                       " is not supported by reader version " + std::to_string(kStateVersion));
  }
  TrainState s;
  s.step = get<std::int64_t>(is, path);
  s.base_lr = get<double>(is, path);
  s.decay = get<double>(is, path);
  s.decay_every = get<std::int64_t>(is, path);
  s.rng_seed = get<std::uint64_t>(is, path);
  const auto n = get<std::uint32_t>(is, path);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = get<std::uint32_t>(is, path);
    if (len > 4096) throw CorruptionError("implausible name length in " + path.string());
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw CorruptionError("truncated train state: " + path.string());
    ad::AdamMoments<float> m;
    m.t = get<std::int64_t>(is, path);
    m.m = get_matrix(is, path);
    m.v = get_matrix(is, path);
    s.moments.emplace(std::move(name), std::move(m));
  }
  const auto records = get<std::uint64_t>(is, path);
  for (std::uint64_t i = 0; i < records; ++i) {
    LossRecord r;
    r.step = get<std::int64_t>(is, path);
    r.lr = get<double>(is, path);
    r.recon = get<double>(is, path);
    r.singer = get<double>(is, path);
    r.pitch = get<double>(is, path);
    r.total = get<double>(is, path);
    r.adversary = get<double>(is, path);
    s.loss_log.push_back(r);
  }
  return s;
}

}  // namespace svc
