// src/model.cpp

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

#include "svc/errors.hpp"
#include "svc/model.hpp"

namespace svc {

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
  auto positive = [](int v, const char* field) {
    if (v <= 0) throw ArgumentError(std::string("config field '") + field + "' must be positive");
  };
  positive(n_singers, "n_singers");
  positive(embed_dim, "embed_dim");
  positive(latent_dim, "latent_dim");
  positive(encoder_blocks, "encoder_blocks");
  positive(encoder_layers_per_block, "encoder_layers_per_block");
  positive(encoder_kernel, "encoder_kernel");
  positive(decoder_blocks, "decoder_blocks");
  positive(decoder_layers_per_block, "decoder_layers_per_block");
  positive(residual_channels, "residual_channels");
  positive(skip_channels, "skip_channels");
  positive(dilation_base, "dilation_base");
  positive(latent_stride, "latent_stride");
  positive(n_classes, "n_classes");
  positive(adversary_channels, "adversary_channels");
  positive(adversary_kernel, "adversary_kernel");
  if (encoder_kernel % 2 == 0) throw ArgumentError("config field 'encoder_kernel' must be odd");
  if (adversary_kernel % 2 == 0) throw ArgumentError("config field 'adversary_kernel' must be odd");
  if (n_classes != 256) throw ArgumentError("config field 'n_classes' must be 256 (8-bit mu-law)");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0))
    throw ArgumentError("config field 'dropout_p' must be in [0, 1)");
  if (!(pitch_gain > 0.0 && std::isfinite(pitch_gain)))
    throw ArgumentError("config field 'pitch_gain' must be positive");
}

namespace {

std::vector<int> dilation_schedule(int blocks, int layers, int base) {
  std::vector<int> d;
  for (int b = 0; b < blocks; ++b) {
    long long v = 1;
    for (int l = 0; l < layers; ++l) {
      d.push_back(static_cast<int>(v));
      v *= base;
    }
  }
  return d;
}

}  // namespace

std::vector<int> ModelConfig::encoder_dilations() const {
  return dilation_schedule(encoder_blocks, encoder_layers_per_block, dilation_base);
}

std::vector<int> ModelConfig::decoder_dilations() const {
  return dilation_schedule(decoder_blocks, decoder_layers_per_block, dilation_base);
}

int ModelConfig::receptive_field() const {
  int rf = 1;
  for (int d : decoder_dilations()) rf += d;  // kernel 2: one extra tap per layer
  return rf;
}

ParamGroup param_group(const std::string& name) {
  if (name.rfind("enc.", 0) == 0) return ParamGroup::kEncoder;
  if (name.rfind("dec.", 0) == 0) return ParamGroup::kDecoder;
  if (name.rfind("emb.", 0) == 0) return ParamGroup::kEmbedding;
  if (name.rfind("cls.", 0) == 0) return ParamGroup::kClassifier;
  if (name.rfind("reg.", 0) == 0) return ParamGroup::kRegressor;
  throw ConsistencyError("parameter outside any group: " + name);
}

const char* param_group_name(ParamGroup group) {
  switch (group) {
    case ParamGroup::kEncoder: return "encoder";
    case ParamGroup::kDecoder: return "decoder";
    case ParamGroup::kEmbedding: return "embedding";
    case ParamGroup::kClassifier: return "classifier";
    case ParamGroup::kRegressor: return "regressor";
  }
  return "?";
}

bool is_adversary(ParamGroup group) {
  return group == ParamGroup::kClassifier || group == ParamGroup::kRegressor;
}

// ---------------------------------------------------------------------------
// Network

namespace {

std::string layer_name(const char* prefix, std::size_t i, const char* leaf) {
  return std::string(prefix) + ".l" + std::to_string(i) + "." + leaf;
}

}  // namespace

template <typename T>
Network<T>::Network(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  const int r = config_.residual_channels;
  const int s = config_.skip_channels;
  const int a = config_.adversary_channels;
  const int ka = config_.adversary_kernel;

  params_.add("enc.in.w", 1, r);
  params_.add("enc.in.b", 1, r);
  const auto enc = config_.encoder_dilations();
  for (std::size_t i = 0; i < enc.size(); ++i) {
    params_.add(layer_name("enc", i, "conv.w"), config_.encoder_kernel * r, r);
    params_.add(layer_name("enc", i, "conv.b"), 1, r);
    params_.add(layer_name("enc", i, "proj.w"), r, r);
    params_.add(layer_name("enc", i, "proj.b"), 1, r);
  }
  params_.add("enc.out.w", r, config_.latent_dim);
  params_.add("enc.out.b", 1, config_.latent_dim);

  params_.add("dec.in.w", 1, r);
  params_.add("dec.in.b", 1, r);
  const auto dec = config_.decoder_dilations();
  for (std::size_t i = 0; i < dec.size(); ++i) {
    params_.add(layer_name("dec", i, "conv.w"), 2 * r, 2 * r);
    params_.add(layer_name("dec", i, "conv.b"), 1, 2 * r);
    params_.add(layer_name("dec", i, "cond.w"), config_.condition_dim(), 2 * r);
    params_.add(layer_name("dec", i, "skip.w"), r, s);
    params_.add(layer_name("dec", i, "skip.b"), 1, s);
    if (i + 1 < dec.size()) {
      params_.add(layer_name("dec", i, "res.w"), r, r);
      params_.add(layer_name("dec", i, "res.b"), 1, r);
    }
  }
  params_.add("dec.out1.w", s, s);
  params_.add("dec.out1.b", 1, s);
  params_.add("dec.out2.w", s, config_.n_classes);
  params_.add("dec.out2.b", 1, config_.n_classes);

  params_.add("emb.table", config_.n_singers, config_.embed_dim);

  for (const char* head : {"cls", "reg"}) {
    const std::string h(head);
    params_.add(h + ".conv1.w", ka * config_.latent_dim, a);
    params_.add(h + ".conv1.b", 1, a);
    params_.add(h + ".conv2.w", ka * a, a);
    params_.add(h + ".conv2.b", 1, a);
  }
  params_.add("cls.fc.w", a, config_.n_singers);
  params_.add("cls.fc.b", 1, config_.n_singers);
  params_.add("reg.fc.w", a, 1);
  params_.add("reg.fc.b", 1, 1);

  init_parameters(seed);
}

template <typename T>
void Network<T>::init_parameters(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& prm : params_) {
    const std::string& n = prm.name;
    const bool bias = n.size() >= 2 && n.compare(n.size() - 2, 2, ".b") == 0;
    if (bias) continue;  // zero
    double stddev = 1.0 / std::sqrt(static_cast<double>(prm.value.rows()));
    if (n == "emb.table") stddev = 1.0;
    // Keep residual streams close to identity at initialisation.
    if (n.find(".proj.w") != std::string::npos || n.find(".res.w") != std::string::npos)
      stddev *= 0.5;
    if (n == "dec.out2.w") stddev *= 0.1;
    for (Eigen::Index i = 0; i < prm.value.size(); ++i)
      prm.value.data()[i] = static_cast<T>(stddev * normal(rng));
  }
}

template <typename T>
ad::Var Network<T>::encoder(Graph& g, ad::Var waveform) const {
  const Mat& w = g.value(waveform);
  if (w.cols() != 1) throw ConsistencyError("encoder: waveform must be a column");
  if (w.rows() < config_.latent_stride) {
    throw InsufficientInputError("encode: waveform of " + std::to_string(w.rows()) +
                                 " samples is shorter than one pooling window (" +
                                 std::to_string(config_.latent_stride) + ")");
  }
  ad::Var x = g.linear(waveform, p(g, "enc.in.w"), p(g, "enc.in.b"));
  const auto dil = config_.encoder_dilations();
  for (std::size_t i = 0; i < dil.size(); ++i) {
    ad::Var h = g.relu(x);
    h = g.conv1d(h, p(g, layer_name("enc", i, "conv.w")), p(g, layer_name("enc", i, "conv.b")),
                 config_.encoder_kernel, dil[i], ad::Padding::kSame);
    h = g.relu(h);
    h = g.linear(h, p(g, layer_name("enc", i, "proj.w")), p(g, layer_name("enc", i, "proj.b")));
    x = g.add(x, h);
  }
  ad::Var out = g.linear(x, p(g, "enc.out.w"), p(g, "enc.out.b"));
  return g.tanh(g.avg_pool(out, config_.latent_stride));
}

template <typename T>
ad::Var Network<T>::decoder(Graph& g, ad::Var shifted_input, ad::Var condition) const {
  const Mat& in = g.value(shifted_input);
  const Mat& cond = g.value(condition);
  if (in.cols() != 1 || cond.rows() != in.rows() || cond.cols() != config_.condition_dim()) {
    throw ArgumentError("decoder: condition has " + std::to_string(cond.rows()) + "x" +
                        std::to_string(cond.cols()) + " entries for " +
                        std::to_string(in.rows()) + " samples");
  }
  if (config_.pitch_gain != 1.0)
    condition = g.scale_column(condition, config_.latent_dim, static_cast<T>(config_.pitch_gain));
  ad::Var x = g.linear(shifted_input, p(g, "dec.in.w"), p(g, "dec.in.b"));
  ad::Var skip;
  const auto dil = config_.decoder_dilations();
  for (std::size_t i = 0; i < dil.size(); ++i) {
    ad::Var z = g.conv1d(x, p(g, layer_name("dec", i, "conv.w")),
                         p(g, layer_name("dec", i, "conv.b")), 2, dil[i], ad::Padding::kCausal);
    z = g.add(z, g.matmul(condition, p(g, layer_name("dec", i, "cond.w"))));
    ad::Var gate = g.gated(z);
    ad::Var s = g.linear(gate, p(g, layer_name("dec", i, "skip.w")),
                         p(g, layer_name("dec", i, "skip.b")));
    skip = skip.valid() ? g.add(skip, s) : s;
    if (i + 1 < dil.size()) {
      x = g.add(x, g.linear(gate, p(g, layer_name("dec", i, "res.w")),
                            p(g, layer_name("dec", i, "res.b"))));
    }
  }
  ad::Var h = g.relu(skip);
  h = g.relu(g.linear(h, p(g, "dec.out1.w"), p(g, "dec.out1.b")));
  return g.linear(h, p(g, "dec.out2.w"), p(g, "dec.out2.b"));
}

template <typename T>
ad::Var Network<T>::adversary_trunk(Graph& g, const std::string& prefix, ad::Var latent,
                                    bool train, std::mt19937_64* rng) const {
  if (g.value(latent).rows() == 0) throw ArgumentError("adversary: empty latent sequence");
  ad::Var x = latent;
  if (train) {
    if (rng == nullptr) throw ConsistencyError("adversary: train mode needs an RNG");
    x = g.dropout(x, static_cast<T>(config_.dropout_p), *rng);
  }
  const int k = config_.adversary_kernel;
  x = g.relu(g.conv1d(x, p(g, prefix + ".conv1.w"), p(g, prefix + ".conv1.b"), k, 1,
                      ad::Padding::kSame));
  x = g.relu(g.conv1d(x, p(g, prefix + ".conv2.w"), p(g, prefix + ".conv2.b"), k, 1,
                      ad::Padding::kSame));
  return x;
}

template <typename T>
ad::Var Network<T>::classifier(Graph& g, ad::Var latent, bool train, std::mt19937_64* rng) const {
  ad::Var x = adversary_trunk(g, "cls", latent, train, rng);
  return g.linear(g.mean_rows(x), p(g, "cls.fc.w"), p(g, "cls.fc.b"));
}

template <typename T>
ad::Var Network<T>::regressor(Graph& g, ad::Var latent, bool train, std::mt19937_64* rng) const {
  ad::Var x = adversary_trunk(g, "reg", latent, train, rng);
  return g.linear(x, p(g, "reg.fc.w"), p(g, "reg.fc.b"));
}

template <typename T>
ad::Var Network<T>::embedding(Graph& g, int singer) const {
  if (singer < 0 || singer >= config_.n_singers) {
    throw ArgumentError("singer id " + std::to_string(singer) + " out of range; valid ids: 0.." +
                        std::to_string(config_.n_singers - 1));
  }
  return g.select_row(p(g, "emb.table"), singer);
}

template <typename T>
ad::Var Network<T>::condition(Graph& g, ad::Var latent, std::span<const T> pitch_per_sample,
                              ad::Var embedding_row, Eigen::Index audio_length) const {
  if (static_cast<Eigen::Index>(pitch_per_sample.size()) != audio_length) {
    throw ConsistencyError("condition: pitch covers " + std::to_string(pitch_per_sample.size()) +
                           " samples, audio has " + std::to_string(audio_length));
  }
  if (g.value(latent).cols() != config_.latent_dim || g.value(embedding_row).cols() != config_.embed_dim)
    throw ConsistencyError("condition: latent or embedding width does not match the config");
  ad::Var up = g.upsample_nearest(latent, config_.latent_stride, audio_length);
  Mat pitch(audio_length, 1);
  for (Eigen::Index i = 0; i < audio_length; ++i) pitch(i, 0) = pitch_per_sample[i];
  const ad::Var parts[] = {up, g.constant(std::move(pitch)), g.broadcast_rows(embedding_row, audio_length)};
  return g.concat_cols(parts);
}

template class Network<float>;
template class Network<double>;

// ---------------------------------------------------------------------------
// Inference-side API

namespace {

using FGraph = ad::Graph<float>;

ad::Var column(FGraph& g, std::span<const float> v) {
  FloatMatrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return g.constant(std::move(m));
}

std::vector<float> row_to_vector(const FloatMatrix& m) {
  return std::vector<float>(m.data(), m.data() + m.size());
}

}  // namespace

LatentSequence encode(const ModelBundle& bundle, std::span<const float> waveform) {
  FGraph g;
  ad::Var lat = bundle.encoder(g, column(g, waveform));
  return LatentSequence{g.value(lat), bundle.config().latent_stride};
}

ConditionSequence build_condition(const LatentSequence& latent, const PitchContour& pitch,
                                  std::span<const float> embedding, std::size_t audio_length) {
  if (!pitch.normalized) throw ArgumentError("build_condition: pitch contour must be normalized");
  const auto needed = (audio_length + latent.stride - 1) / latent.stride;
  if (static_cast<std::size_t>(latent.length()) < needed) {
    throw ConsistencyError("build_condition: " + std::to_string(latent.length()) +
                           " latent frames cannot cover " + std::to_string(audio_length) + " samples");
  }
  const std::vector<double> up = upsample_linear(pitch, audio_length);
  if (up.size() != audio_length) throw ConsistencyError("build_condition: pitch length mismatch");

  const Eigen::Index n = static_cast<Eigen::Index>(audio_length);
  const Eigen::Index ld = latent.frames.cols();
  const Eigen::Index ed = static_cast<Eigen::Index>(embedding.size());
  ConditionSequence c;
  c.latent_dim = static_cast<int>(ld);
  c.embed_dim = static_cast<int>(ed);
  c.values.resize(n, ld + 1 + ed);
  for (Eigen::Index i = 0; i < n; ++i) {
    c.values.row(i).head(ld) = latent.frames.row(i / latent.stride);
    c.values(i, ld) = static_cast<float>(up[static_cast<std::size_t>(i)]);
    for (Eigen::Index e = 0; e < ed; ++e) c.values(i, ld + 1 + e) = embedding[e];
  }
  return c;
}

std::vector<float> shifted_decoder_input(const MuLawStream& targets) {
  std::vector<float> in(targets.size());
  if (in.empty()) return in;
  in[0] = static_cast<float>(mulaw_decode_sample(kSilenceCode));
  for (std::size_t t = 1; t < in.size(); ++t)
    in[t] = static_cast<float>(mulaw_decode_sample(targets.codes[t - 1]));
  return in;
}

FloatMatrix decode_teacher_forced(const ModelBundle& bundle, const MuLawStream& targets,
                                  const ConditionSequence& condition) {
  if (static_cast<std::size_t>(condition.length()) != targets.size()) {
    throw ArgumentError("decode_teacher_forced: " + std::to_string(condition.length()) +
                        " condition rows for " + std::to_string(targets.size()) + " targets");
  }
  FGraph g;
  const std::vector<float> in = shifted_decoder_input(targets);
  ad::Var logits = bundle.decoder(g, column(g, in), g.constant(condition.values));
  return g.value(logits);
}

std::vector<float> classify_singer(const ModelBundle& bundle, const LatentSequence& latent,
                                   bool train_mode, std::uint64_t seed) {
  FGraph g;
  std::mt19937_64 rng(seed);
  ad::Var out = bundle.classifier(g, g.constant(latent.frames), train_mode, &rng);
  return row_to_vector(g.value(out));
}

std::vector<float> regress_pitch(const ModelBundle& bundle, const LatentSequence& latent,
                                 bool train_mode, std::uint64_t seed) {
  FGraph g;
  std::mt19937_64 rng(seed);
  ad::Var out = bundle.regressor(g, g.constant(latent.frames), train_mode, &rng);
  return row_to_vector(g.value(out));
}

std::vector<float> lookup_embedding(const ModelBundle& bundle, int singer) {
  const int n = bundle.config().n_singers;
  if (singer < 0 || singer >= n) {
    throw ArgumentError("singer id " + std::to_string(singer) + " out of range; valid ids: 0.." +
                        std::to_string(n - 1));
  }
  const auto& table = bundle.params().at("emb.table").value;
  return row_to_vector(table.row(singer));
}

std::vector<float> mix_embeddings(std::span<const float> a, std::span<const float> b, double w) {
  if (a.size() != b.size()) throw ArgumentError("mix_embeddings: size mismatch");
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    out[i] = static_cast<float>(w * a[i] + (1.0 - w) * b[i]);
  return out;
}

}  // namespace svc
