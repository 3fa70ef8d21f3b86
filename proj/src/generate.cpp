// src/generate.cpp

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

namespace {

using RowVec = Eigen::Matrix<float, 1, Eigen::Dynamic>;

constexpr Eigen::Index kConditionChunk = 4096;

// Sample-by-sample evaluation of the decoder with one ring buffer of past
// layer inputs per dilated layer. Produces the same logits as the
// teacher-forced graph, one time step at a time.
class IncrementalDecoder {
 public:
  IncrementalDecoder(const ModelBundle& bundle, const ConditionSequence& condition)
      : bundle_(bundle), cond_(condition), dilations_(bundle.config().decoder_dilations()) {
    const ModelConfig& cfg = bundle.config();
    if (condition.values.cols() != cfg.condition_dim()) {
      throw ArgumentError("generate: condition width " + std::to_string(condition.values.cols()) +
                          " does not match the model (" + std::to_string(cfg.condition_dim()) + ")");
    }
    r_ = cfg.residual_channels;
    const auto& params = bundle.params();
    for (std::size_t i = 0; i < dilations_.size(); ++i) {
      const std::string base = "dec.l" + std::to_string(i) + ".";
      Layer layer;
      layer.conv = &params.at(base + "conv.w").value;
      layer.conv_b = &params.at(base + "conv.b").value;
      layer.cond = &params.at(base + "cond.w").value;
      layer.skip = &params.at(base + "skip.w").value;
      layer.skip_b = &params.at(base + "skip.b").value;
      if (i + 1 < dilations_.size()) {
        layer.res = &params.at(base + "res.w").value;
        layer.res_b = &params.at(base + "res.b").value;
      }
      layer.history = FloatMatrix::Zero(dilations_[i], r_);
      layers_.push_back(layer);
    }
    in_w_ = &params.at("dec.in.w").value;
    in_b_ = &params.at("dec.in.b").value;
    out1_w_ = &params.at("dec.out1.w").value;
    out1_b_ = &params.at("dec.out1.b").value;
    out2_w_ = &params.at("dec.out2.w").value;
    out2_b_ = &params.at("dec.out2.b").value;
    skip_.resize(cfg.skip_channels);
  }

  const RowVec& step(Eigen::Index t, float previous) {
    if (t >= chunk_start_ + chunk_rows_) load_chunk(t);
    const Eigen::Index local = t - chunk_start_;
    x_ = previous * in_w_->row(0) + in_b_->row(0);
    skip_.setZero();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Layer& l = layers_[i];
      const int d = dilations_[i];
      const Eigen::Index slot = t % d;
      z_ = l.projected.row(local);
      z_.noalias() += x_ * l.conv->bottomRows(r_);
      if (t >= d) z_.noalias() += l.history.row(slot) * l.conv->topRows(r_);
      l.history.row(slot) = x_;
      gate_ = z_.head(r_).array().tanh() * (1.0f + (-z_.tail(r_).array()).exp()).inverse();
      skip_.noalias() += gate_ * (*l.skip);
      skip_ += l.skip_b->row(0);
      if (l.res != nullptr) {
        x_.noalias() += gate_ * (*l.res);
        x_ += l.res_b->row(0);
      }
    }
    h_ = skip_.cwiseMax(0.0f);
    h2_.noalias() = h_ * (*out1_w_);
    h2_ += out1_b_->row(0);
    h2_ = h2_.cwiseMax(0.0f);
    logits_.noalias() = h2_ * (*out2_w_);
    logits_ += out2_b_->row(0);
    return logits_;
  }

 private:
  struct Layer {
    const FloatMatrix* conv = nullptr;
    const FloatMatrix* conv_b = nullptr;
    const FloatMatrix* cond = nullptr;
    const FloatMatrix* skip = nullptr;
    const FloatMatrix* skip_b = nullptr;
    const FloatMatrix* res = nullptr;
    const FloatMatrix* res_b = nullptr;
    FloatMatrix history;
    FloatMatrix projected;  // condition projection + conv bias for the current chunk
  };

  void load_chunk(Eigen::Index t) {
    chunk_start_ = t;
    chunk_rows_ = std::min<Eigen::Index>(kConditionChunk, cond_.values.rows() - t);
    FloatMatrix rows = cond_.values.middleRows(chunk_start_, chunk_rows_);
    const ModelConfig& cfg = bundle_.config();
    if (cfg.pitch_gain != 1.0) rows.col(cfg.latent_dim) *= static_cast<float>(cfg.pitch_gain);
    for (Layer& l : layers_) {
      l.projected.resize(chunk_rows_, 2 * r_);
      l.projected.noalias() = rows * (*l.cond);
      l.projected.rowwise() += l.conv_b->row(0);
    }
  }

  const ModelBundle& bundle_;
  const ConditionSequence& cond_;
  std::vector<int> dilations_;
  std::vector<Layer> layers_;
  int r_ = 0;
  const FloatMatrix* in_w_ = nullptr;
  const FloatMatrix* in_b_ = nullptr;
  const FloatMatrix* out1_w_ = nullptr;
  const FloatMatrix* out1_b_ = nullptr;
  const FloatMatrix* out2_w_ = nullptr;
  const FloatMatrix* out2_b_ = nullptr;
  Eigen::Index chunk_start_ = 0;
  Eigen::Index chunk_rows_ = 0;
  RowVec x_, z_, gate_, skip_, h_, h2_, logits_;
};

int argmax(const RowVec& logits) {
  Eigen::Index best = 0;
  logits.maxCoeff(&best);
  return static_cast<int>(best);
}

int sample_categorical(const RowVec& logits, std::mt19937_64& rng) {
  const float peak = logits.maxCoeff();
  RowVec p = (logits.array() - peak).exp();
  const double total = p.sum();
  // 53-bit uniform in [0, 1), independent of the library's distributions.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * total;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size() - 1);
}

}  // namespace

MuLawStream generate(const ModelBundle& bundle, const ConditionSequence& condition,
                     std::uint64_t seed, Sampling sampling) {
  if (condition.length() == 0) throw ArgumentError("generate: empty condition sequence");
  IncrementalDecoder dec(bundle, condition);
  std::mt19937_64 rng(seed);
  MuLawStream out;
  out.codes.resize(static_cast<std::size_t>(condition.length()));
  float previous = static_cast<float>(mulaw_decode_sample(kSilenceCode));
  for (Eigen::Index t = 0; t < condition.length(); ++t) {
    const RowVec& logits = dec.step(t, previous);
    const int code = sampling == Sampling::kArgmax ? argmax(logits) : sample_categorical(logits, rng);
    out.codes[static_cast<std::size_t>(t)] = static_cast<std::uint8_t>(code);
    previous = static_cast<float>(mulaw_decode_sample(code));
  }
  return out;
}

FloatMatrix incremental_logits(const ModelBundle& bundle, const ConditionSequence& condition,
                               const MuLawStream& forced) {
  if (static_cast<std::size_t>(condition.length()) != forced.size())
    throw ArgumentError("incremental_logits: condition and forced codes differ in length");
  IncrementalDecoder dec(bundle, condition);
  FloatMatrix out(condition.length(), bundle.config().n_classes);
  float previous = static_cast<float>(mulaw_decode_sample(kSilenceCode));
  for (Eigen::Index t = 0; t < condition.length(); ++t) {
    out.row(t) = dec.step(t, previous);
    previous = static_cast<float>(mulaw_decode_sample(forced.codes[static_cast<std::size_t>(t)]));
  }
  return out;
}

}  // namespace svc
