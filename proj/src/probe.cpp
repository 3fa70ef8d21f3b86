// src/probe.cpp

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
#include <map>
#include <numeric>

#include "svc/errors.hpp"
#include "svc/evaluation.hpp"
#include "svc/rng.hpp"

namespace svc {

namespace {

using Mat = ad::Matrix<float>;

struct Split {
  std::vector<std::size_t> train, test;
};

Split split_rows(std::size_t n, const ProbeOptions& opts) {
  if (!(opts.test_fraction > 0.0 && opts.test_fraction < 1.0))
    throw ArgumentError("probe test_fraction must be in (0, 1)");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng = derive_rng(opts.seed, 0x5b1);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
  const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(opts.test_fraction * n)));
  if (n_test >= n) throw InsufficientInputError("probe needs more examples");
  Split s;
  s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  return s;
}

// Single global offset and scale from the training rows.
Mat rescale(const Mat& x, const std::vector<std::size_t>& train) {
  double sum = 0.0, sq = 0.0;
  for (std::size_t r : train) {
    const auto row = x.row(static_cast<Eigen::Index>(r));
    sum += row.cast<double>().sum();
    sq += row.cast<double>().squaredNorm();
  }
  const double count = static_cast<double>(train.size() * static_cast<std::size_t>(x.cols()));
  const double mean = sum / count;
  const double sd = std::sqrt(std::max(sq / count - mean * mean, 1e-12));
  return ((x.array() - static_cast<float>(mean)) / static_cast<float>(sd)).matrix();
}

Mat gather(const Mat& x, const std::vector<std::size_t>& rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

// Two-layer perceptron trained with Adam on random minibatches.
class Mlp {
 public:
  Mlp(Eigen::Index in, int hidden, int out, std::uint64_t seed) {
    std::mt19937_64 rng = derive_rng(seed, 0x31a);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto init = [&](ad::Parameter<float>& p, double sd) {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<float>(sd * gauss(rng));
    };
    init(params_.add("w1", in, hidden), 1.0 / std::sqrt(static_cast<double>(in)));
    params_.add("b1", 1, hidden).value.setZero();
    init(params_.add("w2", hidden, out), 1.0 / std::sqrt(static_cast<double>(hidden)));
    params_.add("b2", 1, out).value.setZero();
  }

  ad::Var forward(ad::Graph<float>& g, Mat x) const {
    ad::Var h = g.relu(g.linear(g.constant(std::move(x)), g.param(params_.at("w1")), g.param(params_.at("b1"))));
    return g.linear(h, g.param(params_.at("w2")), g.param(params_.at("b2")));
  }

  template <typename LossFn>
  void fit(const Mat& x, const ProbeOptions& opts, LossFn loss) {
    std::mt19937_64 rng = derive_rng(opts.seed, 0x7a1);
    const auto n = static_cast<std::size_t>(x.rows());
    const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(std::max(opts.batch, 1)), n);
    for (int step = 0; step < opts.steps; ++step) {
      std::vector<std::size_t> rows(bs);
      for (auto& r : rows) r = uniform_index(rng, n);
      ad::Graph<float> g;
      ad::Var out = forward(g, gather(x, rows));
      g.backward(loss(g, out, rows));
      params_.zero_grad();
      g.accumulate_grads(params_);
      for (auto& p : params_) ad::adam_update(p, moments_[p.name], opts.lr, {});
    }
  }

  Mat predict(const Mat& x) const {
    ad::Graph<float> g;
    return g.value(forward(g, x));
  }

 private:
  ad::ParameterSet<float> params_;
  std::map<std::string, ad::AdamMoments<float>> moments_;
};

void check_rows(const FloatMatrix& features, std::size_t n) {
  if (static_cast<std::size_t>(features.rows()) != n)
    throw ArgumentError("probe: " + std::to_string(features.rows()) + " feature rows vs " + std::to_string(n) + " labels");
  if (n < 4) throw InsufficientInputError("probe needs at least 4 examples");
}

}  // namespace

double probe_accuracy(const FloatMatrix& features, std::span<const int> labels, int n_classes,
                      const ProbeOptions& opts) {
  check_rows(features, labels.size());
  for (int l : labels)
    if (l < 0 || l >= n_classes) throw ArgumentError("probe label out of range");
  const Split split = split_rows(labels.size(), opts);
  const Mat x = rescale(features, split.train);
  const Mat xtrain = gather(x, split.train);
  Mlp mlp(x.cols(), opts.hidden, n_classes, opts.seed);
  mlp.fit(xtrain, opts, [&](ad::Graph<float>& g, ad::Var out, const std::vector<std::size_t>& rows) {
    std::vector<int> t(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) t[i] = labels[split.train[rows[i]]];
    return g.softmax_cross_entropy(out, t);
  });
  const Mat pred = mlp.predict(gather(x, split.test));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    Eigen::Index arg = 0;
    pred.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
    if (static_cast<int>(arg) == labels[split.test[i]]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.test.size());
}

double probe_mse(const FloatMatrix& features, std::span<const double> targets, const ProbeOptions& opts) {
  check_rows(features, targets.size());
  const Split split = split_rows(targets.size(), opts);
  const Mat x = rescale(features, split.train);
  const Mat xtrain = gather(x, split.train);
  Mlp mlp(x.cols(), opts.hidden, 1, opts.seed);
  mlp.fit(xtrain, opts, [&](ad::Graph<float>& g, ad::Var out, const std::vector<std::size_t>& rows) {
    std::vector<float> t(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) t[i] = static_cast<float>(targets[split.train[rows[i]]]);
    return g.mse(out, t);
  });
  const Mat pred = mlp.predict(gather(x, split.test));
  double acc = 0.0;
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    const double d = pred(static_cast<Eigen::Index>(i), 0) - targets[split.test[i]];
    acc += d * d;
  }
  return acc / static_cast<double>(split.test.size());
}

FloatMatrix spectral_features(const AudioClip& clip, int frame, int first_bin, int bins) {
  if (frame <= 0 || first_bin < 0 || bins <= 0 || first_bin + bins > frame / 2 + 1)
    throw ArgumentError("spectral_features: bad frame/bin layout");
  const std::size_t n = clip.samples.size();
  const auto frames = static_cast<Eigen::Index>((n + static_cast<std::size_t>(frame) - 1) / static_cast<std::size_t>(frame));
  std::vector<double> window(static_cast<std::size_t>(frame));
  for (int i = 0; i < frame; ++i) window[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / frame);
  std::vector<double> cosv(static_cast<std::size_t>(frame)), sinv(static_cast<std::size_t>(frame));
  for (int i = 0; i < frame; ++i) {
    cosv[static_cast<std::size_t>(i)] = std::cos(2.0 * M_PI * i / frame);
    sinv[static_cast<std::size_t>(i)] = std::sin(2.0 * M_PI * i / frame);
  }
  FloatMatrix out(frames, bins);
  std::vector<double> x(static_cast<std::size_t>(frame));
  for (Eigen::Index f = 0; f < frames; ++f) {
    for (int i = 0; i < frame; ++i) {
      const std::size_t src = static_cast<std::size_t>(f) * static_cast<std::size_t>(frame) + static_cast<std::size_t>(i);
      x[static_cast<std::size_t>(i)] = src < n ? clip.samples[src] * window[static_cast<std::size_t>(i)] : 0.0;
    }
    for (int b = 0; b < bins; ++b) {
      const int k = first_bin + b;
      double re = 0.0, im = 0.0;
      for (int i = 0; i < frame; ++i) {
        const auto idx = static_cast<std::size_t>((static_cast<long>(k) * i) % frame);
        re += x[static_cast<std::size_t>(i)] * cosv[idx];
        im -= x[static_cast<std::size_t>(i)] * sinv[idx];
      }
      out(f, b) = static_cast<float>(std::log(re * re + im * im + 1e-10));
    }
  }
  return out;
}

ProbeSet build_probe_set(const ModelBundle& bundle, const Corpus& corpus) {
  const int stride = bundle.config().latent_stride;
  if (stride % kPitchHop != 0) throw ArgumentError("probe set needs a latent stride that is a multiple of 100");
  const std::size_t per = static_cast<std::size_t>(stride / kPitchHop);
  std::vector<std::vector<float>> lat_rows, spec_rows;
  ProbeSet set;
  for (const CorpusClip& clip : corpus.clips) {
    const PitchContour hz = clip.truth ? *clip.truth : extract_pitch(clip.audio);
    const std::vector<double> targets = downsample_to_latent(normalize_pitch(hz), stride);
    const LatentSequence lat = encode(bundle, clip.audio.samples);
    const FloatMatrix spec = spectral_features(clip.audio, stride);
    // Only full windows whose pitch frames are all voiced.
    const std::size_t full = clip.audio.size() / static_cast<std::size_t>(stride);
    for (std::size_t w = 0; w < full && w < targets.size(); ++w) {
      bool voiced = true;
      for (std::size_t k = w * per; k < (w + 1) * per; ++k) voiced = voiced && k < hz.size() && hz.voiced[k];
      if (!voiced) continue;
      const auto r = static_cast<Eigen::Index>(w);
      lat_rows.emplace_back(lat.frames.row(r).data(), lat.frames.row(r).data() + lat.frames.cols());
      spec_rows.emplace_back(spec.row(r).data(), spec.row(r).data() + spec.cols());
      set.singer.push_back(clip.singer);
      set.pitch.push_back(targets[w]);
    }
  }
  if (lat_rows.empty()) throw InsufficientInputError("no fully voiced latent windows in corpus");
  auto pack = [](const std::vector<std::vector<float>>& rows) {
    FloatMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      m.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const ad::RowVector<float>>(rows[i].data(), static_cast<Eigen::Index>(rows[i].size()));
    return m;
  };
  set.latent = pack(lat_rows);
  set.spectral = pack(spec_rows);
  return set;
}

ProbeReport run_probes(const ModelBundle& bundle, const Corpus& corpus, const ProbeOptions& opts) {
  const ProbeSet set = build_probe_set(bundle, corpus);
  ProbeReport r;
  r.examples = set.singer.size();
  const int n = bundle.config().n_singers;
  r.latent_singer_accuracy = probe_accuracy(set.latent, set.singer, n, opts);
  r.spectral_singer_accuracy = probe_accuracy(set.spectral, set.singer, n, opts);
  r.latent_pitch_mse = probe_mse(set.latent, set.pitch, opts);
  r.spectral_pitch_mse = probe_mse(set.spectral, set.pitch, opts);
  return r;
}

}  // namespace svc
