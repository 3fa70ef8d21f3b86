// include/svc/model.hpp

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

#ifndef SVC_MODEL_HPP_
#define SVC_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "svc/audio.hpp"
#include "svc/autodiff.hpp"
#include "svc/pitch.hpp"

namespace svc {

/// Network shape. Defaults follow the full-size recipe; desk-scale runs
/// shrink the widths and layer counts through config files.
struct ModelConfig {
  int n_singers = 6;
  int embed_dim = 32;
  int latent_dim = 64;
  int encoder_blocks = 3;
  int encoder_layers_per_block = 10;
  int encoder_kernel = 3;
  int decoder_blocks = 4;
  int decoder_layers_per_block = 10;
  int residual_channels = 64;
  int skip_channels = 128;
  int dilation_base = 2;
  int latent_stride = 800;
  int n_classes = 256;
  int adversary_channels = 100;
  int adversary_kernel = 3;
  double dropout_p = 0.2;
  /// Fixed scale on the normalized pitch channel as the decoder reads it.
  double pitch_gain = 1.0;

  /// Throws ArgumentError naming the first offending field.
  void validate() const;
  int condition_dim() const { return latent_dim + 1 + embed_dim; }
  std::vector<int> encoder_dilations() const;
  std::vector<int> decoder_dilations() const;
  /// Number of past targets that can influence one decoder output.
  int receptive_field() const;

  bool operator==(const ModelConfig&) const = default;
};

enum class ParamGroup { kEncoder, kDecoder, kEmbedding, kClassifier, kRegressor };

ParamGroup param_group(const std::string& name);
const char* param_group_name(ParamGroup group);
bool is_adversary(ParamGroup group);

/// Encoder, decoder, singer embedding table, singer classifier and pitch
/// regressor over one parameter set. The graph builders are const: they read
/// parameter values and leave gradients on the graph.
template <typename T>
class Network {
 public:
  using Graph = ad::Graph<T>;
  using Mat = ad::Matrix<T>;

  explicit Network(ModelConfig config, std::uint64_t seed = 0);

  const ModelConfig& config() const { return config_; }
  ad::ParameterSet<T>& params() { return params_; }
  const ad::ParameterSet<T>& params() const { return params_; }

  /// [L x 1] waveform -> [ceil(L / stride) x latent_dim].
  ad::Var encoder(Graph& g, ad::Var waveform) const;
  /// [L x 1] previous-sample amplitudes and [L x cond_dim] conditioning ->
  /// [L x n_classes] logits.
  ad::Var decoder(Graph& g, ad::Var shifted_input, ad::Var condition) const;
  /// [T x latent_dim] -> [1 x n_singers].
  ad::Var classifier(Graph& g, ad::Var latent, bool train, std::mt19937_64* rng) const;
  /// [T x latent_dim] -> [T x 1].
  ad::Var regressor(Graph& g, ad::Var latent, bool train, std::mt19937_64* rng) const;
  /// [1 x embed_dim] row of the lookup table.
  ad::Var embedding(Graph& g, int singer) const;
  /// Column layout [latent | pitch | embedding], one row per audio sample.
  ad::Var condition(Graph& g, ad::Var latent, std::span<const T> pitch_per_sample,
                    ad::Var embedding_row, Eigen::Index audio_length) const;

 private:
  ad::Var p(Graph& g, const std::string& name) const { return g.param(params_.at(name)); }
  ad::Var adversary_trunk(Graph& g, const std::string& prefix, ad::Var latent, bool train,
                          std::mt19937_64* rng) const;
  void init_parameters(std::uint64_t seed);

  ModelConfig config_;
  ad::ParameterSet<T> params_;
};

using ModelBundle = Network<float>;
using FloatMatrix = ad::Matrix<float>;

struct LatentSequence {
  FloatMatrix frames;  // [T_latent x latent_dim]
  int stride = 800;

  Eigen::Index length() const { return frames.rows(); }
};

struct ConditionSequence {
  FloatMatrix values;  // [T_audio x (latent_dim + 1 + embed_dim)]
  int latent_dim = 0;
  int embed_dim = 0;

  Eigen::Index length() const { return values.rows(); }
};

enum class Sampling { kArgmax, kCategorical };

/// Throws InsufficientInputError when the waveform is shorter than one
/// pooling window.
LatentSequence encode(const ModelBundle& bundle, std::span<const float> waveform);

/// Nearest-neighbour latent upsampling, linear pitch upsampling of the
/// normalized contour, embedding broadcast.
ConditionSequence build_condition(const LatentSequence& latent, const PitchContour& pitch,
                                  std::span<const float> embedding, std::size_t audio_length);

/// One-step-shifted causal decoding over known targets; [T x n_classes].
FloatMatrix decode_teacher_forced(const ModelBundle& bundle, const MuLawStream& targets,
                                  const ConditionSequence& condition);

/// Autoregressive sampling; the first input is the decoded silence code.
MuLawStream generate(const ModelBundle& bundle, const ConditionSequence& condition,
                     std::uint64_t seed, Sampling sampling = Sampling::kArgmax);

/// Same recursion as generate(), returning the logits of every step when the
/// emitted codes are forced to `forced` instead of being sampled.
FloatMatrix incremental_logits(const ModelBundle& bundle, const ConditionSequence& condition,
                               const MuLawStream& forced);

std::vector<float> classify_singer(const ModelBundle& bundle, const LatentSequence& latent,
                                   bool train_mode, std::uint64_t seed = 0);
std::vector<float> regress_pitch(const ModelBundle& bundle, const LatentSequence& latent,
                                 bool train_mode, std::uint64_t seed = 0);

std::vector<float> lookup_embedding(const ModelBundle& bundle, int singer);
/// w * a + (1 - w) * b.
std::vector<float> mix_embeddings(std::span<const float> a, std::span<const float> b, double w);

/// Decoder input for teacher forcing: decoded targets delayed by one step,
/// starting from the silence code.
std::vector<float> shifted_decoder_input(const MuLawStream& targets);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void checkpoint_save(const ModelBundle& bundle, const std::filesystem::path& path);
/// Throws VersionError on a version tag other than kCheckpointVersion and
/// CorruptionError on truncation or shape mismatch; never returns a partial
/// bundle.
ModelBundle checkpoint_load(const std::filesystem::path& path);
/// Version the reader accepts; overridable for tests of the version gate.
ModelBundle checkpoint_load(const std::filesystem::path& path, std::uint32_t reader_version);

}  // namespace svc

#endif  // SVC_MODEL_HPP_
