// include/svc/training.hpp

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

#ifndef SVC_TRAINING_HPP_
#define SVC_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "svc/autodiff.hpp"
#include "svc/model.hpp"
#include "svc/pitch.hpp"

namespace svc {

struct LossWeights {
  double lambda = 0.01;  // singer confusion
  double mu = 0.1;       // pitch regression

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

/// Optimisation schedule and data policy.
struct Schedule {
  long long total_steps = 30000;
  int batch_size = 4;
  int segment_length = 4096;
  /// Stride between candidate segment starts; a multiple of the pitch hop.
  int segment_hop = 400;
  double base_lr = 1e-3;
  double decay = 0.98;
  long long decay_every = 1000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Steps before the first backtranslation round; negative selects 2/3 of
  /// total_steps.
  long long warmup_steps = -1;
  bool backtranslation = true;
  long long backtranslation_every = 2000;
  int backtranslation_count = 96;
  int backtranslation_inner_steps = 24;
  bool augment = true;
  long long checkpoint_every = 1000;
  std::uint64_t seed = 1;

  void validate() const;
  long long resolved_warmup() const;
  bool operator==(const Schedule&) const = default;
};

struct RunConfig {
  ModelConfig model;
  LossWeights weights;
  Schedule schedule;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

struct LossRecord {
  long long step = 0;
  double lr = 0;
  double recon = 0;
  double singer = 0;
  double pitch = 0;
  double total = 0;
  double adversary = 0;

  bool operator==(const LossRecord&) const = default;
};

struct TrainState {
  long long step = 0;
  double base_lr = 1e-3;
  double decay = 0.98;
  long long decay_every = 1000;
  std::uint64_t rng_seed = 1;
  std::map<std::string, ad::AdamMoments<float>> moments;
  std::vector<LossRecord> loss_log;

  static TrainState from_schedule(const Schedule& schedule);
};

/// One training item. The encoder reads `encoder_input`; the decoder is
/// taught to reproduce `targets`. They coincide except in backtranslation.
struct TrainingExample {
  std::vector<float> encoder_input;
  MuLawStream targets;
  PitchContour pitch;  // normalized, hop-rate, aligned with targets
  int singer = 0;
};

struct Batch {
  std::vector<TrainingExample> items;

  /// Throws ArgumentError if segment lengths differ or a singer id is invalid.
  void validate(int n_singers) const;
};

// Losses over plain values.
double recon_loss(const FloatMatrix& logits, const MuLawStream& targets);
double singer_conf_loss(std::span<const float> class_logits, int singer);
double pitch_reg_loss(std::span<const double> pred, std::span<const double> target);
double total_loss(double recon, double s_loss, double p_loss, const LossWeights& w);
double adversary_loss(double s_loss, double p_loss, const LossWeights& w);

/// base_lr * decay^floor(step / decay_every).
double lr_at(const TrainState& state);

/// Losses and their graph handles for one batch.
template <typename T>
struct BatchLosses {
  ad::Var recon, singer, pitch;
  double recon_value = 0, singer_value = 0, pitch_value = 0;
};

/// Builds the forward graph of every loss for a batch (batch means of the
/// per-item losses). When `with_decoder` is false only the adversary heads
/// are evaluated and `recon` stays invalid.
template <typename T>
BatchLosses<T> batch_losses(const Network<T>& net, ad::Graph<T>& g, const Batch& batch,
                            bool with_decoder, bool train_mode, std::mt19937_64& rng);

/// Phase 1: one Adam step on L_ad for the classifier and regressor only.
/// Returns L_ad before the update; a no-op returning 0 when both weights are
/// zero. Throws NumericalError before any mutation on a non-finite loss.
double adversary_phase(ModelBundle& bundle, TrainState& state, const Batch& batch,
                       const LossWeights& w, const ad::AdamOptions& adam = {});

struct PhaseLosses {
  double recon = 0, singer = 0, pitch = 0, total = 0;
};

/// Phase 2: one Adam step on L_total for encoder, decoder and embeddings.
/// Returns the losses before the update; same error contract as phase 1.
PhaseLosses model_phase(ModelBundle& bundle, TrainState& state, const Batch& batch,
                        const LossWeights& w, const ad::AdamOptions& adam = {});

struct StepReport {
  LossRecord record;
};

/// Phase 1 updates the classifier and regressor on L_ad; phase 2 updates the
/// encoder, decoder and embeddings on L_total, against the adversaries as
/// updated by phase 1. On a non-finite loss all parameters and optimizer
/// moments are restored and NumericalError is thrown.
StepReport alternating_step(ModelBundle& bundle, TrainState& state, const Batch& batch,
                            const LossWeights& w, const ad::AdamOptions& adam = {});

/// One reconstruction-only update of encoder, decoder and embeddings.
double reconstruction_step(ModelBundle& bundle, TrainState& state, const Batch& batch,
                           const ad::AdamOptions& adam = {});

struct BacktranslationOptions {
  int count = 96;
  int inner_steps = 24;
};

struct BacktranslationReport {
  int generated = 0;
  int steps = 0;
  double mean_recon = 0.0;
};

/// Converts `count` pool segments with mixed embeddings w*v_A + (1-w)*v_B,
/// w ~ U(0, 1), then trains on reconstructing the original segments from the
/// converted audio conditioned on v_A.
BacktranslationReport backtranslate_round(ModelBundle& bundle, TrainState& state,
                                          std::span<const TrainingExample> pool,
                                          const BacktranslationOptions& opts, std::uint64_t seed,
                                          const ad::AdamOptions& adam = {});

/// Metrics CSV header: step,lr,L_recon,L_s,L_p,L_total,L_ad
void write_metrics_csv(std::span<const LossRecord> log, const std::filesystem::path& path);
std::vector<LossRecord> read_metrics_csv(const std::filesystem::path& path);

void save_train_state(const TrainState& state, const std::filesystem::path& path);
TrainState load_train_state(const std::filesystem::path& path);

}  // namespace svc

#endif  // SVC_TRAINING_HPP_
