// src/config.cpp

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

#include "svc/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "svc/errors.hpp"
#include "json_fields.hpp"

namespace svc {

using nlohmann::json;

namespace {

json model_to(const ModelConfig& c) {
  return json{{"n_singers", c.n_singers},
              {"embed_dim", c.embed_dim},
              {"latent_dim", c.latent_dim},
              {"encoder_blocks", c.encoder_blocks},
              {"encoder_layers_per_block", c.encoder_layers_per_block},
              {"encoder_kernel", c.encoder_kernel},
              {"decoder_blocks", c.decoder_blocks},
              {"decoder_layers_per_block", c.decoder_layers_per_block},
              {"residual_channels", c.residual_channels},
              {"skip_channels", c.skip_channels},
              {"dilation_base", c.dilation_base},
              {"latent_stride", c.latent_stride},
              {"n_classes", c.n_classes},
              {"adversary_channels", c.adversary_channels},
              {"adversary_kernel", c.adversary_kernel},
              {"dropout_p", c.dropout_p},
              {"pitch_gain", c.pitch_gain}};
}

ModelConfig model_from(const json& j) {
  ModelConfig c;
  FieldReader r(j, "model");
  r.get("n_singers", c.n_singers);
  r.get("embed_dim", c.embed_dim);
  r.get("latent_dim", c.latent_dim);
  r.get("encoder_blocks", c.encoder_blocks);
  r.get("encoder_layers_per_block", c.encoder_layers_per_block);
  r.get("encoder_kernel", c.encoder_kernel);
  r.get("decoder_blocks", c.decoder_blocks);
  r.get("decoder_layers_per_block", c.decoder_layers_per_block);
  r.get("residual_channels", c.residual_channels);
  r.get("skip_channels", c.skip_channels);
  r.get("dilation_base", c.dilation_base);
  r.get("latent_stride", c.latent_stride);
  r.get("n_classes", c.n_classes);
  r.get("adversary_channels", c.adversary_channels);
  r.get("adversary_kernel", c.adversary_kernel);
  r.get("dropout_p", c.dropout_p);
  r.get("pitch_gain", c.pitch_gain);
  r.finish();
  return c;
}

json weights_to(const LossWeights& w) { return json{{"lambda", w.lambda}, {"mu", w.mu}}; }

LossWeights weights_from(const json& j) {
  LossWeights w;
  FieldReader r(j, "weights");
  r.get("lambda", w.lambda);
  r.get("mu", w.mu);
  r.finish();
  return w;
}

json schedule_to(const Schedule& s) {
  return json{{"total_steps", s.total_steps},
              {"batch_size", s.batch_size},
              {"segment_length", s.segment_length},
              {"segment_hop", s.segment_hop},
              {"base_lr", s.base_lr},
              {"decay", s.decay},
              {"decay_every", s.decay_every},
              {"adam_beta1", s.adam_beta1},
              {"adam_beta2", s.adam_beta2},
              {"adam_eps", s.adam_eps},
              {"warmup_steps", s.warmup_steps},
              {"backtranslation", s.backtranslation},
              {"backtranslation_every", s.backtranslation_every},
              {"backtranslation_count", s.backtranslation_count},
              {"backtranslation_inner_steps", s.backtranslation_inner_steps},
              {"augment", s.augment},
              {"checkpoint_every", s.checkpoint_every},
              {"seed", s.seed}};
}

Schedule schedule_from(const json& j) {
  Schedule s;
  FieldReader r(j, "schedule");
  r.get("total_steps", s.total_steps);
  r.get("batch_size", s.batch_size);
  r.get("segment_length", s.segment_length);
  r.get("segment_hop", s.segment_hop);
  r.get("base_lr", s.base_lr);
  r.get("decay", s.decay);
  r.get("decay_every", s.decay_every);
  r.get("adam_beta1", s.adam_beta1);
  r.get("adam_beta2", s.adam_beta2);
  r.get("adam_eps", s.adam_eps);
  r.get("warmup_steps", s.warmup_steps);
  r.get("backtranslation", s.backtranslation);
  r.get("backtranslation_every", s.backtranslation_every);
  r.get("backtranslation_count", s.backtranslation_count);
  r.get("backtranslation_inner_steps", s.backtranslation_inner_steps);
  r.get("augment", s.augment);
  r.get("checkpoint_every", s.checkpoint_every);
  r.get("seed", s.seed);
  r.finish();
  return s;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) { return model_to(cfg).dump(2); }

ModelConfig model_config_from_json(const std::string& text) {
  ModelConfig c = model_from(parse_json(text, "model config"));
  c.validate();
  return c;
}

std::string run_config_to_json(const RunConfig& cfg) {
  return json{{"model", model_to(cfg.model)},
              {"weights", weights_to(cfg.weights)},
              {"schedule", schedule_to(cfg.schedule)}}
      .dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
  const json j = parse_json(text, "run config");
  RunConfig c;
  FieldReader r(j, "");
  if (const json* m = r.object("model")) c.model = model_from(*m);
  if (const json* w = r.object("weights")) c.weights = weights_from(*w);
  if (const json* s = r.object("schedule")) c.schedule = schedule_from(*s);
  r.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return run_config_from_json(ss.str());
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write config: " + path.string());
  os << run_config_to_json(cfg) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace svc
