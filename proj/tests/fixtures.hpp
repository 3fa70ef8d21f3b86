// tests/fixtures.hpp

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

// Small corpora and configurations shared by the unit and acceptance tests.

#ifndef SVC_TESTS_FIXTURES_HPP_
#define SVC_TESTS_FIXTURES_HPP_

#include "svc/dataset.hpp"
#include "svc/model.hpp"
#include "svc/training.hpp"

namespace svc::test {

// Two singers with distinct harmonic profiles singing shared melodies.
inline SynthSpec toy_spec(int n_melodies = 2, double note_s = 0.25, std::uint64_t seed = 7) {
  SynthSpec s;
  s.n_singers = 2;
  s.harmonics = {{1.0, 0.6, 0.3, 0.15}, {0.4, 1.0, 0.2, 0.5}};
  const double base[] = {196.0, 220.0, 247.0, 262.0, 294.0, 330.0};
  for (int m = 0; m < n_melodies; ++m) {
    std::vector<Note> notes;
    for (int k = 0; k < 3; ++k) notes.push_back({base[(m + 2 * k) % 6], note_s});
    s.melodies.push_back(notes);
  }
  s.seed = seed;
  return s;
}

// Toy-width network: 2 latent frames per 1600-sample segment.
inline ModelConfig toy_model(int n_singers = 2) {
  ModelConfig c;
  c.n_singers = n_singers;
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

inline RunConfig toy_run(long long steps) {
  RunConfig r;
  r.model = toy_model();
  r.schedule.total_steps = steps;
  r.schedule.batch_size = 2;
  r.schedule.segment_length = 1600;
  r.schedule.segment_hop = 800;
  r.schedule.backtranslation = false;
  r.schedule.checkpoint_every = 0;
  return r;
}

}  // namespace svc::test

#endif  // SVC_TESTS_FIXTURES_HPP_
