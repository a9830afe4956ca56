// SPDX-License-Identifier: Apache-2.0
//
// Small models and inputs shared by the unit tests.
#pragma once

#include <cstdint>
#include <random>

#include "acstep/lm.hpp"
#include "acstep/model.hpp"
#include "acstep/optim.hpp"

namespace acstep::fixture {

/// Narrow three-layer pyramid with two decoder heads (w = 0, 1).
inline ModelConfig tiny_config(std::size_t labels = 4, bool bidirectional = false) {
  ModelConfig c;
  c.encoder.input_dim = 3;
  c.encoder.units = 5;
  c.encoder.bidirectional = bidirectional;
  c.halting.channels = 4;
  c.decoder.units = 6;
  c.decoder.embed_dim = 3;
  c.decoder.context_dim = c.encoder.output_dim();
  c.decoder.vocab_size = labels + 4;
  c.decoder.windows = {0, 1};
  return c;
}

/// Random weights; the halting output bias is set so that activations sit
/// near sigmoid(bias).
inline AcsModel tiny_model(std::uint64_t seed, double halting_bias = 0.4, std::size_t labels = 4,
                           bool bidirectional = false) {
  AcsModel m = AcsModel::create(tiny_config(labels, bidirectional), 0.8, seed);
  for (double& v : m.params.value("halting/proj_w").data()) v *= 0.25;
  m.params.value("halting/proj_b")[0] = halting_bias;
  return m;
}

inline LanguageModel tiny_lm(std::uint64_t seed, std::size_t labels = 4) {
  LmConfig c;
  c.units = 5;
  c.embed_dim = 3;
  c.vocab_size = labels + 4;
  LanguageModel lm(c);
  init_uniform(lm.params, -1.0, 1.0, seed);
  return lm;
}

inline FrameSequence random_frames(std::uint64_t seed, std::size_t length, std::size_t dim = 3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  FrameSequence f;
  f.id = "u" + std::to_string(seed);
  for (std::size_t t = 0; t < length; ++t) {
    DenseArray x = DenseArray::zeros(dim);
    for (double& v : x.data()) v = n(rng);
    f.frames.push_back(std::move(x));
  }
  return f;
}

}  // namespace acstep::fixture
