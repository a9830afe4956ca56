// SPDX-License-Identifier: Apache-2.0
#include "acstep/model.hpp"

#include "acstep/errors.hpp"
#include "acstep/optim.hpp"

namespace acstep {

void ModelConfig::validate() const {
  encoder.validate();
  halting.validate();
  decoder.validate();
  if (decoder.context_dim != encoder.output_dim()) {
    throw ConfigError("decoder context dimension " + std::to_string(decoder.context_dim) +
                      " does not match encoder output " + std::to_string(encoder.output_dim()));
  }
}

AcsModel::AcsModel(const ModelConfig& cfg) : config(cfg) {
  config.validate();
  add_encoder_params(params, config.encoder);
  add_halting_params(params, config.halting, config.encoder.output_dim());
  add_decoder_params(params, config.decoder);
}

AcsModel AcsModel::create(const ModelConfig& cfg, double init_range, std::uint64_t seed) {
  AcsModel m(cfg);
  init_uniform(m.params, -init_range, init_range, seed);
  return m;
}

const DecoderHead& ModelBinding::head(std::size_t window) const {
  auto it = heads.find(window);
  if (it == heads.end()) throw ConfigError("no decoder head for window " + std::to_string(window));
  return it->second;
}

Alignment align(const ModelBinding& model, std::span<const Var> frames) {
  Alignment a;
  a.states = encode(model.encoder, frames);
  a.activations = halting_activations(model.halting, a.states);
  return a;
}

}  // namespace acstep
