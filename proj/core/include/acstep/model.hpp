// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "acstep/decoder.hpp"
#include "acstep/encoder.hpp"
#include "acstep/halting.hpp"
#include "acstep/param_store.hpp"

namespace acstep {

struct ModelConfig {
  EncoderConfig encoder;
  HaltingConfig halting;
  DecoderConfig decoder;

  /// Validates each part and the dimensions that connect them.
  void validate() const;
};

/// Encoder, halting layer and decoder heads sharing one parameter store.
struct AcsModel {
  ModelConfig config;
  ParamStore params;

  /// Registers all parameters, zero-initialized.
  explicit AcsModel(const ModelConfig& cfg);

  /// Model with parameters drawn from U[-init_range, init_range].
  static AcsModel create(const ModelConfig& cfg, double init_range, std::uint64_t seed);
};

struct ModelBinding {
  EncoderBinding encoder;
  HaltingBinding halting;
  std::map<std::size_t, DecoderHead> heads;

  const DecoderHead& head(std::size_t window) const;
};

template <typename Store>
ModelBinding bind_model(Tape& tape, Store& store, const ModelConfig& cfg) {
  ModelBinding b{bind_encoder(tape, store, cfg.encoder), bind_halting(tape, store, cfg.halting),
                 {}};
  for (std::size_t w : cfg.decoder.windows) {
    b.heads.emplace(w, bind_decoder_head(tape, store, cfg.decoder, w));
  }
  return b;
}

/// Encoder states, activations and segmentation of one utterance.
struct Alignment {
  std::vector<Var> states;
  std::vector<Var> activations;
};

Alignment align(const ModelBinding& model, std::span<const Var> frames);

}  // namespace acstep
