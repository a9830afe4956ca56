// SPDX-License-Identifier: Apache-2.0
//
// Recurrent decoder. Each step consumes the embedding of the previous
// symbol and a window of 2w + 1 context vectors centered on the current
// output, updates a GRU state, and projects it to log-probabilities over the
// vocabulary.
//
// A checkpoint may carry several decoder heads, one per window width, all
// reading the same encoder and halting layer. Head parameters live under
// "decoder/w<w>/".
#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "acstep/autodiff.hpp"
#include "acstep/errors.hpp"
#include "acstep/encoder.hpp"
#include "acstep/halting.hpp"

namespace acstep {

struct DecoderConfig {
  std::size_t units = 32;
  std::size_t embed_dim = 16;
  std::size_t context_dim = 32;
  std::size_t vocab_size = 12;
  /// Window widths with a trained head.
  std::vector<std::size_t> windows{0};

  void validate() const;
  bool has_window(std::size_t w) const;
  std::size_t input_dim(std::size_t w) const { return embed_dim + (2 * w + 1) * context_dim; }
};

void add_decoder_params(ParamStore& store, const DecoderConfig& cfg);

std::string decoder_prefix(std::size_t window);

struct DecoderHead {
  std::size_t window = 0;
  std::size_t units = 0;
  Var embedding;  // [vocab, embed]
  GruWeights gru;
  Var out_w;  // [vocab, units]
  Var out_b;  // [vocab]
};

template <typename Store>
DecoderHead bind_decoder_head(Tape& tape, Store& store, const DecoderConfig& cfg,
                              std::size_t window) {
  if (!cfg.has_window(window)) {
    throw ConfigError("no decoder head for window " + std::to_string(window));
  }
  const std::string p = decoder_prefix(window);
  return {window,
          cfg.units,
          tape.param(store, p + "/embed"),
          bind_gru(tape, store, p + "/gru"),
          tape.param(store, p + "/out_w"),
          tape.param(store, p + "/out_b")};
}

/// [c_{i-w}; ...; c_i; ...; c_{i+w}] with `zero` in out-of-range slots.
Var window_contexts(std::span<const Var> contexts, std::size_t i, std::size_t w, Var zero);
DenseArray window_contexts(const ContextSequence& contexts, std::size_t i, std::size_t w);

/// Trainable row lookup of the previous symbol.
Var embed(const DecoderHead& head, int symbol);

struct DecoderStep {
  Var state;
  /// Log-probabilities over the vocabulary.
  Var log_probs;
};

/// s_i = GRU(s_{i-1}, [embed(y_{i-1}); window]); log softmax(W s_i + b).
DecoderStep decode_step(const DecoderHead& head, Var state, int y_prev, Var ctx_window);

// Plain-array view of one decoder step, for callers outside a tape.

struct DecoderState {
  DenseArray s;
  std::size_t step = 0;
};

struct OutputDistribution {
  std::vector<double> probs;
};

DecoderState initial_decoder_state(const DecoderConfig& cfg);

std::pair<DecoderState, OutputDistribution> decode_step(const ParamStore& params,
                                                        const DecoderConfig& cfg,
                                                        std::size_t window,
                                                        const DecoderState& state, int y_prev,
                                                        const DenseArray& ctx_window);

}  // namespace acstep
