// SPDX-License-Identifier: Apache-2.0
//
// Recurrent language model over output symbols, trained on label text only
// and fused with the decoder at search time:
//
//   score(y) = log p(y | x) + gamma * log p_LM(y)
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "acstep/autodiff.hpp"
#include "acstep/encoder.hpp"
#include "acstep/param_store.hpp"

namespace acstep {

struct LmConfig {
  std::size_t units = 32;
  std::size_t embed_dim = 16;
  std::size_t vocab_size = 12;

  void validate() const;
};

void add_lm_params(ParamStore& store, const LmConfig& cfg);

struct LmBinding {
  LmConfig config;
  Var embedding;
  GruWeights gru;
  Var out_w;
  Var out_b;
};

template <typename Store>
LmBinding bind_lm(Tape& tape, Store& store, const LmConfig& cfg) {
  return {cfg, tape.param(store, "lm/embed"), bind_gru(tape, store, "lm/gru"),
          tape.param(store, "lm/out_w"), tape.param(store, "lm/out_b")};
}

struct LmStep {
  Var state;
  /// Log-probabilities of the next symbol.
  Var log_probs;
};

/// Consumes y_prev (sequences start at <SOS>) and predicts the next symbol.
LmStep lm_step(const LmBinding& lm, Var state, int y_prev);

/// logp_asr + gamma * logp_lm. gamma must be non-negative.
double joint_score(double logp_asr, double logp_lm, double gamma);

struct LanguageModel {
  LmConfig config;
  ParamStore params;

  explicit LanguageModel(const LmConfig& cfg);
};

struct LmTrainConfig {
  std::size_t epochs = 10;
  double learning_rate = 5e-3;
  double clip_norm = 1.0;
  double init_range = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Mean per-symbol negative log-likelihood of `sequences` (no <SOS>).
double lm_loss(const LanguageModel& lm, const std::vector<std::vector<int>>& sequences);

/// Teacher-forced next-symbol training with Adam. Initializes the
/// parameters from `cfg.seed`. Returns the mean training loss per epoch.
std::vector<double> train_lm(LanguageModel& lm, const std::vector<std::vector<int>>& sequences,
                             const LmTrainConfig& cfg);

}  // namespace acstep
