// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "acstep/param_store.hpp"

namespace acstep {

/// Fills every parameter with i.i.d. draws from U[lo, hi], visiting
/// parameters in name order. Identical seeds give bit-identical stores.
void init_uniform(ParamStore& store, double lo, double hi, std::uint64_t seed);

/// L2 norm over the concatenation of all gradient slots.
double global_grad_norm(const ParamStore& store);

/// Rescales all gradients so their global norm is at most `max_norm`.
/// Returns the applied factor (1 when no clipping was needed).
double clip_global_norm(ParamStore& store, double max_norm);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// L2 penalty added to the gradient before the moment updates.
  double weight_decay = 0.0;

  void validate() const;
};

struct AdamMoments {
  DenseArray m;
  DenseArray v;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::map<std::string, AdamMoments> moments;
};

/// One bias-corrected Adam update using the gradients held in `store`.
/// `learning_rate` overrides the configured rate (used by decay schedules).
void adam_step(ParamStore& store, AdamState& state, double learning_rate);
inline void adam_step(ParamStore& store, AdamState& state) {
  adam_step(store, state, state.config.learning_rate);
}

}  // namespace acstep
