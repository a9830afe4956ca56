// SPDX-License-Identifier: Apache-2.0
#include "acstep/optim.hpp"

#include <cmath>
#include <random>

#include "acstep/errors.hpp"

namespace acstep {

void init_uniform(ParamStore& store, double lo, double hi, std::uint64_t seed) {
  if (!(lo < hi)) {
    throw ConfigError("init_uniform: empty interval [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& [_, p] : store.entries()) {
    for (double& x : p.value.data()) x = dist(rng);
  }
}

double global_grad_norm(const ParamStore& store) {
  double s = 0.0;
  for (const auto& [name, p] : store.entries()) {
    for (double g : p.grad.data()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + name);
      s += g * g;
    }
  }
  return std::sqrt(s);
}

double clip_global_norm(ParamStore& store, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("clip_global_norm: max_norm must be positive");
  const double norm = global_grad_norm(store);
  if (norm <= max_norm) return 1.0;
  const double factor = max_norm / norm;
  store.scale_grad(factor);
  return factor;
}

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("adam: learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adam: beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam: beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("adam: epsilon must be positive");
  if (weight_decay < 0.0) throw ConfigError("adam: weight decay must be non-negative");
}

void adam_step(ParamStore& store, AdamState& state, double learning_rate) {
  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (auto& [name, p] : store.entries()) {
    auto [it, inserted] = state.moments.try_emplace(name);
    AdamMoments& mom = it->second;
    if (inserted) {
      mom.m = DenseArray(p.value.shape());
      mom.v = DenseArray(p.value.shape());
    } else if (!mom.m.same_shape(p.value)) {
      throw ContractError("adam: moment shape mismatch for " + name);
    }
    if (!p.grad.same_shape(p.value)) throw ContractError("adam: gradient shape mismatch for " + name);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i] + c.weight_decay * p.value[i];
      mom.m[i] = c.beta1 * mom.m[i] + (1.0 - c.beta1) * g;
      mom.v[i] = c.beta2 * mom.v[i] + (1.0 - c.beta2) * g * g;
      const double mhat = mom.m[i] / bc1;
      const double vhat = mom.v[i] / bc2;
      p.value[i] -= learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

}  // namespace acstep
