// SPDX-License-Identifier: Apache-2.0
#include "acstep/lm.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "acstep/errors.hpp"
#include "acstep/optim.hpp"
#include "acstep/vocab.hpp"

namespace acstep {

namespace {

template <typename Store>
Var sequence_nll(Tape& tape, Store& params, const LmConfig& cfg, const std::vector<int>& seq) {
  const LmBinding lm = bind_lm(tape, params, cfg);
  Var state = tape.zeros(cfg.units);
  int prev = Vocab::kSos;
  std::vector<Var> terms;
  terms.reserve(seq.size());
  for (int y : seq) {
    const LmStep step = lm_step(lm, state, prev);
    terms.push_back(pick(step.log_probs, static_cast<std::size_t>(y)));
    state = step.state;
    prev = y;
  }
  return scale(add_n(terms), -1.0 / static_cast<double>(seq.size()));
}

}  // namespace

void LmConfig::validate() const {
  if (units < 1 || embed_dim < 1) throw ConfigError("LM dimensions must be positive");
  if (vocab_size < 2) throw ConfigError("LM vocabulary needs at least two symbols");
}

void add_lm_params(ParamStore& store, const LmConfig& cfg) {
  cfg.validate();
  store.add("lm/embed", {cfg.vocab_size, cfg.embed_dim});
  add_gru_params(store, "lm/gru", cfg.embed_dim, cfg.units);
  store.add("lm/out_w", {cfg.vocab_size, cfg.units});
  store.add("lm/out_b", {cfg.vocab_size});
}

LmStep lm_step(const LmBinding& lm, Var state, int y_prev) {
  if (y_prev < 0 || static_cast<std::size_t>(y_prev) >= lm.config.vocab_size) {
    throw ContractError("LM input symbol " + std::to_string(y_prev) + " out of range");
  }
  const Var x = row(lm.embedding, static_cast<std::size_t>(y_prev));
  const Var s = gru_cell(x, state, lm.gru);
  return {s, log_softmax(add(matvec(lm.out_w, s), lm.out_b))};
}

double joint_score(double logp_asr, double logp_lm, double gamma) {
  return logp_asr + gamma * logp_lm;
}

LanguageModel::LanguageModel(const LmConfig& cfg) : config(cfg) { add_lm_params(params, cfg); }

void LmTrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("LM training needs at least one epoch");
  if (!(learning_rate > 0.0)) throw ConfigError("LM learning rate must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("LM clip norm must be positive");
  if (!(init_range > 0.0)) throw ConfigError("LM init range must be positive");
}

double lm_loss(const LanguageModel& lm, const std::vector<std::vector<int>>& sequences) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& seq : sequences) {
    if (seq.empty()) continue;
    Tape tape(false);
    total += sequence_nll(tape, lm.params, lm.config, seq).item() * static_cast<double>(seq.size());
    count += seq.size();
  }
  if (count == 0) throw ContractError("lm_loss: no symbols");
  return total / static_cast<double>(count);
}

std::vector<double> train_lm(LanguageModel& lm, const std::vector<std::vector<int>>& sequences,
                             const LmTrainConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    if (!sequences[i].empty()) order.push_back(i);
  }
  if (order.empty()) throw ContractError("train_lm: empty corpus");
  init_uniform(lm.params, -cfg.init_range, cfg.init_range, cfg.seed);
  AdamState adam;
  adam.config.learning_rate = cfg.learning_rate;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<double> history;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t idx : order) {
      lm.params.zero_grad();
      Tape tape;
      const Var loss = sequence_nll(tape, lm.params, lm.config, sequences[idx]);
      tape.backward(loss);
      clip_global_norm(lm.params, cfg.clip_norm);
      adam_step(lm.params, adam);
      total += loss.item();
    }
    history.push_back(total / static_cast<double>(order.size()));
  }
  return history;
}

}  // namespace acstep
