// SPDX-License-Identifier: Apache-2.0
#include "acstep/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "acstep/errors.hpp"

namespace acstep {

void DecoderConfig::validate() const {
  if (units < 1 || embed_dim < 1 || context_dim < 1) {
    throw ConfigError("decoder dimensions must be positive");
  }
  if (vocab_size < 2) throw ConfigError("decoder vocabulary needs at least two symbols");
  if (windows.empty()) throw ConfigError("decoder needs at least one window head");
  std::vector<std::size_t> sorted = windows;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("duplicate decoder window width");
  }
}

bool DecoderConfig::has_window(std::size_t w) const {
  return std::find(windows.begin(), windows.end(), w) != windows.end();
}

std::string decoder_prefix(std::size_t window) { return "decoder/w" + std::to_string(window); }

void add_decoder_params(ParamStore& store, const DecoderConfig& cfg) {
  cfg.validate();
  for (std::size_t w : cfg.windows) {
    const std::string p = decoder_prefix(w);
    store.add(p + "/embed", {cfg.vocab_size, cfg.embed_dim});
    add_gru_params(store, p + "/gru", cfg.input_dim(w), cfg.units);
    store.add(p + "/out_w", {cfg.vocab_size, cfg.units});
    store.add(p + "/out_b", {cfg.vocab_size});
  }
}

Var window_contexts(std::span<const Var> contexts, std::size_t i, std::size_t w, Var zero) {
  if (i >= contexts.size()) {
    throw ContractError("output index " + std::to_string(i) + " out of range for " +
                        std::to_string(contexts.size()) + " contexts");
  }
  if (w == 0) return contexts[i];
  std::vector<Var> parts;
  parts.reserve(2 * w + 1);
  for (std::size_t k = 0; k <= 2 * w; ++k) {
    const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(i + k) - static_cast<std::ptrdiff_t>(w);
    parts.push_back(idx >= 0 && idx < static_cast<std::ptrdiff_t>(contexts.size())
                        ? contexts[static_cast<std::size_t>(idx)]
                        : zero);
  }
  return concat(parts);
}

DenseArray window_contexts(const ContextSequence& contexts, std::size_t i, std::size_t w) {
  Tape tape(false);
  std::vector<Var> vars;
  for (const DenseArray& c : contexts.contexts) vars.push_back(tape.constant(c));
  const std::size_t d = contexts.contexts.empty() ? 0 : contexts.contexts.front().size();
  return window_contexts(vars, i, w, tape.zeros(d)).value();
}

Var embed(const DecoderHead& head, int symbol) {
  if (symbol < 0) throw ContractError("negative symbol id");
  return row(head.embedding, static_cast<std::size_t>(symbol));
}

DecoderStep decode_step(const DecoderHead& head, Var state, int y_prev, Var ctx_window) {
  const Var parts[2] = {embed(head, y_prev), ctx_window};
  const Var s = gru_cell(concat(parts), state, head.gru);
  const Var logits = add(matvec(head.out_w, s), head.out_b);
  return {s, log_softmax(logits)};
}

DecoderState initial_decoder_state(const DecoderConfig& cfg) {
  return DecoderState{DenseArray::zeros(cfg.units), 0};
}

std::pair<DecoderState, OutputDistribution> decode_step(const ParamStore& params,
                                                        const DecoderConfig& cfg,
                                                        std::size_t window,
                                                        const DecoderState& state, int y_prev,
                                                        const DenseArray& ctx_window) {
  Tape tape(false);
  const DecoderHead head = bind_decoder_head(tape, params, cfg, window);
  const DecoderStep step =
      decode_step(head, tape.constant(state.s), y_prev, tape.constant(ctx_window));
  OutputDistribution dist;
  for (double lp : step.log_probs.value().data()) dist.probs.push_back(std::exp(lp));
  return {DecoderState{step.state.value(), state.step + 1}, std::move(dist)};
}

}  // namespace acstep
