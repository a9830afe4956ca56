// SPDX-License-Identifier: Apache-2.0
#include "acstep/halting.hpp"

#include "acstep/errors.hpp"

namespace acstep {

namespace {

// Keeps a_j strictly inside (0, 1) when the sigmoid saturates in floating
// point.
constexpr double kActivationGuard = 1e-12;

void check_activation(double a, std::size_t j) {
  if (!(a > 0.0 && a < 1.0)) {
    throw ContractError("activation " + std::to_string(j) + " = " + std::to_string(a) +
                        " lies outside (0, 1)");
  }
}

}  // namespace

void HaltingConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("halting epsilon must lie in (0, 1)");
  if (kernel_width % 2 == 0) {
    throw ConfigError("halting kernel width must be odd, got " + std::to_string(kernel_width));
  }
  if (channels < 1) throw ConfigError("halting layer needs at least one channel");
}

HaltingAccumulator::HaltingAccumulator(double epsilon) : threshold_(1.0 - epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("halting epsilon must lie in (0, 1)");
}

std::optional<Segment> HaltingAccumulator::push(double activation) {
  const double total = running_ + activation;
  ++next_;
  if (total >= threshold_) {
    Segment s{begin_, next_, 1.0 - running_, false};
    begin_ = next_;
    running_ = 0.0;
    before_last_ = 0.0;
    return s;
  }
  before_last_ = running_;
  running_ = total;
  return std::nullopt;
}

std::optional<Segment> HaltingAccumulator::flush() {
  if (!has_pending()) return std::nullopt;
  Segment s{begin_, next_, 1.0 - before_last_, true};
  begin_ = next_;
  running_ = 0.0;
  before_last_ = 0.0;
  return s;
}

void add_halting_params(ParamStore& store, const HaltingConfig& cfg, std::size_t state_dim) {
  cfg.validate();
  store.add("halting/conv_w", {cfg.channels, cfg.kernel_width * state_dim});
  store.add("halting/conv_b", {cfg.channels});
  store.add("halting/proj_w", {cfg.channels});
  store.add("halting/proj_b", {1});
}

Var halting_unit(const HaltingBinding& halt, std::span<const Var> window) {
  if (window.size() != halt.config.kernel_width) {
    throw ContractError("halting window has " + std::to_string(window.size()) +
                        " states, kernel width is " + std::to_string(halt.config.kernel_width));
  }
  const Var x = concat(window);
  const Var energy = relu(add(matvec(halt.conv_w, x), halt.conv_b));
  const Var logit = add(dot(halt.proj_w, energy), halt.proj_b);
  return clamp(sigmoid(logit), kActivationGuard, 1.0 - kActivationGuard);
}

std::vector<Var> halting_activations(const HaltingBinding& halt, std::span<const Var> states) {
  halt.config.validate();
  if (states.empty()) throw ContractError("halting layer needs at least one encoder state");
  const std::size_t r = halt.config.lookahead();
  const Var zero = states.front().tape().zeros(states.front().size());
  std::vector<Var> window(halt.config.kernel_width);
  std::vector<Var> out;
  out.reserve(states.size());
  for (std::size_t j = 0; j < states.size(); ++j) {
    for (std::size_t k = 0; k < window.size(); ++k) {
      const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(j + k) - static_cast<std::ptrdiff_t>(r);
      window[k] = (idx >= 0 && idx < static_cast<std::ptrdiff_t>(states.size()))
                      ? states[static_cast<std::size_t>(idx)]
                      : zero;
    }
    out.push_back(halting_unit(halt, window));
  }
  return out;
}

std::vector<double> halting_activations(const EncoderStates& states, const HaltingConfig& cfg,
                                        const ParamStore& params) {
  Tape tape(false);
  const HaltingBinding halt = bind_halting(tape, params, cfg);
  std::vector<Var> vars;
  vars.reserve(states.length());
  for (const DenseArray& h : states.states) vars.push_back(tape.constant(h));
  std::vector<double> out;
  for (Var a : halting_activations(halt, vars)) out.push_back(a.item());
  return out;
}

HaltingTrace segment(std::span<const double> activations, double epsilon) {
  HaltingAccumulator acc(epsilon);
  HaltingTrace trace;
  trace.activations.assign(activations.begin(), activations.end());
  trace.probabilities.assign(activations.begin(), activations.end());
  for (std::size_t j = 0; j < activations.size(); ++j) {
    check_activation(activations[j], j);
    if (auto seg = acc.push(activations[j])) {
      trace.probabilities[seg->end - 1] = seg->remainder;
      trace.segments.push_back(*seg);
    }
  }
  if (acc.has_pending()) {
    trace.tail = Segment{acc.pending_begin(), acc.next_step(), 1.0, false};
  }
  return trace;
}

void close_tail(HaltingTrace& trace) {
  if (!trace.tail) return;
  Segment seg = *trace.tail;
  // Same left-to-right accumulation as HaltingAccumulator.
  double before_last = 0.0;
  for (std::size_t j = seg.begin; j + 1 < seg.end; ++j) before_last += trace.activations[j];
  seg.remainder = 1.0 - before_last;
  seg.forced = true;
  trace.probabilities[seg.end - 1] = seg.remainder;
  trace.segments.push_back(seg);
  trace.tail.reset();
}

Var pool_segment(std::span<const Var> states, std::span<const Var> activations,
                 const Segment& seg) {
  if (seg.end <= seg.begin || seg.end > states.size() || seg.end > activations.size()) {
    throw ContractError("segment [" + std::to_string(seg.begin) + ", " + std::to_string(seg.end) +
                        ") outside the encoder states");
  }
  Tape& t = states.front().tape();
  const std::size_t n = seg.length();
  const Var last_weight =
      n == 1 ? t.scalar(1.0) : rsub(1.0, add_n(activations.subspan(seg.begin, n - 1)));
  Var c;
  for (std::size_t j = seg.begin; j < seg.end; ++j) {
    const Var p = (j + 1 == seg.end) ? last_weight : activations[j];
    const Var term = scale(states[j], p);
    c = (j == seg.begin) ? term : add(c, term);
  }
  return c;
}

std::vector<Var> pool_contexts(std::span<const Var> states, std::span<const Var> activations,
                               const HaltingTrace& trace) {
  std::vector<Var> out;
  out.reserve(trace.segments.size());
  for (const Segment& seg : trace.segments) out.push_back(pool_segment(states, activations, seg));
  return out;
}

ContextSequence pool_contexts(const EncoderStates& states, const HaltingTrace& trace) {
  ContextSequence out;
  for (const Segment& seg : trace.segments) {
    if (seg.end > states.length() || seg.end > trace.probabilities.size()) {
      throw ContractError("trace indices exceed the encoder states");
    }
    DenseArray c = DenseArray::zeros(states.dim());
    for (std::size_t j = seg.begin; j < seg.end; ++j) {
      const double p = trace.probabilities[j];
      const auto h = states.states[j].data();
      for (std::size_t k = 0; k < c.size(); ++k) c[k] += p * h[k];
    }
    out.contexts.push_back(std::move(c));
    out.emission_steps.push_back(seg.end - 1);
  }
  return out;
}

HaltingStream::HaltingStream(const HaltingBinding& halt)
    : halt_(halt), acc_(halt.config.epsilon) {
  halt_.config.validate();
}

std::optional<ContextEmission> HaltingStream::evaluate_next() {
  const std::size_t j = activation_vars_.size();
  const std::size_t r = halt_.config.lookahead();
  std::vector<Var> window(halt_.config.kernel_width);
  for (std::size_t k = 0; k < window.size(); ++k) {
    const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(j + k) - static_cast<std::ptrdiff_t>(r);
    window[k] = (idx >= 0 && idx < static_cast<std::ptrdiff_t>(states_.size()))
                    ? states_[static_cast<std::size_t>(idx)]
                    : zero_;
  }
  const Var a = halting_unit(halt_, window);
  ++evaluations_;
  activation_vars_.push_back(a);
  activation_values_.push_back(a.item());
  probabilities_.push_back(a.item());
  check_activation(a.item(), j);
  auto seg = acc_.push(a.item());
  if (!seg) return std::nullopt;
  probabilities_[seg->end - 1] = seg->remainder;
  segments_.push_back(*seg);
  return ContextEmission{pool_segment(states_, activation_vars_, *seg), *seg,
                         segments_.size() - 1, states_.size()};
}

std::optional<ContextEmission> HaltingStream::push(Var state) {
  if (finished_) throw StateError("HaltingStream::push after end-of-stream flush");
  if (states_.empty()) zero_ = state.tape().zeros(state.size());
  states_.push_back(state);
  // a_j needs h_{j+r}; the newest state completes the window of step size - 1 - r.
  if (states_.size() > halt_.config.lookahead()) return evaluate_next();
  return std::nullopt;
}

std::vector<ContextEmission> HaltingStream::finish() {
  if (finished_) throw StateError("HaltingStream::finish called twice");
  finished_ = true;
  std::vector<ContextEmission> out;
  while (activation_vars_.size() < states_.size()) {
    if (auto e = evaluate_next()) out.push_back(std::move(*e));
  }
  if (auto seg = acc_.flush()) {
    probabilities_[seg->end - 1] = seg->remainder;
    segments_.push_back(*seg);
    out.push_back(ContextEmission{pool_segment(states_, activation_vars_, *seg), *seg,
                                  segments_.size() - 1, states_.size()});
  }
  return out;
}

HaltingTrace HaltingStream::trace() const {
  HaltingTrace t;
  t.activations = activation_values_;
  t.probabilities = probabilities_;
  t.segments = segments_;
  if (acc_.has_pending()) t.tail = Segment{acc_.pending_begin(), acc_.next_step(), 1.0, false};
  return t;
}

}  // namespace acstep
