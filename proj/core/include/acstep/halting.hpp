// SPDX-License-Identifier: Apache-2.0
//
// Adaptive computation steps: the halting layer and the segmentation it
// drives.
//
// For every encoder step j the halting layer looks at a window of states
// centered on h_j, applies a 1-D convolution with rectified-linear output,
// projects the channels to a scalar and squashes it with a sigmoid to get the
// activation a_j in (0, 1). Activations are accumulated left to right; a
// segment closes at the first step n where
//
//   a_begin + ... + a_n >= 1 - epsilon
//
// Inside a segment p_j = a_j, except at the closing step where p_n is the
// remainder R = 1 - (a_begin + ... + a_{n-1}), so the segment's weights sum
// to one. The segment's context is sum_j p_j h_j.
#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "acstep/autodiff.hpp"
#include "acstep/encoder.hpp"
#include "acstep/param_store.hpp"

namespace acstep {

struct HaltingConfig {
  double epsilon = 0.01;
  /// Odd, so the window is centered on the current step.
  std::size_t kernel_width = 3;
  std::size_t channels = 64;

  void validate() const;
  /// Encoder steps a streaming consumer must wait past step j before a_j is known.
  std::size_t lookahead() const { return (kernel_width - 1) / 2; }
};

/// A closed run of encoder steps [begin, end) assigned to one output.
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  /// Probability of the closing step end - 1.
  double remainder = 1.0;
  /// Closed by an end-of-stream flush rather than by the threshold.
  bool forced = false;

  std::size_t length() const { return end - begin; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct HaltingTrace {
  std::vector<double> activations;
  /// p_j per encoder step. Steps in the pending tail carry p_j = a_j.
  std::vector<double> probabilities;
  std::vector<Segment> segments;
  /// Steps that never reached the threshold (remainder unused).
  std::optional<Segment> tail;

  friend bool operator==(const HaltingTrace&, const HaltingTrace&) = default;
};

/// Per-output context vectors and the encoder step each one closed at.
struct ContextSequence {
  std::vector<DenseArray> contexts;
  std::vector<std::size_t> emission_steps;

  std::size_t size() const { return contexts.size(); }
};

/// Running accumulation shared by the batch and streaming segmenters.
class HaltingAccumulator {
 public:
  explicit HaltingAccumulator(double epsilon);

  /// Adds activation a_j for the next step. Returns the segment it closes,
  /// if any; the accumulator then restarts at the following step.
  std::optional<Segment> push(double activation);
  /// Force-closes pending steps, if any, with the remainder rule.
  std::optional<Segment> flush();

  std::size_t next_step() const { return next_; }
  std::size_t pending_begin() const { return begin_; }
  bool has_pending() const { return next_ > begin_; }
  /// Sum of the pending activations.
  double running_sum() const { return running_; }

 private:
  double threshold_;
  double running_ = 0.0;
  double before_last_ = 0.0;
  std::size_t begin_ = 0;
  std::size_t next_ = 0;
};

void add_halting_params(ParamStore& store, const HaltingConfig& cfg, std::size_t state_dim);

struct HaltingBinding {
  HaltingConfig config;
  Var conv_w;  // [channels, kernel_width * state_dim]
  Var conv_b;  // [channels]
  Var proj_w;  // [channels]
  Var proj_b;  // [1]
};

template <typename Store>
HaltingBinding bind_halting(Tape& tape, Store& store, const HaltingConfig& cfg) {
  return {cfg, tape.param(store, "halting/conv_w"), tape.param(store, "halting/conv_b"),
          tape.param(store, "halting/proj_w"), tape.param(store, "halting/proj_b")};
}

/// a_j from the window [h_{j-r}, ..., h_{j+r}] (zero vectors outside the
/// sequence): sigmoid(proj_w . relu(conv_w [window] + conv_b) + proj_b).
Var halting_unit(const HaltingBinding& halt, std::span<const Var> window);

/// One activation per encoder state, with zero padding at both edges.
std::vector<Var> halting_activations(const HaltingBinding& halt, std::span<const Var> states);
std::vector<double> halting_activations(const EncoderStates& states, const HaltingConfig& cfg,
                                        const ParamStore& params);

/// Batch segmentation. Every activation must lie in (0, 1).
HaltingTrace segment(std::span<const double> activations, double epsilon);

/// Force-closes a pending tail into a final segment whose last probability
/// follows the remainder rule. No-op without a tail.
void close_tail(HaltingTrace& trace);

/// Context of one segment: p-weighted sum of its states, accumulated in
/// step order. The closing weight is computed on the tape as
/// 1 - (a_begin + ... + a_{end-2}) so gradients reach earlier activations.
Var pool_segment(std::span<const Var> states, std::span<const Var> activations,
                 const Segment& seg);

std::vector<Var> pool_contexts(std::span<const Var> states, std::span<const Var> activations,
                               const HaltingTrace& trace);

/// Contexts of the closed segments (a pending tail contributes nothing).
ContextSequence pool_contexts(const EncoderStates& states, const HaltingTrace& trace);

/// Emission from the streaming halting layer.
struct ContextEmission {
  Var context;
  Segment segment;
  std::size_t index = 0;
  /// Encoder states received when the context became available.
  std::size_t available_after = 0;
};

/// Incremental halting layer plus segmentation. Feeding states one at a
/// time reproduces batch halting_activations + segment + close_tail +
/// pool_contexts exactly.
class HaltingStream {
 public:
  explicit HaltingStream(const HaltingBinding& halt);

  std::optional<ContextEmission> push(Var state);
  /// Evaluates the held-back steps with zero padding and flushes the
  /// pending tail. Further calls throw StateError.
  std::vector<ContextEmission> finish();

  /// Halting-unit evaluations so far.
  std::size_t evaluations() const { return evaluations_; }
  const std::vector<double>& activations() const { return activation_values_; }
  /// Trace of everything processed so far.
  HaltingTrace trace() const;

 private:
  std::optional<ContextEmission> evaluate_next();

  HaltingBinding halt_;
  HaltingAccumulator acc_;
  std::vector<Var> states_;
  std::vector<Var> activation_vars_;
  std::vector<double> activation_values_;
  std::vector<double> probabilities_;
  std::vector<Segment> segments_;
  Var zero_;
  std::size_t evaluations_ = 0;
  bool finished_ = false;
};

}  // namespace acstep
