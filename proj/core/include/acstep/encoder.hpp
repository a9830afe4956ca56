// SPDX-License-Identifier: Apache-2.0
//
// Pyramidal recurrent encoder. Layer 1 runs a GRU over the input frames;
// every downsampling layer above it consumes the concatenation of two
// adjacent lower-layer states, halving the time resolution:
//
//   h^i_j = GRU(h^i_{j-1}, [h^{i-1}_{2j-1}; h^{i-1}_{2j}])
//
// An odd-length layer input is padded on the right with one zero state.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acstep/autodiff.hpp"
#include "acstep/dense_array.hpp"
#include "acstep/param_store.hpp"

namespace acstep {

/// Input feature vectors x_1..x_T of one utterance.
struct FrameSequence {
  std::string id;
  std::vector<DenseArray> frames;

  std::size_t length() const { return frames.size(); }
  std::size_t dim() const { return frames.empty() ? 0 : frames.front().size(); }
  /// Non-empty, equal-dimension, finite.
  void validate() const;
};

struct EncoderConfig {
  std::size_t input_dim = 8;
  std::size_t layers = 3;
  /// Units per layer and per direction.
  std::size_t units = 32;
  /// Which layers consume concatenated pairs. Layer 1 never does.
  std::vector<bool> downsample{false, true, true};
  bool bidirectional = false;

  void validate() const;
  /// 2^(number of downsampling layers).
  std::size_t factor() const;
  std::size_t output_dim() const { return bidirectional ? 2 * units : units; }

  /// 3 x 512 unidirectional pyramidal GRU.
  static EncoderConfig full_scale_online(std::size_t input_dim);
  /// 3 x 256 per direction, bidirectional.
  static EncoderConfig full_scale_offline(std::size_t input_dim);
};

/// Number of encoder states for T input frames (the halving chain with
/// right padding). Depends only on T and the downsample mask.
std::size_t encoded_length(std::size_t frames, const EncoderConfig& cfg);

/// Encoder output h_1..h_T' as plain arrays.
struct EncoderStates {
  std::vector<DenseArray> states;
  std::size_t factor = 1;

  std::size_t length() const { return states.size(); }
  std::size_t dim() const { return states.empty() ? 0 : states.front().size(); }
};

// --- GRU cell --------------------------------------------------------------

/// Gate order in the stacked weights is update (z), reset (r), candidate (n):
///   z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
///   n = tanh(Wn x + Un (r * h) + bn), h' = (1 - z) * n + z * h.
struct GruWeights {
  Var wx;  // [3H, in]
  Var wh;  // [3H, H]
  Var b;   // [3H]
};

void add_gru_params(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                    std::size_t units);

template <typename Store>
GruWeights bind_gru(Tape& tape, Store& store, const std::string& prefix) {
  return {tape.param(store, prefix + "/wx"), tape.param(store, prefix + "/wh"),
          tape.param(store, prefix + "/b")};
}

/// One fused GRU step with a hand-written backward pass.
Var gru_cell(Var x, Var h_prev, const GruWeights& w);

// --- Encoder ---------------------------------------------------------------

void add_encoder_params(ParamStore& store, const EncoderConfig& cfg);

/// Encoder parameters bound to a tape.
struct EncoderBinding {
  EncoderConfig config;
  std::vector<GruWeights> forward;
  std::vector<GruWeights> backward;  // empty unless bidirectional
};

template <typename Store>
EncoderBinding bind_encoder(Tape& tape, Store& store, const EncoderConfig& cfg) {
  EncoderBinding b{cfg, {}, {}};
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    b.forward.push_back(bind_gru(tape, store, "encoder/fwd/l" + std::to_string(l)));
    if (cfg.bidirectional) {
      b.backward.push_back(bind_gru(tape, store, "encoder/bwd/l" + std::to_string(l)));
    }
  }
  return b;
}

/// Runs one pyramidal stack over `inputs`.
std::vector<Var> pyramidal_stack(std::span<const GruWeights> layers, const EncoderConfig& cfg,
                                 std::span<const Var> inputs);

/// Unidirectional pyramidal pass. Requires cfg.bidirectional == false.
std::vector<Var> pyramidal_forward(const EncoderBinding& enc, std::span<const Var> frames);

/// Forward stack over x and backward stack over reversed x; step j is
/// [fwd_j; bwd_j]. Requires cfg.bidirectional == true.
std::vector<Var> bidirectional_forward(const EncoderBinding& enc, std::span<const Var> frames);

/// Dispatches on cfg.bidirectional.
std::vector<Var> encode(const EncoderBinding& enc, std::span<const Var> frames);

std::vector<Var> frame_vars(Tape& tape, const FrameSequence& frames);

EncoderStates pyramidal_forward(const FrameSequence& frames, const EncoderConfig& cfg,
                                const ParamStore& params);
EncoderStates bidirectional_forward(const FrameSequence& frames, const EncoderConfig& cfg,
                                    const ParamStore& params);

/// Frame-by-frame unidirectional encoder. Produces exactly the states of
/// pyramidal_forward, bit for bit, as soon as each becomes computable.
class StreamingEncoder {
 public:
  explicit StreamingEncoder(const EncoderBinding& enc);

  /// Consumes one frame; returns any top-layer states completed by it.
  std::vector<Var> push(Var frame);
  /// Pads pending odd inputs and returns the remaining top-layer states.
  std::vector<Var> finish();

  std::size_t frames_consumed() const { return frames_; }

 private:
  struct Layer {
    GruWeights weights;
    bool downsample = false;
    Var hidden;
    std::optional<Var> pending;
  };

  void feed(std::size_t layer, Var input, std::vector<Var>& out);

  Tape* tape_;
  std::vector<Layer> layers_;
  std::size_t input_dim_;
  std::size_t frames_ = 0;
  bool finished_ = false;
};

}  // namespace acstep
