// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "acstep/search.hpp"

namespace acstep {

struct SymbolEmission {
  /// Output step.
  std::size_t index = 0;
  /// Last symbol of the best hypothesis after this step.
  int symbol = 0;
  /// Input frames consumed when the symbol was produced.
  std::size_t frames_consumed = 0;
};

/// Online decoder: frames in, symbols out.
///
/// Output i is decoded as soon as context i + w exists; the remaining outputs
/// are decoded by finish(), which also flushes the encoder padding and the
/// pending halting tail. The final result equals beam_decode on the whole
/// utterance bit for bit. Unidirectional encoders only.
class StreamingDecoder {
 public:
  StreamingDecoder(const AcsModel& model, const LanguageModel* lm, const BeamConfig& cfg);
  ~StreamingDecoder();
  StreamingDecoder(const StreamingDecoder&) = delete;
  StreamingDecoder& operator=(const StreamingDecoder&) = delete;

  std::vector<SymbolEmission> push(const DenseArray& frame);
  std::vector<SymbolEmission> finish();

  bool finished() const { return finished_; }
  std::size_t frames_consumed() const { return frames_; }
  std::size_t contexts_emitted() const { return contexts_.size(); }
  std::size_t outputs_decoded() const;
  std::size_t halting_evaluations() const;

  /// Available after finish().
  DecodeResult result() const;

 private:
  struct Impl;

  void take(std::vector<Var> states, std::vector<SymbolEmission>& out);
  void decode_ready(bool final, std::vector<SymbolEmission>& out);

  const AcsModel* model_;
  BeamConfig cfg_;
  std::unique_ptr<Impl> impl_;
  std::vector<Var> contexts_;
  std::vector<std::size_t> emission_steps_;
  std::size_t frames_ = 0;
  bool finished_ = false;
};

DecodeResult streaming_decode(const AcsModel& model, const LanguageModel* lm,
                              const FrameSequence& frames, const BeamConfig& cfg);

}  // namespace acstep
