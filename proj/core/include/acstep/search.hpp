// SPDX-License-Identifier: Apache-2.0
//
// Greedy and beam decoding over alignment-driven output steps.
//
// The halting layer runs once per utterance on the encoder side, so every
// hypothesis in the beam shares the same contexts and the same number of
// output steps (one per segment). Hypotheses are ranked by the cumulative
// joint score; ties go to the lexicographically smaller symbol sequence.
#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "acstep/halting.hpp"
#include "acstep/lm.hpp"
#include "acstep/model.hpp"

namespace acstep {

struct BeamConfig {
  std::size_t width = 8;
  /// LM weight in the joint score; 0 disables fusion.
  double gamma = 0.0;
  /// Context window w; selects the decoder head.
  std::size_t window = 0;
  std::size_t nbest = 1;

  void validate() const;
};

struct Hypothesis {
  std::vector<int> symbols;
  double score = 0.0;
};

struct DecodeResult {
  /// Sorted by descending score.
  std::vector<Hypothesis> nbest;
  HaltingTrace trace;
  ContextSequence contexts;
  std::size_t halting_evaluations = 0;

  const Hypothesis& best() const;
};

/// Synchronous beam over output steps. Drives one step per context window.
class BeamSearch {
 public:
  BeamSearch(const DecoderHead& head, const LmBinding* lm, const BeamConfig& cfg);

  void advance(Var ctx_window);

  std::size_t steps() const { return steps_; }
  /// Current beam, best first.
  std::vector<Hypothesis> hypotheses() const;
  const Hypothesis& leader() const { return beam_.front().hyp; }

 private:
  struct Entry {
    Hypothesis hyp;
    Var dec_state;
    Var lm_state;
  };

  const DecoderHead* head_;
  const LmBinding* lm_;
  BeamConfig cfg_;
  std::vector<Entry> beam_;
  std::size_t steps_ = 0;
};

/// Argmax decoding under the joint score, feeding each pick back as y_prev.
DecodeResult greedy_decode(const AcsModel& model, const FrameSequence& frames,
                           const LanguageModel* lm = nullptr, double gamma = 0.0,
                           std::size_t window = 0);

DecodeResult beam_decode(const AcsModel& model, const LanguageModel* lm,
                         const FrameSequence& frames, const BeamConfig& cfg);

/// Runs encoder, halting layer, segmentation (with the end-of-stream tail
/// forced closed) and pooling for one utterance.
struct BatchAlignment {
  HaltingTrace trace;
  ContextSequence contexts;
};
BatchAlignment batch_align(const AcsModel& model, const FrameSequence& frames);

/// Picks gamma from `grid` minimizing label error rate on `dev`; ties go to
/// the smaller gamma.
struct GammaSearchResult {
  double gamma = 0.0;
  std::vector<double> grid;
  std::vector<double> error_rates;
};
GammaSearchResult tune_gamma(const AcsModel& model, const LanguageModel& lm,
                             const std::vector<FrameSequence>& dev_frames,
                             const std::vector<std::vector<int>>& dev_labels, BeamConfig cfg,
                             const std::vector<double>& grid);

/// Default grid {0, 0.1, ..., 1.0}.
std::vector<double> default_gamma_grid();

}  // namespace acstep
