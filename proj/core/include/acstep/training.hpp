// SPDX-License-Identifier: Apache-2.0
//
// Teacher-forced training over halting-driven alignments.
//
// Cross-entropy needs one prediction per reference label, but the halting
// layer produces as many segments as its activations allow. During
// training the activations are rescaled so their total mass equals the
// label count L, then segmented with a rule that always yields exactly L
// segments (see segment_to_length). Inference never rescales, so two squared
// penalties act on the unscaled activations: total mass towards L, and the
// mass of every threshold-closed inference segment towards one.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "acstep/autodiff.hpp"
#include "acstep/errors.hpp"
#include "acstep/halting.hpp"
#include "acstep/model.hpp"
#include "acstep/tasks.hpp"

namespace acstep {

/// Upper clamp applied after rescaling: scaled activations stay in (0, 1 - delta].
inline constexpr double kScaledActivationDelta = 1e-6;

/// a_j * L / sum(a), clamped to 1 - delta. Throws NumericError when the
/// activations sum to zero.
std::vector<double> scale_activations_to_length(std::span<const double> activations,
                                                std::size_t length);
std::vector<Var> scale_activations_to_length(std::span<const Var> activations,
                                             std::size_t length);

/// Segmentation that always yields exactly `length` segments. The first
/// length - 1 close when the threshold is reached or when the steps left
/// equal the labels left; the last runs to the final step, as an
/// end-of-stream flush would at inference. Closing steps follow the
/// remainder rule. Requires activations.size() >= length >= 1.
HaltingTrace segment_to_length(std::span<const double> activations, std::size_t length,
                               double epsilon);

/// Mean over non-<PAD> steps of -log p(target). One log-probability vector
/// per target is required.
Var sequence_loss(std::span<const Var> log_probs, std::span<const int> targets);
double sequence_loss(const std::vector<std::vector<double>>& log_probs,
                     std::span<const int> targets);

struct TrainConfig {
  std::size_t epochs = 30;
  double learning_rate = 1e-3;
  /// Learning rate multiplier applied after every epoch.
  double lr_decay = 0.95;
  double clip_norm = 2.0;
  double clip_norm_late = 1.0;
  /// Last epoch (1-based) that uses clip_norm.
  std::size_t clip_switch_epoch = 20;
  std::size_t batch_size = 1;
  /// Epochs without dev improvement before stopping; 0 disables.
  std::size_t patience = 5;
  bool scale_activations = true;
  /// Weight of (unscaled total mass - L)^2 / L.
  double mass_loss_weight = 1.0;
  /// Weight of sum over unscaled threshold-closed segments of (mass - 1)^2, over L.
  double unit_mass_weight = 1.0;
  /// L2 weight decay folded into the Adam gradient.
  double weight_decay = 0.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Decoder head used for dev label error rate.
  std::size_t eval_window = 0;
  std::uint64_t seed = 1;

  void validate() const;
  double clip_for_epoch(std::size_t epoch) const {
    return epoch <= clip_switch_epoch ? clip_norm : clip_norm_late;
  }
};

struct EpochReport {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double clip_norm = 0.0;
  double train_loss = 0.0;
  double train_cross_entropy = 0.0;
  double train_mass_loss = 0.0;
  double dev_loss = 0.0;
  double dev_ler = 0.0;
  double grad_norm_mean = 0.0;
  double grad_norm_max = 0.0;
  /// Largest global norm after clipping.
  double clipped_norm_max = 0.0;
  double clipped_fraction = 0.0;
  /// Mean |unscaled segment count - L| over training utterances.
  double count_mismatch_mean = 0.0;
  double count_match_fraction = 0.0;
  bool improved = false;
};

struct TrainReport {
  std::vector<EpochReport> epochs;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
};

std::string epoch_to_json(const EpochReport& e);

/// Raised when a loss or gradient becomes non-finite. Carries the epochs
/// completed before the failure.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, TrainReport report)
      : NumericError(what), report_(std::move(report)) {}
  const TrainReport& report() const { return report_; }

 private:
  TrainReport report_;
};

struct UtteranceLoss {
  Var total;
  Var cross_entropy;
  Var mass;
  /// Segments produced by the unscaled activations (with the tail closed).
  std::size_t raw_segments = 0;
};

/// Builds the loss of one utterance on `tape` for every decoder head.
template <typename Store>
UtteranceLoss utterance_loss(Tape& tape, Store& params, const ModelConfig& cfg,
                             const CorpusRecord& record, const TrainConfig& tc);

/// Mean teacher-forced loss over a corpus (no parameter updates).
double corpus_loss(const AcsModel& model, const Corpus& corpus, const TrainConfig& tc);

/// Greedy-decoding label error rate with the given decoder head.
double corpus_ler(const AcsModel& model, const Corpus& corpus, std::size_t window);

using EpochCallback = std::function<void(const EpochReport&)>;

/// Trains `model` in place and leaves it holding the best parameters seen
/// (lowest dev label error rate, then lowest dev loss).
TrainReport train(AcsModel& model, const Corpus& train_set, const Corpus& dev_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

extern template UtteranceLoss utterance_loss<ParamStore>(Tape&, ParamStore&, const ModelConfig&,
                                                         const CorpusRecord&, const TrainConfig&);
extern template UtteranceLoss utterance_loss<const ParamStore>(Tape&, const ParamStore&,
                                                               const ModelConfig&,
                                                               const CorpusRecord&,
                                                               const TrainConfig&);

}  // namespace acstep
