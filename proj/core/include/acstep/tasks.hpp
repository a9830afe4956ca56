// SPDX-License-Identifier: Apache-2.0
//
// Synthetic transduction corpora with speech-like structure: every label
// is rendered as a run of k noisy copies of a fixed prototype vector, so
// segment boundaries exist but are never given to the model.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "acstep/dense_array.hpp"
#include "acstep/encoder.hpp"
#include "acstep/vocab.hpp"

namespace acstep {

struct TaskConfig {
  /// Label symbols, excluding the four reserved tokens.
  std::size_t vocab_size = 8;
  std::size_t frame_dim = 8;
  std::size_t frames_per_label_min = 4;
  std::size_t frames_per_label_max = 8;
  double noise_std = 0.1;
  std::size_t labels_min = 3;
  std::size_t labels_max = 8;
  std::size_t train_size = 2000;
  std::size_t dev_size = 200;
  std::size_t test_size = 200;
  /// Label-only sequences for language-model training.
  std::size_t lm_text_size = 5000;
  /// Label sequences follow a fixed deterministic successor chain.
  bool bigram = false;
  /// Utterances longer than this are discarded and regenerated.
  std::size_t max_frames = 1000;
  std::uint64_t seed = 1;

  void validate() const;
};

struct CorpusRecord {
  std::string id;
  FrameSequence frames;
  /// Vocabulary ids; never reserved tokens.
  std::vector<int> labels;
  /// Exclusive end frame of each label run. Diagnostics only.
  std::vector<std::size_t> bounds;
};

using Corpus = std::vector<CorpusRecord>;

struct GeneratedCorpus {
  Vocab vocab;
  Corpus train;
  Corpus dev;
  Corpus test;
  std::vector<std::vector<int>> lm_text;
  /// Prototype mean of each label, indexed by vocabulary id.
  std::vector<DenseArray> prototypes;
  /// Draws rejected by the max-frames rule.
  std::size_t regenerated = 0;
};

GeneratedCorpus generate_corpus(const TaskConfig& cfg);

/// Successor of each label under the bigram chain (indexed by vocabulary
/// id; reserved ids map to themselves). Pure function of the seed.
std::vector<int> bigram_successors(const TaskConfig& cfg);

/// Label sequences of a corpus.
std::vector<std::vector<int>> corpus_labels(const Corpus& corpus);

/// Substitutions + insertions + deletions turning `ref` into `hyp`.
std::size_t edit_distance(const std::vector<int>& ref, const std::vector<int>& hyp);

/// Total edit distance over total reference length.
double label_error_rate(const std::vector<std::vector<int>>& refs,
                        const std::vector<std::vector<int>>& hyps);

/// Encoder step (0-based) that contains the last frame of each label.
std::vector<std::size_t> boundary_steps(const CorpusRecord& record, const EncoderConfig& cfg);

}  // namespace acstep
