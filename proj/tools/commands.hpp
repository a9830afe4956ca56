// SPDX-License-Identifier: Apache-2.0
//
// Subcommands of the acstep tool, callable without going through argv so
// tests can drive them directly.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "acstep/config.hpp"
#include "acstep/lm.hpp"
#include "acstep/model.hpp"
#include "acstep/search.hpp"
#include "acstep/training.hpp"
#include "acstep/vocab.hpp"

namespace acstep::cli {

namespace fs = std::filesystem;

/// Writes train.jsonl, dev.jsonl, test.jsonl, lm_text.txt, vocab.txt and
/// config.txt into `out_dir`.
void gen_data(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& log);

/// Trains on `data_dir`/{train,dev}.jsonl and writes model.ckpt (+ .cfg),
/// train_report.jsonl and config.txt into `out_dir`.
TrainReport train_model(const ExperimentConfig& cfg, const fs::path& data_dir,
                        const fs::path& out_dir, const std::optional<fs::path>& resume,
                        std::ostream& log);

/// Trains the language model on `data_dir`/lm_text.txt and writes lm.ckpt
/// (+ .cfg), lm_report.jsonl and config.txt into `out_dir`.
std::vector<double> train_language_model(const ExperimentConfig& cfg, const fs::path& data_dir,
                                         const fs::path& out_dir, std::ostream& log);

void save_model(const fs::path& checkpoint, const AcsModel& model);
AcsModel load_model(const fs::path& checkpoint);
void save_language_model(const fs::path& checkpoint, const LanguageModel& lm);
LanguageModel load_language_model(const fs::path& checkpoint);

struct DecodeOptions {
  fs::path checkpoint;
  fs::path corpus;
  fs::path output;
  std::optional<fs::path> lm;
  std::optional<fs::path> vocab;
  BeamConfig beam;
  bool online = false;
};

/// Writes one `id<TAB>symbols<TAB>score` line per utterance, or
/// `id<TAB>rank<TAB>symbols<TAB>score` lines when nbest > 1.
void decode(const DecodeOptions& opts);

struct Transcript {
  std::string id;
  std::vector<std::string> symbols;
  double score = 0.0;
};

/// Reads top-1 lines (the rank-1 line of n-best files).
std::vector<Transcript> read_transcripts(const fs::path& path);
std::string format_transcript(const std::string& id, const Hypothesis& hyp, const Vocab& vocab);

struct UtteranceScore {
  std::string id;
  std::size_t errors = 0;
  std::size_t ref_length = 0;
};

struct EvalReport {
  double ler = 0.0;
  std::vector<UtteranceScore> utterances;
};

/// Scores transcripts against the reference corpus. Ids present on only
/// one side are listed in a ValidationError.
EvalReport evaluate(const fs::path& refs, const fs::path& transcripts,
                    const std::optional<fs::path>& vocab);
void print_eval(const EvalReport& report, std::ostream& out);

struct AlignmentRow {
  std::size_t step = 0;
  double activation = 0.0;
  double running_sum = 0.0;
  double probability = 0.0;
  std::size_t segment = 0;
  bool emitted = false;
};

/// One row per encoder step.
std::vector<AlignmentRow> alignment_rows(const HaltingTrace& trace);
void print_alignment(const std::vector<AlignmentRow>& rows, std::ostream& out);
/// Static SVG: activation bars, running sum and segment boundaries, with
/// optional ground-truth boundary ticks.
std::string alignment_svg(const std::vector<AlignmentRow>& rows,
                          const std::vector<std::size_t>& true_boundaries);

void inspect_alignment(const fs::path& checkpoint, const fs::path& corpus,
                       const std::string& utterance, const std::optional<fs::path>& svg,
                       std::ostream& out);

GammaSearchResult tune_gamma(const fs::path& checkpoint, const fs::path& lm,
                             const fs::path& dev_corpus, const BeamConfig& beam,
                             const std::vector<double>& grid);

/// Vocabulary from an explicit file, else the default labels for the
/// model's output size.
Vocab resolve_vocab(const std::optional<fs::path>& path, std::size_t vocab_size);

/// Loads a config file (when given) and applies `--key value` overrides.
ExperimentConfig load_experiment(const std::optional<fs::path>& file,
                                 const std::vector<std::string>& overrides);

}  // namespace acstep::cli
