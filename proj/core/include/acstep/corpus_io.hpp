// SPDX-License-Identifier: Apache-2.0
//
// Corpus files are JSON lines, one object per utterance:
//   {"id": "...", "frames": [[...], ...], "labels": [...], "bounds": [...]}
// `bounds` is optional. Label text for the language model is one sequence
// per line with space-separated vocabulary symbols.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "acstep/tasks.hpp"
#include "acstep/vocab.hpp"

namespace acstep {

std::string record_to_json(const CorpusRecord& record);
CorpusRecord record_from_json(const std::string& line);

void write_corpus(const std::filesystem::path& path, const Corpus& corpus);
Corpus read_corpus(const std::filesystem::path& path);

void write_label_text(const std::filesystem::path& path,
                      const std::vector<std::vector<int>>& sequences, const Vocab& vocab);
/// Unknown symbols are a ValidationError.
std::vector<std::vector<int>> read_label_text(const std::filesystem::path& path,
                                              const Vocab& vocab);

/// Every label id is a non-reserved vocabulary entry and every frame has
/// `frame_dim` entries. Throws ValidationError naming the first offender.
void validate_corpus(const Corpus& corpus, const Vocab& vocab, std::size_t frame_dim);

}  // namespace acstep
