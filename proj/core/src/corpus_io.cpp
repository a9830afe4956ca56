// SPDX-License-Identifier: Apache-2.0
#include "acstep/corpus_io.hpp"

#include <fstream>
#include <sstream>

#include "acstep/errors.hpp"
#include "json.hpp"

namespace acstep {

using nlohmann::json;

std::string record_to_json(const CorpusRecord& record) {
  json j;
  j["id"] = record.id;
  json frames = json::array();
  for (const DenseArray& f : record.frames.frames) frames.push_back(f.values());
  j["frames"] = std::move(frames);
  j["labels"] = record.labels;
  if (!record.bounds.empty()) j["bounds"] = record.bounds;
  return j.dump();
}

CorpusRecord record_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("malformed corpus line: ") + e.what());
  }
  try {
    CorpusRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.frames.id = rec.id;
    for (const auto& f : j.at("frames")) {
      rec.frames.frames.push_back(DenseArray::vector(f.get<std::vector<double>>()));
    }
    rec.labels = j.at("labels").get<std::vector<int>>();
    if (j.contains("bounds")) rec.bounds = j.at("bounds").get<std::vector<std::size_t>>();
    return rec;
  } catch (const json::exception& e) {
    throw IoError(std::string("corpus record has missing or mistyped fields: ") + e.what());
  }
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const auto& rec : corpus) out << record_to_json(rec) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

Corpus read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus: " + path.string());
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      corpus.push_back(record_from_json(line));
    } catch (const IoError& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return corpus;
}

void write_label_text(const std::filesystem::path& path,
                      const std::vector<std::vector<int>>& sequences, const Vocab& vocab) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const auto& seq : sequences) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) out << ' ';
      out << vocab.symbol(seq[i]);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::vector<int>> read_label_text(const std::filesystem::path& path,
                                              const Vocab& vocab) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label text: " + path.string());
  std::vector<std::vector<int>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::vector<int> seq;
    std::string sym;
    while (ss >> sym) {
      const int id = vocab.id(sym);
      if (id == Vocab::kUnk && sym != "<UNK>") {
        throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                              ": symbol '" + sym + "' not in vocabulary");
      }
      seq.push_back(id);
    }
    if (!seq.empty()) out.push_back(std::move(seq));
  }
  return out;
}

void validate_corpus(const Corpus& corpus, const Vocab& vocab, std::size_t frame_dim) {
  for (const auto& rec : corpus) {
    if (rec.frames.frames.empty()) throw ValidationError("utterance '" + rec.id + "' has no frames");
    for (const DenseArray& f : rec.frames.frames) {
      if (f.size() != frame_dim) {
        throw ValidationError("utterance '" + rec.id + "' has frames of dimension " +
                              std::to_string(f.size()) + ", expected " +
                              std::to_string(frame_dim));
      }
    }
    if (rec.labels.empty()) throw ValidationError("utterance '" + rec.id + "' has no labels");
    for (int y : rec.labels) {
      if (!vocab.contains(y) || Vocab::is_special(y)) {
        throw ValidationError("utterance '" + rec.id + "' has label id " + std::to_string(y) +
                              " outside the vocabulary");
      }
    }
  }
}

}  // namespace acstep
