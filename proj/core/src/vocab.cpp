// SPDX-License-Identifier: Apache-2.0
#include "acstep/vocab.hpp"

#include <fstream>

#include "acstep/errors.hpp"

namespace acstep {

namespace {
const char* const kSpecials[Vocab::kSpecialCount] = {"<PAD>", "<UNK>", "<SOS>", "<EOS>"};
}

Vocab::Vocab() {
  for (const char* s : kSpecials) add(s);
}

Vocab Vocab::with_labels(std::size_t labels) {
  Vocab v;
  for (std::size_t i = 0; i < labels; ++i) v.add("l" + std::to_string(i));
  return v;
}

Vocab Vocab::parse(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() < kSpecialCount) throw ValidationError("vocab file has fewer than four lines");
  for (std::size_t i = 0; i < kSpecialCount; ++i) {
    if (lines[i] != kSpecials[i]) {
      throw ValidationError("vocab line " + std::to_string(i + 1) + " must be " + kSpecials[i]);
    }
  }
  Vocab v;
  for (std::size_t i = kSpecialCount; i < lines.size(); ++i) {
    if (lines[i].empty()) throw ValidationError("empty symbol on vocab line " + std::to_string(i + 1));
    try {
      v.add(lines[i]);
    } catch (const ContractError&) {
      throw ValidationError("duplicate vocab symbol '" + lines[i] + "'");
    }
  }
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocab file: " + path.string());
  return parse(in);
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const auto& s : symbols_) out << s << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

int Vocab::add(const std::string& symbol) {
  if (index_.count(symbol)) throw ContractError("duplicate symbol '" + symbol + "'");
  const int id = static_cast<int>(symbols_.size());
  symbols_.push_back(symbol);
  index_.emplace(symbol, id);
  return id;
}

int Vocab::id(const std::string& symbol) const {
  auto it = index_.find(symbol);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::symbol(int id) const {
  if (!contains(id)) throw ContractError("symbol id " + std::to_string(id) + " out of range");
  return symbols_[static_cast<std::size_t>(id)];
}

}  // namespace acstep
