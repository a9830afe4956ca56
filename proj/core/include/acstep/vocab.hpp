// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <string>
#include <unordered_map>
#include <vector>

namespace acstep {

/// Symbol table with dense ids. Ids 0..3 are the reserved tokens.
///
/// File form: UTF-8 text, one symbol per line, line number = id; the first
/// four lines are <PAD>, <UNK>, <SOS>, <EOS>.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kSos = 2;
  static constexpr int kEos = 3;
  static constexpr std::size_t kSpecialCount = 4;

  /// Vocabulary holding only the reserved tokens.
  Vocab();

  /// Reserved tokens followed by `labels` generated symbols l0, l1, ...
  static Vocab with_labels(std::size_t labels);

  static Vocab parse(std::istream& in);
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Appends a symbol and returns its id. Duplicates are rejected.
  int add(const std::string& symbol);

  /// Id of `symbol`, or kUnk when absent.
  int id(const std::string& symbol) const;
  const std::string& symbol(int id) const;
  bool contains(int id) const { return id >= 0 && static_cast<std::size_t>(id) < symbols_.size(); }
  static bool is_special(int id) { return id >= 0 && id < static_cast<int>(kSpecialCount); }

  std::size_t size() const { return symbols_.size(); }
  const std::vector<std::string>& symbols() const { return symbols_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.symbols_ == b.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace acstep
