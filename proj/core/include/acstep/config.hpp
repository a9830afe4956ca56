// SPDX-License-Identifier: Apache-2.0
//
// Flat `key = value` configuration files. Blank lines and lines starting
// with '#' are ignored. Keys are dotted (`train.epochs`, `encoder.units`);
// lists are comma separated (`decoder.windows = 0,1`).
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "acstep/lm.hpp"
#include "acstep/model.hpp"
#include "acstep/tasks.hpp"
#include "acstep/training.hpp"

namespace acstep {

class KeyValues {
 public:
  /// Throws ConfigError on a malformed line; `source` prefixes messages.
  static KeyValues parse(std::string_view text, const std::string& source = "config");
  static KeyValues load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }
  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  const std::map<std::string, std::string>& entries() const { return entries_; }
  /// Later values win.
  void merge(const KeyValues& other);

  /// Sorted `key = value` lines.
  std::string dump() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> entries_;
};

/// Everything one experiment needs: data, model, optimizer and LM.
struct ExperimentConfig {
  TaskConfig task;
  ModelConfig model;
  TrainConfig train;
  LmConfig lm;
  LmTrainConfig lm_train;
  double init_range = 0.1;
  std::uint64_t init_seed = 1;

  ExperimentConfig();

  /// Fills dimensions that follow from other fields (input, context and
  /// vocabulary sizes) and validates.
  void resolve();

  /// Applies the given keys; unknown keys and unparsable values throw ConfigError.
  void apply(const KeyValues& kv);
  KeyValues to_key_values() const;
};

/// Model keys only (`encoder.*`, `halting.*`, `decoder.*`).
KeyValues model_key_values(const ModelConfig& cfg);
ModelConfig model_config_from(const KeyValues& kv);
KeyValues lm_key_values(const LmConfig& cfg);
LmConfig lm_config_from(const KeyValues& kv);

/// Path of the configuration stored next to a checkpoint.
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

}  // namespace acstep
