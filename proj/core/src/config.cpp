// SPDX-License-Identifier: Apache-2.0
#include "acstep/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "acstep/errors.hpp"

namespace acstep {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("empty item in list '" + s + "'");
    out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string format_double(double d) {
  std::ostringstream out;
  out.precision(17);
  out << d;
  return out.str();
}

struct Field {
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

class Fields {
 public:
  void add(const std::string& key, std::size_t& f) {
    fields_[key] = {[&f] { return std::to_string(f); },
                    [&f, key](const std::string& v) { f = parse_integer<std::size_t>(key, v); }};
  }
  void add_u64(const std::string& key, std::uint64_t& f) {
    fields_[key] = {[&f] { return std::to_string(f); },
                    [&f, key](const std::string& v) { f = parse_integer<std::uint64_t>(key, v); }};
  }
  void add(const std::string& key, double& f) {
    fields_[key] = {[&f] { return format_double(f); },
                    [&f, key](const std::string& v) { f = parse_double(key, v); }};
  }
  void add(const std::string& key, bool& f) {
    fields_[key] = {[&f] { return std::string(f ? "true" : "false"); },
                    [&f, key](const std::string& v) { f = parse_bool(key, v); }};
  }
  void add(const std::string& key, std::vector<bool>& f) {
    fields_[key] = {[&f] {
                      std::string s;
                      for (std::size_t i = 0; i < f.size(); ++i) s += (i ? "," : "") + std::string(f[i] ? "1" : "0");
                      return s;
                    },
                    [&f, key](const std::string& v) {
                      f.clear();
                      for (const auto& item : split_list(v)) f.push_back(parse_bool(key, item));
                    }};
  }
  void add(const std::string& key, std::vector<std::size_t>& f) {
    fields_[key] = {[&f] {
                      std::string s;
                      for (std::size_t i = 0; i < f.size(); ++i) s += (i ? "," : "") + std::to_string(f[i]);
                      return s;
                    },
                    [&f, key](const std::string& v) {
                      f.clear();
                      for (const auto& item : split_list(v)) f.push_back(parse_integer<std::size_t>(key, item));
                    }};
  }

  void apply(const KeyValues& kv) const {
    for (const auto& [k, v] : kv.entries()) {
      auto it = fields_.find(k);
      if (it == fields_.end()) throw ConfigError("unknown config key '" + k + "'");
      it->second.set(v);
    }
  }
  KeyValues dump() const {
    KeyValues kv;
    for (const auto& [k, f] : fields_) kv.set(k, f.get());
    return kv;
  }

 private:
  std::map<std::string, Field> fields_;
};

void bind(Fields& f, TaskConfig& t) {
  f.add("task.vocab_size", t.vocab_size);
  f.add("task.frame_dim", t.frame_dim);
  f.add("task.frames_per_label_min", t.frames_per_label_min);
  f.add("task.frames_per_label_max", t.frames_per_label_max);
  f.add("task.noise_std", t.noise_std);
  f.add("task.labels_min", t.labels_min);
  f.add("task.labels_max", t.labels_max);
  f.add("task.train_size", t.train_size);
  f.add("task.dev_size", t.dev_size);
  f.add("task.test_size", t.test_size);
  f.add("task.lm_text_size", t.lm_text_size);
  f.add("task.bigram", t.bigram);
  f.add("task.max_frames", t.max_frames);
  f.add_u64("task.seed", t.seed);
}

void bind(Fields& f, ModelConfig& m) {
  f.add("encoder.input_dim", m.encoder.input_dim);
  f.add("encoder.layers", m.encoder.layers);
  f.add("encoder.units", m.encoder.units);
  f.add("encoder.downsample", m.encoder.downsample);
  f.add("encoder.bidirectional", m.encoder.bidirectional);
  f.add("halting.epsilon", m.halting.epsilon);
  f.add("halting.kernel_width", m.halting.kernel_width);
  f.add("halting.channels", m.halting.channels);
  f.add("decoder.units", m.decoder.units);
  f.add("decoder.embed_dim", m.decoder.embed_dim);
  f.add("decoder.context_dim", m.decoder.context_dim);
  f.add("decoder.vocab_size", m.decoder.vocab_size);
  f.add("decoder.windows", m.decoder.windows);
}

void bind(Fields& f, TrainConfig& t) {
  f.add("train.epochs", t.epochs);
  f.add("train.learning_rate", t.learning_rate);
  f.add("train.lr_decay", t.lr_decay);
  f.add("train.clip_norm", t.clip_norm);
  f.add("train.clip_norm_late", t.clip_norm_late);
  f.add("train.clip_switch_epoch", t.clip_switch_epoch);
  f.add("train.batch_size", t.batch_size);
  f.add("train.patience", t.patience);
  f.add("train.scale_activations", t.scale_activations);
  f.add("train.mass_loss_weight", t.mass_loss_weight);
  f.add("train.unit_mass_weight", t.unit_mass_weight);
  f.add("train.weight_decay", t.weight_decay);
  f.add("train.adam_beta1", t.adam_beta1);
  f.add("train.adam_beta2", t.adam_beta2);
  f.add("train.adam_epsilon", t.adam_epsilon);
  f.add("train.eval_window", t.eval_window);
  f.add_u64("train.seed", t.seed);
}

void bind(Fields& f, LmConfig& l) {
  f.add("lm.units", l.units);
  f.add("lm.embed_dim", l.embed_dim);
  f.add("lm.vocab_size", l.vocab_size);
}

void bind(Fields& f, LmTrainConfig& l) {
  f.add("lm_train.epochs", l.epochs);
  f.add("lm_train.learning_rate", l.learning_rate);
  f.add("lm_train.clip_norm", l.clip_norm);
  f.add("lm_train.init_range", l.init_range);
  f.add_u64("lm_train.seed", l.seed);
}

Fields experiment_fields(ExperimentConfig& c) {
  Fields f;
  bind(f, c.task);
  bind(f, c.model);
  bind(f, c.train);
  bind(f, c.lm);
  bind(f, c.lm_train);
  f.add("init.range", c.init_range);
  f.add_u64("init.seed", c.init_seed);
  return f;
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text, const std::string& source) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
    kv.set(key, trim(std::string_view(line).substr(eq + 1)));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

const std::string& KeyValues::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

void KeyValues::merge(const KeyValues& other) {
  for (const auto& [k, v] : other.entries_) entries_[k] = v;
}

std::string KeyValues::dump() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

void KeyValues::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write config " + path.string());
  out << dump();
  if (!out) throw IoError("failed writing " + path.string());
}

ExperimentConfig::ExperimentConfig() { model.decoder.windows = {0, 1}; }

void ExperimentConfig::resolve() {
  task.validate();
  const std::size_t vocab = task.vocab_size + 4;
  model.encoder.input_dim = task.frame_dim;
  model.decoder.context_dim = model.encoder.output_dim();
  model.decoder.vocab_size = vocab;
  lm.vocab_size = vocab;
  model.validate();
  lm.validate();
  train.validate();
  lm_train.validate();
  if (!(init_range > 0.0)) throw ConfigError("init.range must be positive");
}

void ExperimentConfig::apply(const KeyValues& kv) { experiment_fields(*this).apply(kv); }

KeyValues ExperimentConfig::to_key_values() const {
  ExperimentConfig copy = *this;
  return experiment_fields(copy).dump();
}

KeyValues model_key_values(const ModelConfig& cfg) {
  ModelConfig copy = cfg;
  Fields f;
  bind(f, copy);
  return f.dump();
}

ModelConfig model_config_from(const KeyValues& kv) {
  ModelConfig cfg;
  Fields f;
  bind(f, cfg);
  f.apply(kv);
  cfg.validate();
  return cfg;
}

KeyValues lm_key_values(const LmConfig& cfg) {
  LmConfig copy = cfg;
  Fields f;
  bind(f, copy);
  return f.dump();
}

LmConfig lm_config_from(const KeyValues& kv) {
  LmConfig cfg;
  Fields f;
  bind(f, cfg);
  f.apply(kv);
  cfg.validate();
  return cfg;
}

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".cfg");
}

}  // namespace acstep
