// SPDX-License-Identifier: Apache-2.0
#include "acstep/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "acstep/errors.hpp"

namespace acstep {

namespace {

// Stream identifiers mixed into the master seed.
constexpr std::uint64_t kPrototypeStream = 1;
constexpr std::uint64_t kChainStream = 2;
constexpr std::uint64_t kUtteranceStream = 3;
constexpr std::uint64_t kLmStream = 4;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

int first_label() { return static_cast<int>(Vocab::kSpecialCount); }

std::vector<int> draw_labels(const TaskConfig& cfg, const std::vector<int>& succ,
                             std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len(cfg.labels_min, cfg.labels_max);
  std::uniform_int_distribution<int> sym(first_label(),
                                         first_label() + static_cast<int>(cfg.vocab_size) - 1);
  std::uniform_int_distribution<int> other(first_label(),
                                           first_label() + static_cast<int>(cfg.vocab_size) - 2);
  const std::size_t n = len(rng);
  std::vector<int> labels;
  labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      labels.push_back(sym(rng));
    } else if (cfg.bigram) {
      labels.push_back(succ[static_cast<std::size_t>(labels.back())]);
    } else {
      // Equal neighbours would merge into one run, so skip the previous symbol.
      int s = other(rng);
      if (s >= labels.back()) ++s;
      labels.push_back(s);
    }
  }
  return labels;
}

CorpusRecord make_record(const TaskConfig& cfg, const std::vector<DenseArray>& prototypes,
                         const std::vector<int>& succ, std::size_t index, const std::string& id,
                         std::size_t& regenerated) {
  std::mt19937_64 rng = make_rng(cfg.seed, kUtteranceStream, index);
  std::uniform_int_distribution<std::size_t> run(cfg.frames_per_label_min,
                                                 cfg.frames_per_label_max);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (;;) {
    CorpusRecord rec;
    rec.id = id;
    rec.frames.id = id;
    rec.labels = draw_labels(cfg, succ, rng);
    std::vector<std::size_t> runs;
    std::size_t total = 0;
    for (std::size_t i = 0; i < rec.labels.size(); ++i) {
      runs.push_back(run(rng));
      total += runs.back();
    }
    if (total > cfg.max_frames) {
      ++regenerated;
      continue;
    }
    for (std::size_t i = 0; i < rec.labels.size(); ++i) {
      const DenseArray& mu = prototypes[static_cast<std::size_t>(rec.labels[i])];
      for (std::size_t k = 0; k < runs[i]; ++k) {
        DenseArray f = mu;
        if (cfg.noise_std > 0.0) {
          for (double& x : f.data()) x += cfg.noise_std * noise(rng);
        }
        rec.frames.frames.push_back(std::move(f));
      }
      rec.bounds.push_back(rec.frames.frames.size());
    }
    return rec;
  }
}

}  // namespace

void TaskConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("task vocabulary needs at least two labels");
  if (frame_dim < 1) throw ConfigError("frame dimension must be positive");
  if (frames_per_label_min < 1 || frames_per_label_min > frames_per_label_max) {
    throw ConfigError("frames-per-label range must satisfy 1 <= min <= max");
  }
  if (!(noise_std >= 0.0)) throw ConfigError("noise standard deviation must be non-negative");
  if (labels_min < 1 || labels_min > labels_max) {
    throw ConfigError("labels-per-utterance range must satisfy 1 <= min <= max");
  }
  if (max_frames < labels_min * frames_per_label_min) {
    throw ConfigError("max frames admits no utterance (below the shortest possible length)");
  }
}

std::vector<int> bigram_successors(const TaskConfig& cfg) {
  const std::size_t total = Vocab::kSpecialCount + cfg.vocab_size;
  std::vector<int> succ(total);
  for (std::size_t i = 0; i < total; ++i) succ[i] = static_cast<int>(i);
  // Single cycle over the labels (Sattolo), so no label succeeds itself.
  std::vector<int> cycle(cfg.vocab_size);
  for (std::size_t i = 0; i < cfg.vocab_size; ++i) cycle[i] = first_label() + static_cast<int>(i);
  std::mt19937_64 rng = make_rng(cfg.seed, kChainStream, 0);
  for (std::size_t i = cfg.vocab_size - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(cycle[i], cycle[pick(rng)]);
  }
  for (std::size_t i = 0; i < cfg.vocab_size; ++i) {
    succ[static_cast<std::size_t>(cycle[i])] = cycle[(i + 1) % cfg.vocab_size];
  }
  return succ;
}

GeneratedCorpus generate_corpus(const TaskConfig& cfg) {
  cfg.validate();
  GeneratedCorpus out;
  out.vocab = Vocab::with_labels(cfg.vocab_size);

  // Unit-norm prototypes: separation is set by noise_std alone.
  std::mt19937_64 prng = make_rng(cfg.seed, kPrototypeStream, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  out.prototypes.assign(out.vocab.size(), DenseArray::zeros(cfg.frame_dim));
  for (std::size_t v = Vocab::kSpecialCount; v < out.vocab.size(); ++v) {
    DenseArray mu = DenseArray::zeros(cfg.frame_dim);
    double norm = 0.0;
    while (norm < 1e-6) {
      for (double& x : mu.data()) x = gauss(prng);
      norm = std::sqrt(squared_norm(mu));
    }
    for (double& x : mu.data()) x /= norm;
    out.prototypes[v] = std::move(mu);
  }

  const std::vector<int> succ = bigram_successors(cfg);
  std::size_t index = 0;
  auto fill = [&](Corpus& split, std::size_t n, const char* name) {
    split.reserve(n);
    for (std::size_t i = 0; i < n; ++i, ++index) {
      split.push_back(make_record(cfg, out.prototypes, succ, index,
                                  std::string(name) + "-" + std::to_string(i), out.regenerated));
    }
  };
  fill(out.train, cfg.train_size, "train");
  fill(out.dev, cfg.dev_size, "dev");
  fill(out.test, cfg.test_size, "test");

  out.lm_text.reserve(cfg.lm_text_size);
  for (std::size_t i = 0; i < cfg.lm_text_size; ++i) {
    std::mt19937_64 rng = make_rng(cfg.seed, kLmStream, i);
    out.lm_text.push_back(draw_labels(cfg, succ, rng));
  }
  return out;
}

std::vector<std::vector<int>> corpus_labels(const Corpus& corpus) {
  std::vector<std::vector<int>> out;
  out.reserve(corpus.size());
  for (const auto& r : corpus) out.push_back(r.labels);
  return out;
}

std::size_t edit_distance(const std::vector<int>& ref, const std::vector<int>& hyp) {
  std::vector<std::size_t> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

double label_error_rate(const std::vector<std::vector<int>>& refs,
                        const std::vector<std::vector<int>>& hyps) {
  if (refs.size() != hyps.size()) {
    throw ContractError("label_error_rate: " + std::to_string(refs.size()) + " references vs " +
                        std::to_string(hyps.size()) + " hypotheses");
  }
  std::size_t dist = 0;
  std::size_t len = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    dist += edit_distance(refs[i], hyps[i]);
    len += refs[i].size();
  }
  if (len == 0) throw ContractError("label_error_rate: empty reference set");
  return static_cast<double>(dist) / static_cast<double>(len);
}

std::vector<std::size_t> boundary_steps(const CorpusRecord& record, const EncoderConfig& cfg) {
  const std::size_t f = cfg.factor();
  std::vector<std::size_t> out;
  out.reserve(record.bounds.size());
  for (std::size_t end : record.bounds) out.push_back((end - 1) / f);
  return out;
}

}  // namespace acstep
