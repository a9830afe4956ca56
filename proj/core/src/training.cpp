// SPDX-License-Identifier: Apache-2.0
#include "acstep/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"

#include "acstep/optim.hpp"
#include "acstep/search.hpp"
#include "acstep/vocab.hpp"

namespace acstep {

std::vector<Var> scale_activations_to_length(std::span<const Var> activations,
                                             std::size_t length) {
  if (activations.empty()) throw ContractError("scale_activations_to_length: no activations");
  if (length == 0) throw ContractError("scale_activations_to_length: zero target length");
  Var total = add_n(activations);
  if (!(total.item() > 0.0)) throw NumericError("activations sum to zero");
  Var factor = scale(reciprocal(total), static_cast<double>(length));
  std::vector<Var> out;
  out.reserve(activations.size());
  for (Var a : activations) {
    out.push_back(clamp_max(scale(a, factor), 1.0 - kScaledActivationDelta));
  }
  return out;
}

std::vector<double> scale_activations_to_length(std::span<const double> activations,
                                                std::size_t length) {
  Tape tape(false);
  std::vector<Var> vars;
  vars.reserve(activations.size());
  for (double a : activations) vars.push_back(tape.scalar(a));
  std::vector<double> out;
  out.reserve(activations.size());
  for (Var v : scale_activations_to_length(vars, length)) out.push_back(v.item());
  return out;
}

HaltingTrace segment_to_length(std::span<const double> activations, std::size_t length,
                               double epsilon) {
  const std::size_t n = activations.size();
  if (length == 0) throw ContractError("segment_to_length: zero labels");
  if (n < length) {
    throw ContractError("segment_to_length: " + std::to_string(n) + " steps for " +
                        std::to_string(length) + " labels");
  }
  const double threshold = 1.0 - epsilon;
  HaltingTrace trace;
  trace.activations.assign(activations.begin(), activations.end());
  trace.probabilities = trace.activations;
  double running = 0.0;
  std::size_t begin = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double total = running + activations[j];
    const bool reached = total >= threshold;
    const bool last_label = trace.segments.size() + 1 == length;
    const bool close = last_label ? j + 1 == n
                                  : reached || n - (j + 1) == length - trace.segments.size() - 1;
    if (close) {
      Segment seg{begin, j + 1, 1.0 - running, !reached};
      trace.probabilities[j] = seg.remainder;
      trace.segments.push_back(seg);
      begin = j + 1;
      running = 0.0;
    } else {
      running = total;
    }
    if (trace.segments.size() == length) { if (j + 1 < n) trace.tail = Segment{j + 1, n, 1.0, false}; break; }
  }
  return trace;
}

Var sequence_loss(std::span<const Var> log_probs, std::span<const int> targets) {
  if (log_probs.size() != targets.size()) {
    throw ContractError("sequence_loss: " + std::to_string(log_probs.size()) +
                        " distributions for " + std::to_string(targets.size()) + " targets");
  }
  std::vector<Var> terms;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == Vocab::kPad) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= log_probs[i].size()) {
      throw ContractError("sequence_loss: target out of range");
    }
    terms.push_back(pick(log_probs[i], static_cast<std::size_t>(targets[i])));
  }
  if (terms.empty()) throw ContractError("sequence_loss: no non-pad targets");
  return scale(add_n(terms), -1.0 / static_cast<double>(terms.size()));
}

double sequence_loss(const std::vector<std::vector<double>>& log_probs,
                     std::span<const int> targets) {
  Tape tape(false);
  std::vector<Var> vars;
  vars.reserve(log_probs.size());
  for (const auto& lp : log_probs) vars.push_back(tape.constant(DenseArray::vector(lp)));
  return sequence_loss(vars, targets).item();
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must be in (0, 1]");
  if (!(clip_norm > 0.0) || !(clip_norm_late > 0.0)) throw ConfigError("clip norms must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (mass_loss_weight < 0.0) throw ConfigError("mass_loss_weight must be non-negative");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  AdamConfig{learning_rate, adam_beta1, adam_beta2, adam_epsilon, weight_decay}.validate();
}

std::string epoch_to_json(const EpochReport& e) {
  nlohmann::json j{{"epoch", e.epoch},
                   {"learning_rate", e.learning_rate},
                   {"clip_norm", e.clip_norm},
                   {"train_loss", e.train_loss},
                   {"train_cross_entropy", e.train_cross_entropy},
                   {"train_mass_loss", e.train_mass_loss},
                   {"dev_loss", e.dev_loss},
                   {"dev_ler", e.dev_ler},
                   {"grad_norm_mean", e.grad_norm_mean},
                   {"grad_norm_max", e.grad_norm_max},
                   {"clipped_norm_max", e.clipped_norm_max},
                   {"clipped_fraction", e.clipped_fraction},
                   {"count_mismatch_mean", e.count_mismatch_mean},
                   {"count_match_fraction", e.count_match_fraction},
                   {"improved", e.improved}};
  return j.dump();
}

template <typename Store>
UtteranceLoss utterance_loss(Tape& tape, Store& params, const ModelConfig& cfg,
                             const CorpusRecord& record, const TrainConfig& tc) {
  const std::size_t length = record.labels.size();
  if (length == 0) throw ValidationError(record.id + ": empty label sequence");
  ModelBinding model = bind_model(tape, params, cfg);
  std::vector<Var> frames = frame_vars(tape, record.frames);
  Alignment al = align(model, frames);
  if (al.states.size() < length) {
    throw ValidationError(record.id + ": " + std::to_string(al.states.size()) +
                          " encoder steps for " + std::to_string(length) + " labels");
  }

  std::vector<double> raw(al.activations.size());
  std::transform(al.activations.begin(), al.activations.end(), raw.begin(),
                 [](Var v) { return v.item(); });
  HaltingTrace raw_trace = segment(raw, cfg.halting.epsilon);
  close_tail(raw_trace);

  std::vector<Var> used = tc.scale_activations
                              ? scale_activations_to_length(al.activations, length)
                              : al.activations;
  std::vector<double> used_values(used.size());
  std::transform(used.begin(), used.end(), used_values.begin(), [](Var v) { return v.item(); });
  HaltingTrace trace = segment_to_length(used_values, length, cfg.halting.epsilon);
  std::vector<Var> contexts = pool_contexts(al.states, used, trace);

  Var zero_ctx = tape.zeros(cfg.decoder.context_dim);
  std::vector<Var> head_losses;
  for (const auto& [w, head] : model.heads) {
    Var state = tape.zeros(head.units);
    int prev = Vocab::kSos;
    std::vector<Var> log_probs;
    log_probs.reserve(length);
    for (std::size_t i = 0; i < length; ++i) {
      DecoderStep step = decode_step(head, state, prev, window_contexts(contexts, i, w, zero_ctx));
      log_probs.push_back(step.log_probs);
      state = step.state;
      prev = record.labels[i];
    }
    head_losses.push_back(sequence_loss(log_probs, record.labels));
  }
  Var ce = scale(add_n(head_losses), 1.0 / static_cast<double>(head_losses.size()));
  Var excess = shift(add_n(al.activations), -static_cast<double>(length));
  Var mass = scale(square(excess), 1.0 / static_cast<double>(length));
  std::vector<Var> overshoot;
  for (const Segment& seg : raw_trace.segments) {
    if (seg.forced) continue;
    std::span<const Var> part(al.activations.data() + seg.begin, seg.length());
    overshoot.push_back(square(shift(add_n(part), -1.0)));
  }
  Var unit = overshoot.empty() ? tape.scalar(0.0)
                               : scale(add_n(overshoot), 1.0 / static_cast<double>(length));
  Var total = ce;
  if (tc.mass_loss_weight > 0.0) total = add(total, scale(mass, tc.mass_loss_weight));
  if (tc.unit_mass_weight > 0.0) total = add(total, scale(unit, tc.unit_mass_weight));
  return {total, ce, add(mass, unit), raw_trace.segments.size()};
}

template UtteranceLoss utterance_loss<ParamStore>(Tape&, ParamStore&, const ModelConfig&,
                                                  const CorpusRecord&, const TrainConfig&);
template UtteranceLoss utterance_loss<const ParamStore>(Tape&, const ParamStore&,
                                                        const ModelConfig&, const CorpusRecord&,
                                                        const TrainConfig&);

double corpus_loss(const AcsModel& model, const Corpus& corpus, const TrainConfig& tc) {
  if (corpus.empty()) return 0.0;
  double total = 0.0;
  for (const CorpusRecord& r : corpus) {
    Tape tape(false);
    total += utterance_loss(tape, model.params, model.config, r, tc).total.item();
  }
  return total / static_cast<double>(corpus.size());
}

double corpus_ler(const AcsModel& model, const Corpus& corpus, std::size_t window) {
  if (corpus.empty()) return 0.0;
  std::vector<std::vector<int>> hyps;
  hyps.reserve(corpus.size());
  for (const CorpusRecord& r : corpus) {
    hyps.push_back(greedy_decode(model, r.frames, nullptr, 0.0, window).best().symbols);
  }
  return label_error_rate(corpus_labels(corpus), hyps);
}

namespace {

bool better(const EpochReport& a, double best_ler, double best_loss) {
  if (a.dev_ler != best_ler) return a.dev_ler < best_ler;
  return a.dev_loss < best_loss;
}

}  // namespace

TrainReport train(AcsModel& model, const Corpus& train_set, const Corpus& dev_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("empty training set");
  if (!model.config.decoder.has_window(cfg.eval_window)) {
    throw ConfigError("eval_window " + std::to_string(cfg.eval_window) + " has no decoder head");
  }
  AdamState adam{{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon,
                  cfg.weight_decay},
                 0,
                 {}};
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainReport report;
  ParamStore best = model.params;
  double best_ler = INFINITY;
  double best_loss = INFINITY;
  std::size_t stale = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochReport er;
    er.epoch = epoch;
    er.learning_rate = cfg.learning_rate * std::pow(cfg.lr_decay, static_cast<double>(epoch - 1));
    er.clip_norm = cfg.clip_for_epoch(epoch);
    std::shuffle(order.begin(), order.end(), rng);

    std::size_t updates = 0;
    std::size_t clipped = 0;
    double mismatch = 0.0;
    std::size_t matches = 0;
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
        model.params.zero_grad();
        for (std::size_t k = start; k < stop; ++k) {
          const CorpusRecord& rec = train_set[order[k]];
          Tape tape;
          UtteranceLoss ul = utterance_loss(tape, model.params, model.config, rec, cfg);
          if (!std::isfinite(ul.total.item())) throw NumericError(rec.id + ": non-finite loss");
          tape.backward(ul.total);
          er.train_loss += ul.total.item();
          er.train_cross_entropy += ul.cross_entropy.item();
          er.train_mass_loss += ul.mass.item();
          const double diff = std::fabs(static_cast<double>(ul.raw_segments) -
                                        static_cast<double>(rec.labels.size()));
          mismatch += diff;
          if (diff == 0.0) ++matches;
        }
        model.params.scale_grad(1.0 / static_cast<double>(stop - start));
        const double norm = global_grad_norm(model.params);
        er.grad_norm_mean += norm;
        er.grad_norm_max = std::max(er.grad_norm_max, norm);
        const double factor = clip_global_norm(model.params, er.clip_norm);
        if (factor < 1.0) ++clipped;
        er.clipped_norm_max = std::max(er.clipped_norm_max, norm * factor);
        adam_step(model.params, adam, er.learning_rate);
        ++updates;
      }
    } catch (const NumericError& e) {
      throw TrainingDiverged("epoch " + std::to_string(epoch) + ": " + e.what(), report);
    }

    const double n = static_cast<double>(train_set.size());
    er.train_loss /= n;
    er.train_cross_entropy /= n;
    er.train_mass_loss /= n;
    er.count_mismatch_mean = mismatch / n;
    er.count_match_fraction = static_cast<double>(matches) / n;
    er.grad_norm_mean /= static_cast<double>(updates);
    er.clipped_fraction = static_cast<double>(clipped) / static_cast<double>(updates);
    if (dev_set.empty()) {
      er.dev_loss = er.train_loss;
    } else {
      er.dev_loss = corpus_loss(model, dev_set, cfg);
      er.dev_ler = corpus_ler(model, dev_set, cfg.eval_window);
    }

    er.improved = better(er, best_ler, best_loss);
    if (er.improved) {
      best = model.params;
      best_ler = er.dev_ler;
      best_loss = er.dev_loss;
      report.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }
    report.epochs.push_back(er);
    if (on_epoch) on_epoch(er);
    if (cfg.patience > 0 && stale >= cfg.patience) {
      report.early_stopped = true;
      break;
    }
  }
  model.params = std::move(best);
  return report;
}

}  // namespace acstep
