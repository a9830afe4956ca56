// SPDX-License-Identifier: Apache-2.0
#include "acstep/search.hpp"

#include <algorithm>

#include "acstep/errors.hpp"
#include "acstep/tasks.hpp"
#include "acstep/vocab.hpp"

namespace acstep {

namespace {

void check_lm(const AcsModel& model, const LanguageModel* lm) {
  if (lm && lm->config.vocab_size != model.config.decoder.vocab_size) {
    throw ValidationError("LM vocabulary size " + std::to_string(lm->config.vocab_size) +
                          " differs from decoder vocabulary size " +
                          std::to_string(model.config.decoder.vocab_size));
  }
}

std::vector<double> values(const std::vector<Var>& vars) {
  std::vector<double> out;
  out.reserve(vars.size());
  for (Var v : vars) out.push_back(v.item());
  return out;
}

struct TapeAlignment {
  HaltingTrace trace;
  std::vector<Var> contexts;
  std::size_t evaluations = 0;
};

TapeAlignment run_alignment(const ModelBinding& mb, const ModelConfig& cfg,
                            const std::vector<Var>& frames) {
  const Alignment al = align(mb, frames);
  TapeAlignment out;
  out.evaluations = al.activations.size();
  out.trace = segment(values(al.activations), cfg.halting.epsilon);
  close_tail(out.trace);
  out.contexts = pool_contexts(al.states, al.activations, out.trace);
  return out;
}

ContextSequence to_contexts(const std::vector<Var>& vars, const HaltingTrace& trace) {
  ContextSequence cs;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    cs.contexts.push_back(vars[i].value());
    cs.emission_steps.push_back(trace.segments[i].end - 1);
  }
  return cs;
}

}  // namespace

void BeamConfig::validate() const {
  if (width < 1) throw ConfigError("beam width must be at least 1");
  if (nbest < 1 || nbest > width) throw ConfigError("n-best size must lie in [1, beam width]");
  if (gamma < 0.0) throw ConfigError("gamma must be non-negative");
}

const Hypothesis& DecodeResult::best() const {
  if (nbest.empty()) throw StateError("decode result holds no hypotheses");
  return nbest.front();
}

BeamSearch::BeamSearch(const DecoderHead& head, const LmBinding* lm, const BeamConfig& cfg)
    : head_(&head), lm_(lm), cfg_(cfg) {
  cfg_.validate();
  Tape& t = head.out_w.tape();
  Entry root;
  root.dec_state = t.zeros(head.units);
  if (lm_) root.lm_state = t.zeros(lm_->config.units);
  beam_.push_back(std::move(root));
}

void BeamSearch::advance(Var ctx_window) {
  struct Candidate {
    double score;
    std::size_t parent;
    int symbol;
  };
  struct Expanded {
    DecoderStep dec;
    std::optional<LmStep> lm;
  };
  std::vector<Expanded> expanded;
  std::vector<Candidate> cands;
  const bool fuse = lm_ && cfg_.gamma != 0.0;
  for (std::size_t e = 0; e < beam_.size(); ++e) {
    const Entry& entry = beam_[e];
    const int prev = entry.hyp.symbols.empty() ? Vocab::kSos : entry.hyp.symbols.back();
    Expanded x{decode_step(*head_, entry.dec_state, prev, ctx_window), std::nullopt};
    if (lm_) x.lm = lm_step(*lm_, entry.lm_state, prev);
    const auto lp = x.dec.log_probs.value().data();
    for (std::size_t v = 0; v < lp.size(); ++v) {
      const double lm_lp = fuse ? x.lm->log_probs.value()[v] : 0.0;
      const double step = fuse ? joint_score(lp[v], lm_lp, cfg_.gamma) : lp[v];
      cands.push_back({entry.hyp.score + step, e, static_cast<int>(v)});
    }
    expanded.push_back(std::move(x));
  }
  // Prefixes in the beam are distinct and of equal length, so comparing
  // (parent prefix, symbol) orders the extended sequences lexicographically.
  auto better = [this](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.parent != b.parent) {
      return beam_[a.parent].hyp.symbols < beam_[b.parent].hyp.symbols;
    }
    return a.symbol < b.symbol;
  };
  const std::size_t keep = std::min(cfg_.width, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                    better);
  std::vector<Entry> next;
  next.reserve(keep);
  for (std::size_t k = 0; k < keep; ++k) {
    const Candidate& c = cands[k];
    Entry e;
    e.hyp.symbols = beam_[c.parent].hyp.symbols;
    e.hyp.symbols.push_back(c.symbol);
    e.hyp.score = c.score;
    e.dec_state = expanded[c.parent].dec.state;
    if (lm_) e.lm_state = expanded[c.parent].lm->state;
    next.push_back(std::move(e));
  }
  beam_ = std::move(next);
  ++steps_;
}

std::vector<Hypothesis> BeamSearch::hypotheses() const {
  std::vector<Hypothesis> out;
  out.reserve(beam_.size());
  for (const Entry& e : beam_) out.push_back(e.hyp);
  return out;
}

BatchAlignment batch_align(const AcsModel& model, const FrameSequence& frames) {
  Tape tape(false);
  const ModelBinding mb = bind_model(tape, model.params, model.config);
  const auto fv = frame_vars(tape, frames);
  TapeAlignment al = run_alignment(mb, model.config, fv);
  BatchAlignment out;
  out.contexts = to_contexts(al.contexts, al.trace);
  out.trace = std::move(al.trace);
  return out;
}

DecodeResult greedy_decode(const AcsModel& model, const FrameSequence& frames,
                           const LanguageModel* lm, double gamma, std::size_t window) {
  check_lm(model, lm);
  if (gamma < 0.0) throw ConfigError("gamma must be non-negative");
  Tape tape(false);
  const ModelBinding mb = bind_model(tape, model.params, model.config);
  const DecoderHead& head = mb.head(window);
  std::optional<LmBinding> lmb;
  if (lm) lmb = bind_lm(tape, lm->params, lm->config);
  const auto fv = frame_vars(tape, frames);
  TapeAlignment al = run_alignment(mb, model.config, fv);

  const Var zero = tape.zeros(model.config.decoder.context_dim);
  Var state = tape.zeros(head.units);
  Var lm_state = lmb ? tape.zeros(lmb->config.units) : Var();
  const bool fuse = lmb && gamma != 0.0;
  Hypothesis hyp;
  int prev = Vocab::kSos;
  for (std::size_t i = 0; i < al.contexts.size(); ++i) {
    const DecoderStep step =
        decode_step(head, state, prev, window_contexts(al.contexts, i, window, zero));
    std::optional<LmStep> lstep;
    if (lmb) lstep = lm_step(*lmb, lm_state, prev);
    const auto lp = step.log_probs.value().data();
    int best = 0;
    double best_score = 0.0;
    for (std::size_t v = 0; v < lp.size(); ++v) {
      const double s = fuse ? joint_score(lp[v], lstep->log_probs.value()[v], gamma) : lp[v];
      if (v == 0 || s > best_score) {
        best = static_cast<int>(v);
        best_score = s;
      }
    }
    hyp.symbols.push_back(best);
    hyp.score += best_score;
    state = step.state;
    if (lstep) lm_state = lstep->state;
    prev = best;
  }
  DecodeResult out;
  out.nbest.push_back(std::move(hyp));
  out.contexts = to_contexts(al.contexts, al.trace);
  out.trace = std::move(al.trace);
  out.halting_evaluations = al.evaluations;
  return out;
}

DecodeResult beam_decode(const AcsModel& model, const LanguageModel* lm,
                         const FrameSequence& frames, const BeamConfig& cfg) {
  cfg.validate();
  check_lm(model, lm);
  Tape tape(false);
  const ModelBinding mb = bind_model(tape, model.params, model.config);
  const DecoderHead& head = mb.head(cfg.window);
  std::optional<LmBinding> lmb;
  if (lm) lmb = bind_lm(tape, lm->params, lm->config);
  const auto fv = frame_vars(tape, frames);
  TapeAlignment al = run_alignment(mb, model.config, fv);

  BeamSearch beam(head, lmb ? &*lmb : nullptr, cfg);
  const Var zero = tape.zeros(model.config.decoder.context_dim);
  for (std::size_t i = 0; i < al.contexts.size(); ++i) {
    beam.advance(window_contexts(al.contexts, i, cfg.window, zero));
  }
  DecodeResult out;
  auto hyps = beam.hypotheses();
  hyps.resize(std::min(hyps.size(), cfg.nbest));
  out.nbest = std::move(hyps);
  out.contexts = to_contexts(al.contexts, al.trace);
  out.trace = std::move(al.trace);
  out.halting_evaluations = al.evaluations;
  return out;
}

std::vector<double> default_gamma_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 10; ++k) g.push_back(k / 10.0);
  return g;
}

GammaSearchResult tune_gamma(const AcsModel& model, const LanguageModel& lm,
                             const std::vector<FrameSequence>& dev_frames,
                             const std::vector<std::vector<int>>& dev_labels, BeamConfig cfg,
                             const std::vector<double>& grid) {
  if (dev_frames.size() != dev_labels.size() || dev_frames.empty()) {
    throw ContractError("tune_gamma: dev frames and labels must be non-empty and aligned");
  }
  if (grid.empty()) throw ConfigError("tune_gamma: empty grid");
  GammaSearchResult res;
  res.grid = grid;
  double best = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    cfg.gamma = grid[k];
    std::vector<std::vector<int>> hyps;
    for (const auto& f : dev_frames) hyps.push_back(beam_decode(model, &lm, f, cfg).best().symbols);
    const double ler = label_error_rate(dev_labels, hyps);
    res.error_rates.push_back(ler);
    if (k == 0 || ler < best || (ler == best && grid[k] < res.gamma)) {
      best = ler;
      res.gamma = grid[k];
    }
  }
  return res;
}

}  // namespace acstep
